#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "agglo/error.hpp"

namespace agglo {

struct LossPoint {
  double alpha = 0;  // learning rate
  double loss = 0;
};

enum class CurveKind { training, validation };

struct LossCurve {
  std::vector<LossPoint> points;
  CurveKind kind = CurveKind::training;

  void validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!(points[i].alpha > 0)) throw Error(ErrorKind::invalid_input, "learning rates must be > 0");
      if (i > 0 && !(points[i].alpha > points[i - 1].alpha))
        throw Error(ErrorKind::invalid_input, "learning rates must be strictly increasing");
    }
  }
};

// Two-column CSV (alpha, loss). A non-numeric first line is taken as header.
inline LossCurve parse_loss_csv(const std::string& text, CurveKind kind = CurveKind::training) {
  LossCurve curve{{}, kind};
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    LossPoint p;
    if (!(fields >> p.alpha >> p.loss)) {
      if (line_no == 1) continue;
      throw Error(ErrorKind::invalid_input, "malformed loss CSV at line " + std::to_string(line_no));
    }
    curve.points.push_back(p);
  }
  curve.validate();
  return curve;
}

struct LrRangeFit {
  double m = 0;  // slope of the descending segment
  double b = 0;  // its intercept
  double c = 0;  // plateau
  double alpha_min = 0;
  double alpha_max = 0;
  double rms_residual = 0;
  std::size_t breakpoint = 0;  // retained points left of the plateau
};

// Learning rate at the loss maximum after a centred running median of up
// to 5 points (the window shrinks symmetrically at the ends); the first
// maximum wins.
inline double detect_alpha_min(const LossCurve& curve) {
  curve.validate();
  const auto& pts = curve.points;
  if (pts.empty()) throw Error(ErrorKind::invalid_input, "empty loss curve");
  std::size_t best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::size_t half = std::min<std::size_t>({2, i, pts.size() - 1 - i});
    const std::size_t lo = i - half, hi = i + half;
    std::vector<double> window;
    for (std::size_t j = lo; j <= hi; ++j) window.push_back(pts[j].loss);
    std::nth_element(window.begin(), window.begin() + window.size() / 2, window.end());
    const double med = window[window.size() / 2];
    if (med > best_v) {
      best_v = med;
      best = i;
    }
  }
  return pts[best].alpha;
}

// Least-squares fit of max(m*alpha + b, c) to the points with
// alpha >= alpha_min. Every split of the retained points into a leading
// line segment (>= 2 points) and a trailing plateau (>= 1 point) is tried;
// the split with the smallest total squared residual among those with a
// descending line wins, earliest split first on ties.
inline LrRangeFit fit_lr_range(const LossCurve& curve, double alpha_min) {
  curve.validate();
  std::vector<LossPoint> pts;
  for (const auto& p : curve.points)
    if (p.alpha >= alpha_min) pts.push_back(p);
  if (pts.size() < 4)
    throw Error(ErrorKind::invalid_input, "LR range fit needs at least 4 points with alpha >= alpha_min");

  const std::size_t n = pts.size();
  std::optional<LrRangeFit> best;
  double best_sse = std::numeric_limits<double>::infinity();
  for (std::size_t split = 2; split < n; ++split) {
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < split; ++i) {
      sx += pts[i].alpha;
      sy += pts[i].loss;
    }
    const double k = double(split);
    const double mx = sx / k, my = sy / k;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < split; ++i) {
      sxx += (pts[i].alpha - mx) * (pts[i].alpha - mx);
      sxy += (pts[i].alpha - mx) * (pts[i].loss - my);
    }
    const double m = sxy / sxx;
    if (!(m < 0)) continue;
    const double b = my - m * mx;
    double c = 0;
    for (std::size_t i = split; i < n; ++i) c += pts[i].loss;
    c /= double(n - split);
    double sse = 0;
    for (std::size_t i = 0; i < split; ++i) {
      const double r = pts[i].loss - (m * pts[i].alpha + b);
      sse += r * r;
    }
    for (std::size_t i = split; i < n; ++i) sse += (pts[i].loss - c) * (pts[i].loss - c);
    if (sse < best_sse) {
      best_sse = sse;
      best = LrRangeFit{m, b, c, alpha_min, (c - b) / m, std::sqrt(sse / double(n)), split};
    }
  }
  if (!best) throw Error(ErrorKind::no_descent, "no descending segment found; range test inconclusive");
  return *best;
}

struct CyclicSchedule {
  double alpha_min = 0;
  double alpha_max = 0;
  long cycle_length = 2;  // iterations, even

  void validate() const {
    if (!(alpha_min > 0 && alpha_min < alpha_max))
      throw Error(ErrorKind::invalid_params, "schedule needs 0 < alpha_min < alpha_max");
    if (cycle_length < 2 || cycle_length % 2 != 0)
      throw Error(ErrorKind::invalid_params, "cycle length must be even and >= 2");
  }
};

// Triangle wave: alpha_min at the start of each cycle, alpha_max at its
// midpoint. Vertex values are returned exactly.
inline double triangular_lr(long iteration, const CyclicSchedule& s) {
  s.validate();
  if (iteration < 0) throw Error(ErrorKind::invalid_input, "iteration must be >= 0");
  const long half = s.cycle_length / 2;
  const long pos = iteration % s.cycle_length;
  if (pos == 0) return s.alpha_min;
  if (pos == half) return s.alpha_max;
  const double span = s.alpha_max - s.alpha_min;
  if (pos < half) return s.alpha_min + span * double(pos) / double(half);
  return s.alpha_max - span * double(pos - half) / double(half);
}

struct EarlyStopState {
  int patience = 1;
  double best_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;  // 1-based; 0 before the first observation
  int epoch = 0;
  std::vector<double> history;
};

struct EarlyStopDecision {
  EarlyStopState state;
  bool stop = false;
};

// Records one validation loss. A strictly lower loss becomes the new best;
// training stops once `patience` epochs have passed without improvement.
inline EarlyStopDecision early_stop_check(EarlyStopState state, double val_loss) {
  if (state.patience < 1) throw Error(ErrorKind::invalid_params, "patience must be >= 1");
  ++state.epoch;
  state.history.push_back(val_loss);
  if (val_loss < state.best_loss) {
    state.best_loss = val_loss;
    state.best_epoch = state.epoch;
  }
  const bool stop = state.epoch - state.best_epoch >= state.patience;
  return {std::move(state), stop};
}

}  // namespace agglo
