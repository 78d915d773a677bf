#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "agglo/error.hpp"
#include "agglo/geometry.hpp"
#include "agglo/mask.hpp"
#include "agglo/parallel.hpp"

namespace agglo {

// ---------------------------------------------------------------- shape --

struct MaskMetrics {
  std::uint64_t area = 0;
  std::uint64_t convex_area = 0;
  double solidity = 0;
  double max_feret = 0;
};

// Max Feret diameter: largest distance between foreground pixel centres
// (rotating calipers over their hull) plus 1 px for the pixel extent.
inline double max_feret(const Raster& raster) {
  const auto hull = convex_hull(row_extremes(raster));
  if (hull.empty()) throw Error(ErrorKind::empty_mask, "max_feret of an empty mask");
  return std::sqrt(double(hull_diameter_squared(hull))) + 1.0;
}

inline double max_feret(const Mask& mask) { return max_feret(decode_rle(mask)); }

// Area, filled-hull area, their ratio (solidity) and max Feret diameter.
inline MaskMetrics solidity(const Raster& raster) {
  const auto hull = convex_hull(row_extremes(raster));
  if (hull.empty()) throw Error(ErrorKind::empty_mask, "solidity of an empty mask");
  Raster filled(raster.width(), raster.height(), 0);
  fill_hull(hull, filled);
  MaskMetrics m;
  m.area = area(raster);
  m.convex_area = area(filled);
  m.solidity = double(m.area) / double(m.convex_area);
  m.max_feret = std::sqrt(double(hull_diameter_squared(hull))) + 1.0;
  return m;
}

inline MaskMetrics solidity(const Mask& mask) { return solidity(decode_rle(mask)); }

// ------------------------------------------------------------------ PSD --

struct PsdStats {
  double d_g = 0;
  double sigma_g = 1;
  std::size_t n_particles = 0;
};

// Geometric mean and geometric (population) standard deviation.
inline PsdStats psd_stats(std::span<const double> diameters) {
  if (diameters.empty()) throw Error(ErrorKind::invalid_input, "psd_stats needs at least one diameter");
  double sum = 0;
  for (double d : diameters) {
    if (!(d > 0)) throw Error(ErrorKind::invalid_input, "diameters must be > 0");
    sum += std::log(d);
  }
  const double n = double(diameters.size());
  const double mean = sum / n;
  double ss = 0;
  for (double d : diameters) {
    const double t = std::log(d) - mean;
    ss += t * t;
  }
  return {std::exp(mean), std::exp(std::sqrt(ss / n)), diameters.size()};
}

struct Histogram {
  std::vector<double> bin_edges;
  std::vector<double> probabilities;

  void validate() const {
    if (bin_edges.size() < 2 || probabilities.size() + 1 != bin_edges.size())
      throw Error(ErrorKind::invalid_input, "histogram needs len(probabilities) = len(edges) - 1");
    if (!std::is_sorted(bin_edges.begin(), bin_edges.end(), std::less_equal<>{}) ||
        std::adjacent_find(bin_edges.begin(), bin_edges.end()) != bin_edges.end())
      throw Error(ErrorKind::invalid_input, "histogram edges must be strictly ascending");
    double total = 0;
    for (double p : probabilities) {
      if (!(p >= 0)) throw Error(ErrorKind::invalid_input, "histogram mass must be nonnegative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw Error(ErrorKind::invalid_input, "histogram probabilities must sum to 1");
  }
};

inline std::vector<double> log_spaced_edges(double lo, double hi, int bins) {
  if (!(lo > 0 && hi > lo && bins >= 1))
    throw Error(ErrorKind::invalid_input, "log-spaced edges need 0 < lo < hi and bins >= 1");
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i <= bins; ++i) edges[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / bins);
  edges.front() = lo;
  edges.back() = hi;
  return edges;
}

// Normalised histogram; values outside [edges.front(), edges.back()] are
// ignored, the last bin is closed on the right.
inline Histogram make_histogram(std::span<const double> values, std::vector<double> edges) {
  Histogram h{std::move(edges), {}};
  h.probabilities.assign(h.bin_edges.size() - 1, 0.0);
  double inside = 0;
  for (double v : values) {
    if (v < h.bin_edges.front() || v > h.bin_edges.back()) continue;
    auto it = std::upper_bound(h.bin_edges.begin(), h.bin_edges.end(), v);
    std::size_t bin = static_cast<std::size_t>(it - h.bin_edges.begin()) - 1;
    bin = std::min(bin, h.probabilities.size() - 1);
    h.probabilities[bin] += 1;
    inside += 1;
  }
  if (inside == 0) throw Error(ErrorKind::invalid_input, "no values fall inside the histogram range");
  for (auto& p : h.probabilities) p /= inside;
  return h;
}

struct KlResult {
  double value = 0;
  double excluded_mass_p = 0;
  double excluded_mass_q = 0;
  // Set when either distribution lost more than 5 % of its mass to bins
  // excluded for a zero in p or q.
  bool exclusion_flagged = false;
};

// sum p log(p/q), natural log. Bins where p or q is zero are skipped and
// the remaining mass is used without renormalisation.
inline KlResult kl_divergence_detailed(const Histogram& p, const Histogram& q) {
  p.validate();
  q.validate();
  if (p.bin_edges != q.bin_edges)
    throw Error(ErrorKind::invalid_input, "KL divergence needs identical bin edges");
  KlResult r;
  for (std::size_t i = 0; i < p.probabilities.size(); ++i) {
    const double pi = p.probabilities[i], qi = q.probabilities[i];
    if (pi == 0 || qi == 0) {
      r.excluded_mass_p += pi;
      r.excluded_mass_q += qi;
      continue;
    }
    r.value += pi * std::log(pi / qi);
  }
  r.exclusion_flagged = r.excluded_mass_p > 0.05 || r.excluded_mass_q > 0.05;
  return r;
}

inline double kl_divergence(const Histogram& p, const Histogram& q) {
  return kl_divergence_detailed(p, q).value;
}

// ------------------------------------------------------------ detection --

inline double iou(const Mask& a, const Mask& b) {
  if (a.width != b.width || a.height != b.height)
    throw Error(ErrorKind::invalid_input, "iou of masks with different dimensions");
  const std::uint64_t inter = intersection_area(a, b);
  const std::uint64_t uni = area(a) + area(b) - inter;
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

// One ground-truth object or detection, keyed by image.
struct EvalObject {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  Mask mask;
  std::optional<double> score;  // required for detections
};

struct ThresholdCurve {
  double iou_threshold = 0;
  double ap = 0;
  std::vector<double> precision;  // per detection, in score order
  std::vector<double> recall;
};

struct ApReport {
  double ap = 0;
  double ap50 = 0;
  double ap75 = 0;
  std::size_t gt_count = 0;
  std::size_t det_count = 0;
  std::vector<ThresholdCurve> curves;
};

// IoU thresholds 0.50, 0.55, ..., 0.95 as correctly rounded decimals.
inline std::array<double, 10> iou_thresholds() {
  std::array<double, 10> t{};
  for (int i = 0; i < 10; ++i) t[static_cast<std::size_t>(i)] = (50.0 + 5.0 * i) / 100.0;
  return t;
}

// 101-point interpolated AP from per-detection precision/recall.
inline double interpolated_ap(std::span<const double> precision, std::span<const double> recall) {
  std::vector<double> envelope(precision.begin(), precision.end());
  for (std::size_t i = envelope.size(); i-- > 1;) envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
  double sum = 0;
  std::size_t idx = 0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r / 100.0;
    while (idx < recall.size() && recall[idx] < level) ++idx;
    if (idx < recall.size()) sum += envelope[idx];
  }
  return sum / 101.0;
}

// Greedy score-ordered matching per IoU threshold and 101-point AP.
// Detections are ranked by descending score, ties by ascending id; each
// takes the unmatched ground truth of its image with the highest IoU >= t.
// With no ground truth at all every AP is reported as 0.
inline ApReport match_and_ap(const std::vector<EvalObject>& gt, const std::vector<EvalObject>& det,
                             int threads = 1) {
  for (const auto& d : det)
    if (!d.score) throw Error(ErrorKind::invalid_input, "detection " + std::to_string(d.id) + " has no score");

  std::map<std::int64_t, std::vector<std::size_t>> gt_by_image;
  for (std::size_t i = 0; i < gt.size(); ++i) gt_by_image[gt[i].image_id].push_back(i);

  std::vector<std::size_t> order(det.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (*det[a].score != *det[b].score) return *det[a].score > *det[b].score;
    return det[a].id < det[b].id;
  });

  // IoU of each detection against the ground truth of its image.
  std::vector<std::vector<double>> ious(det.size());
  std::vector<BBox> gt_box(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) gt_box[i] = bounding_box(gt[i].mask);
  parallel_for(det.size(), threads, [&](std::size_t d) {
    auto it = gt_by_image.find(det[d].image_id);
    if (it == gt_by_image.end()) return;
    const BBox db = bounding_box(det[d].mask);
    ious[d].resize(it->second.size(), 0.0);
    for (std::size_t j = 0; j < it->second.size(); ++j) {
      const BBox& gb = gt_box[it->second[j]];
      const bool disjoint = db.w == 0 || gb.w == 0 || db.x >= gb.x + gb.w || gb.x >= db.x + db.w ||
                            db.y >= gb.y + gb.h || gb.y >= db.y + db.h;
      if (!disjoint) ious[d][j] = iou(det[d].mask, gt[it->second[j]].mask);
    }
  });

  ApReport report;
  report.gt_count = gt.size();
  report.det_count = det.size();
  const auto thresholds = iou_thresholds();
  double total = 0;
  for (double t : thresholds) {
    ThresholdCurve curve;
    curve.iou_threshold = t;
    std::map<std::int64_t, std::vector<bool>> taken;
    for (const auto& [img, idx] : gt_by_image) taken[img].assign(idx.size(), false);
    std::size_t tp = 0, fp = 0;
    for (std::size_t d : order) {
      int best = -1;
      double best_iou = -1;
      if (auto it = taken.find(det[d].image_id); it != taken.end()) {
        for (std::size_t j = 0; j < it->second.size(); ++j) {
          if (it->second[j] || ious[d][j] < t) continue;
          if (ious[d][j] > best_iou) {
            best_iou = ious[d][j];
            best = static_cast<int>(j);
          }
        }
        if (best >= 0) it->second[static_cast<std::size_t>(best)] = true;
      }
      if (best >= 0) ++tp;
      else ++fp;
      curve.precision.push_back(double(tp) / double(tp + fp));
      curve.recall.push_back(gt.empty() ? 0.0 : double(tp) / double(gt.size()));
    }
    curve.ap = gt.empty() ? 0.0 : interpolated_ap(curve.precision, curve.recall);
    total += curve.ap;
    report.curves.push_back(std::move(curve));
  }
  report.ap = total / double(thresholds.size());
  report.ap50 = report.curves[0].ap;
  report.ap75 = report.curves[5].ap;
  return report;
}

// ----------------------------------------------------------------- error --

// (actual - desired) / desired, in percent.
inline double percentage_error(double actual, double desired) {
  if (desired == 0) throw Error(ErrorKind::invalid_input, "percentage error with desired value 0");
  return (actual - desired) / desired * 100.0;
}

// Mean absolute percentage error, in percent.
inline double mape(std::span<const double> errors) {
  if (errors.empty()) throw Error(ErrorKind::invalid_input, "MAPE of an empty error list");
  double sum = 0;
  for (double e : errors) sum += std::abs(e);
  return sum / double(errors.size());
}

}  // namespace agglo
