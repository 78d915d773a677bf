#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "agglo/error.hpp"
#include "agglo/ground_truth.hpp"
#include "agglo/image.hpp"
#include "agglo/parallel.hpp"

namespace agglo {

struct HoughParams {
  int r_min = 8;
  int r_max = 60;
  double accumulator_threshold = 0.3;  // fraction of 2*pi*r votes
  double edge_threshold = 0.08;        // fraction of the maximal Sobel magnitude
  double nms_distance_factor = 0.8;
  int max_circles = 1000;

  void validate(ImageSize size) const {
    if (r_min < 1 || r_max <= r_min)
      throw Error(ErrorKind::invalid_params, "radius range must satisfy 1 <= r_min < r_max");
    if (!(accumulator_threshold > 0 && accumulator_threshold <= 1))
      throw Error(ErrorKind::invalid_params, "accumulator_threshold must lie in (0, 1]");
    if (!(edge_threshold >= 0 && edge_threshold <= 1))
      throw Error(ErrorKind::invalid_params, "edge_threshold must lie in [0, 1]");
    if (!(nms_distance_factor >= 0)) throw Error(ErrorKind::invalid_params, "nms_distance_factor must be >= 0");
    if (max_circles < 0) throw Error(ErrorKind::invalid_params, "max_circles must be >= 0");
    if (r_max > 0.5 * std::hypot(size.width, size.height))
      throw Error(ErrorKind::invalid_params, "r_max exceeds half the image diagonal");
  }
};

struct Circle {
  double x = 0, y = 0;  // continuous image coordinates (pixel centres at +0.5)
  int radius = 0;
  double score = 0;
};

struct GradientMap {
  FloatImage magnitude;  // in [0, 1]
  FloatImage direction;  // atan2(gy, gx), radians
};

// 3x3 Sobel with clamped borders; magnitude scaled by the largest possible
// response of an 8-bit image, 4 * 255 * sqrt(2).
inline GradientMap gradient_map(const Gray8& image) {
  const int w = image.width(), h = image.height();
  GradientMap g{FloatImage(w, h, 0.0f), FloatImage(w, h, 0.0f)};
  const double scale = 1.0 / (4.0 * 255.0 * std::numbers::sqrt2);
  auto px = [&](int x, int y) { return double(image(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1))); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      g.magnitude(x, y) = static_cast<float>(std::hypot(gx, gy) * scale);
      g.direction(x, y) = static_cast<float>(std::atan2(gy, gx));
    }
  }
  return g;
}

namespace detail {

// Separable Gaussian (sigma 1, radius 3) with unit centre weight, so a vote
// pile concentrated in one cell keeps its count.
inline void smooth_votes(FloatImage& acc) {
  static constexpr int kRadius = 3;
  double k[2 * kRadius + 1];
  for (int i = -kRadius; i <= kRadius; ++i) k[i + kRadius] = std::exp(-0.5 * i * i);
  const int w = acc.width(), h = acc.height();
  FloatImage tmp(w, h, 0.0f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -kRadius; i <= kRadius; ++i) {
        const int xi = x + i;
        if (xi >= 0 && xi < w) s += k[i + kRadius] * acc(xi, y);
      }
      tmp(x, y) = static_cast<float>(s);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -kRadius; i <= kRadius; ++i) {
        const int yi = y + i;
        if (yi >= 0 && yi < h) s += k[i + kRadius] * tmp(x, yi);
      }
      acc(x, y) = static_cast<float>(s);
    }
}

struct EdgePoint {
  int x, y;
  double cos_t, sin_t;
};

}  // namespace detail

// Gradient-directed circular Hough transform. Every edge pixel votes at
// distance r along both gradient directions, one accumulator slice per
// radius; slice peaks above threshold * 2*pi*r become candidates, which are
// then suppressed greedily by centre distance.
inline std::vector<Circle> hough_circles(const Gray8& image, const HoughParams& params, int threads = 1) {
  params.validate(image.size());
  const int w = image.width(), h = image.height();
  const GradientMap grad = gradient_map(image);
  std::vector<detail::EdgePoint> edges;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (grad.magnitude(x, y) > 0 && grad.magnitude(x, y) >= params.edge_threshold) {
        const double t = grad.direction(x, y);
        edges.push_back({x, y, std::cos(t), std::sin(t)});
      }
  if (edges.empty()) return {};

  const int n_radii = params.r_max - params.r_min + 1;
  std::vector<std::vector<Circle>> per_radius(static_cast<std::size_t>(n_radii));
  parallel_for(static_cast<std::size_t>(n_radii), threads, [&](std::size_t ri) {
    const int r = params.r_min + static_cast<int>(ri);
    FloatImage acc(w, h, 0.0f);
    for (const auto& e : edges) {
      for (int sign : {1, -1}) {
        const int cx = static_cast<int>(std::lround(e.x + sign * r * e.cos_t));
        const int cy = static_cast<int>(std::lround(e.y + sign * r * e.sin_t));
        if (cx >= 0 && cy >= 0 && cx < w && cy < h) acc(cx, cy) += 1.0f;
      }
    }
    detail::smooth_votes(acc);
    const double full = 2 * std::numbers::pi * r;
    const double floor_votes = params.accumulator_threshold * full;
    auto& out = per_radius[ri];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const float v = acc(x, y);
        if (v < floor_votes) continue;
        bool peak = true;
        for (int dy = -1; dy <= 1 && peak; ++dy)
          for (int dx = -1; dx <= 1 && peak; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int xx = x + dx, yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
            const float n = acc(xx, yy);
            // Plateaus keep only their first cell in scan order.
            if (n > v || (n == v && (dy < 0 || (dy == 0 && dx < 0)))) peak = false;
          }
        if (peak) out.push_back({x + 0.5, y + 0.5, r, std::min(1.0, v / full)});
      }
  });

  std::vector<Circle> candidates;
  for (auto& v : per_radius) candidates.insert(candidates.end(), v.begin(), v.end());
  std::stable_sort(candidates.begin(), candidates.end(), [](const Circle& a, const Circle& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.radius != b.radius) return a.radius > b.radius;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  std::vector<Circle> kept;
  for (const auto& c : candidates) {
    if (static_cast<int>(kept.size()) >= params.max_circles) break;
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Circle& k) {
      return std::hypot(k.x - c.x, k.y - c.y) < params.nms_distance_factor * std::min(k.radius, c.radius);
    });
    if (!suppressed) kept.push_back(c);
  }
  return kept;
}

// Pixels whose centre lies within the circle, clipped to the frame.
inline std::vector<Pixel> disk_pixels(const Circle& c, ImageSize size) {
  std::vector<Pixel> out;
  const double r = c.radius;
  const int y0 = std::max(0, int(std::floor(c.y - r))), y1 = std::min(size.height - 1, int(std::ceil(c.y + r)));
  const int x0 = std::max(0, int(std::floor(c.x - r))), x1 = std::min(size.width - 1, int(std::ceil(c.x + r)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - c.x, dy = y + 0.5 - c.y;
      if (dx * dx + dy * dy <= r * r) out.push_back({x, y});
    }
  return out;
}

// Circles as detections with filled-disk masks, in score order.
inline std::vector<ParticleRecord> hough_detect(const Gray8& image, const HoughParams& params, int threads = 1) {
  std::vector<ParticleRecord> out;
  int next = 0;
  for (const auto& c : hough_circles(image, params, threads)) {
    const auto pixels = disk_pixels(c, image.size());
    if (pixels.empty()) continue;
    ParticleRecord rec;
    rec.particle_id = next++;
    rec.mask = mask_from_pixels(image.size(), pixels);
    rec.bbox = bounding_box(rec.mask);
    rec.visible_fraction = 1.0;
    rec.max_feret = max_feret_of_pixels(pixels);
    rec.diameter = 2.0 * c.radius;
    rec.score = c.score;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace agglo
