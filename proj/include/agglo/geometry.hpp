#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "agglo/image.hpp"

namespace agglo {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Vec3 operator*(double s, Vec3 a) { return a * s; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(Vec3 a) {
  const double n = norm(a);
  return n > 0 ? a * (1.0 / n) : a;
}

// Row-major 3x3 rotation.
struct Mat3 {
  double m[3][3]{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  Vec3 operator*(Vec3 v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }
};

// Rotation from a unit quaternion (w, x, y, z).
inline Mat3 rotation_from_quaternion(double w, double x, double y, double z) {
  Mat3 r;
  r.m[0][0] = 1 - 2 * (y * y + z * z);
  r.m[0][1] = 2 * (x * y - w * z);
  r.m[0][2] = 2 * (x * z + w * y);
  r.m[1][0] = 2 * (x * y + w * z);
  r.m[1][1] = 1 - 2 * (x * x + z * z);
  r.m[1][2] = 2 * (y * z - w * x);
  r.m[2][0] = 2 * (x * z - w * y);
  r.m[2][1] = 2 * (y * z + w * x);
  r.m[2][2] = 1 - 2 * (x * x + y * y);
  return r;
}

// Integer pixel coordinate; the pixel's centre.
struct Pixel {
  std::int64_t x = 0, y = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

inline std::int64_t cross(Pixel o, Pixel a, Pixel b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain. Returns the hull counter-clockwise without
// collinear points. Degenerate inputs give 1 or 2 vertices.
inline std::vector<Pixel> convex_hull(std::vector<Pixel> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 2) return pts;
  std::vector<Pixel> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  if (hull.size() == 2 && hull[0] == hull[1]) hull.resize(1);
  return hull;
}

// Boundary pixels only: the hull of a pixel set is the hull of its row
// extremes, which keeps hull construction linear in the mask height.
inline std::vector<Pixel> row_extremes(const Raster& raster) {
  std::vector<Pixel> pts;
  for (int y = 0; y < raster.height(); ++y) {
    const auto row = raster.row(y);
    int first = -1, last = -1;
    for (int x = 0; x < raster.width(); ++x) {
      if (row[x]) {
        if (first < 0) first = x;
        last = x;
      }
    }
    if (first >= 0) {
      pts.push_back({first, y});
      if (last != first) pts.push_back({last, y});
    }
  }
  return pts;
}

inline std::int64_t squared_distance(Pixel a, Pixel b) {
  const auto dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Largest squared distance between two hull vertices (rotating calipers).
inline std::int64_t hull_diameter_squared(const std::vector<Pixel>& hull) {
  const std::size_t n = hull.size();
  if (n < 2) return 0;
  if (n == 2) return squared_distance(hull[0], hull[1]);
  std::int64_t best = 0;
  std::size_t j = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const Pixel a = hull[i], b = hull[(i + 1) % n];
    while (std::abs(cross(a, b, hull[(j + 1) % n])) > std::abs(cross(a, b, hull[j])))
      j = (j + 1) % n;
    best = std::max({best, squared_distance(a, hull[j]), squared_distance(b, hull[j])});
  }
  return best;
}

// Fills every pixel whose centre lies inside or on the hull. Integer
// arithmetic, so lattice points on edges are included exactly.
inline void fill_hull(const std::vector<Pixel>& hull, Raster& out) {
  const std::size_t n = hull.size();
  if (n == 0) return;
  std::int64_t min_y = hull[0].y, max_y = hull[0].y;
  for (const auto& p : hull) {
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  min_y = std::max<std::int64_t>(min_y, 0);
  max_y = std::min<std::int64_t>(max_y, out.height() - 1);
  for (std::int64_t y = min_y; y <= max_y; ++y) {
    // Intersect the horizontal line with each edge as an exact rational span.
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
      const Pixel a = hull[i], b = hull[(i + 1) % n];
      if ((a.y <= y && y <= b.y) || (b.y <= y && y <= a.y)) {
        if (a.y == b.y) {
          lo = std::min({lo, double(a.x), double(b.x)});
          hi = std::max({hi, double(a.x), double(b.x)});
        } else {
          const double x = a.x + double(b.x - a.x) * double(y - a.y) / double(b.y - a.y);
          lo = std::min(lo, x);
          hi = std::max(hi, x);
        }
      }
    }
    if (lo > hi) continue;
    // Round inwards, then verify with exact cross products against
    // floating-point slop at the span ends.
    auto inside = [&](std::int64_t x) {
      if (n == 1) return x == hull[0].x && y == hull[0].y;
      const Pixel p{x, y};
      if (n == 2) {
        return cross(hull[0], hull[1], p) == 0 &&
               std::min(hull[0].x, hull[1].x) <= x && x <= std::max(hull[0].x, hull[1].x);
      }
      for (std::size_t i = 0; i < n; ++i)
        if (cross(hull[i], hull[(i + 1) % n], p) < 0) return false;
      return true;
    };
    auto x0 = static_cast<std::int64_t>(std::ceil(lo - 1e-9));
    auto x1 = static_cast<std::int64_t>(std::floor(hi + 1e-9));
    while (x0 <= x1 && !inside(x0)) ++x0;
    while (x1 >= x0 && !inside(x1)) --x1;
    x0 = std::max<std::int64_t>(x0, 0);
    x1 = std::min<std::int64_t>(x1, out.width() - 1);
    for (std::int64_t x = x0; x <= x1; ++x) out(int(x), int(y)) = 1;
  }
}

}  // namespace agglo
