#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agglo/geometry.hpp"
#include "agglo/image.hpp"
#include "agglo/mask.hpp"
#include "agglo/render.hpp"
#include "agglo/scene.hpp"

namespace agglo {

inline constexpr const char* kParticleCategory = "primary_particle";

struct ParticleRecord {
  std::int64_t annotation_id = 0;  // assigned on export
  int particle_id = 0;
  int agglomerate_id = -1;         // -1 when unknown (detections)
  Mask mask;
  BBox bbox;
  double visible_fraction = 1.0;
  double max_feret = 0;
  double diameter = 0;             // true sphere diameter; 0 when unknown
  std::optional<double> score;     // detections only
};

struct AnnotatedImage {
  std::int64_t image_id = 0;
  std::string file_name;
  ImageSize size;
  Gray8 pixels;  // may be empty after import
  std::vector<ParticleRecord> particles;
};

struct ExtractOptions {
  bool convexify = true;
  double min_visible_fraction = 0.01;
};

// Column-major linear index, the RLE scan order.
inline std::uint64_t column_major_index(int x, int y, int height) {
  return static_cast<std::uint64_t>(x) * static_cast<std::uint64_t>(height) +
         static_cast<std::uint64_t>(y);
}

// RLE straight from column-major indices (sorted, unique).
inline Mask mask_from_indices(ImageSize size, const std::vector<std::uint64_t>& sorted) {
  Mask m{size.width, size.height, {}};
  std::uint64_t pos = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[j] + 1) ++j;
    m.runs.push_back(static_cast<std::uint32_t>(sorted[i] - pos));
    m.runs.push_back(static_cast<std::uint32_t>(j - i + 1));
    pos = sorted[j] + 1;
    i = j + 1;
  }
  m.runs.push_back(static_cast<std::uint32_t>(size.pixels() - pos));
  if (m.runs.size() > 1 && m.runs.back() == 0) m.runs.pop_back();
  return m;
}

inline Mask mask_from_pixels(ImageSize size, const std::vector<Pixel>& pixels) {
  std::vector<std::uint64_t> idx;
  idx.reserve(pixels.size());
  for (const auto& p : pixels) idx.push_back(column_major_index(int(p.x), int(p.y), size.height));
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return mask_from_indices(size, idx);
}

// Filled convex hull of a pixel set, as a pixel list.
inline std::vector<Pixel> convex_fill(const std::vector<Pixel>& pixels) {
  const auto hull = convex_hull(pixels);
  if (hull.empty()) return {};
  std::int64_t x0 = hull[0].x, y0 = hull[0].y, x1 = x0, y1 = y0;
  for (const auto& p : hull) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  std::vector<Pixel> local = hull;
  for (auto& p : local) p = {p.x - x0, p.y - y0};
  Raster r(int(x1 - x0 + 1), int(y1 - y0 + 1), 0);
  fill_hull(local, r);
  std::vector<Pixel> out;
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x)
      if (r(x, y)) out.push_back({x + x0, y + y0});
  return out;
}

// Pixels whose centre lies inside the sphere's projected disk, clipped to
// the frame.
inline std::uint64_t projected_disk_pixels(const Sphere& s, ImageSize size) {
  const int y0 = std::max(0, int(std::floor(s.center.y - s.radius)));
  const int y1 = std::min(size.height - 1, int(std::ceil(s.center.y + s.radius)));
  std::uint64_t n = 0;
  for (int y = y0; y <= y1; ++y) {
    const double dy = y + 0.5 - s.center.y;
    const double h2 = s.radius * s.radius - dy * dy;
    if (h2 < 0) continue;
    const double h = std::sqrt(h2);
    const int xa = std::max(0, int(std::ceil(s.center.x - h - 0.5)));
    const int xb = std::min(size.width - 1, int(std::floor(s.center.x + h - 0.5)));
    if (xb >= xa) n += static_cast<std::uint64_t>(xb - xa + 1);
  }
  return n;
}

inline double max_feret_of_pixels(const std::vector<Pixel>& pixels) {
  return std::sqrt(double(hull_diameter_squared(convex_hull(pixels)))) + 1.0;
}

// Per-particle occlusion-aware masks from the instance map. The visible
// fraction compares visible pixels with the unoccluded projected disk and
// is capped at 1 (sintering necks can add pixels beyond the disk).
inline std::vector<ParticleRecord> extract_masks(const Scene& scene, const RenderMaps& maps,
                                                 const ExtractOptions& opts = {}) {
  const ImageSize size = maps.size();
  std::map<int, std::vector<Pixel>> visible;
  for (int y = 0; y < size.height; ++y)
    for (int x = 0; x < size.width; ++x)
      if (const auto id = maps.instance_id(x, y); id != kNoInstance) visible[id].push_back({x, y});

  std::map<int, const Sphere*> sphere_of;
  for (const auto& s : scene.spheres) sphere_of[s.particle_id] = &s;

  std::vector<ParticleRecord> out;
  for (auto& [id, pixels] : visible) {
    const auto it = sphere_of.find(id);
    if (it == sphere_of.end()) continue;
    const Sphere& s = *it->second;
    const std::uint64_t full = projected_disk_pixels(s, size);
    const double fraction =
        full == 0 ? 1.0 : std::min(1.0, double(pixels.size()) / double(full));
    if (fraction < opts.min_visible_fraction) continue;

    ParticleRecord rec;
    rec.particle_id = id;
    if (auto a = scene.agglomerate_of.find(id); a != scene.agglomerate_of.end())
      rec.agglomerate_id = a->second;
    rec.visible_fraction = fraction;
    rec.diameter = 2 * s.radius;
    if (opts.convexify) pixels = convex_fill(pixels);
    rec.mask = mask_from_pixels(size, pixels);
    rec.max_feret = max_feret_of_pixels(pixels);
    rec.bbox = bounding_box(rec.mask);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace agglo
