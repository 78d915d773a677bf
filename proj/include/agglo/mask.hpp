#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "agglo/error.hpp"
#include "agglo/image.hpp"

namespace agglo {

// Uncompressed column-major run-length encoding. Runs alternate
// background/foreground and always start with a (possibly empty)
// background run.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> runs;

  friend bool operator==(const Mask&, const Mask&) = default;
};

struct BBox {
  int x = 0, y = 0, w = 0, h = 0;
  friend bool operator==(const BBox&, const BBox&) = default;
};

inline Mask encode_rle(const Raster& raster) {
  if (raster.width() <= 0 || raster.height() <= 0)
    throw Error(ErrorKind::invalid_input, "raster dimensions must be positive");
  Mask m{raster.width(), raster.height(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int x = 0; x < raster.width(); ++x) {
    for (int y = 0; y < raster.height(); ++y) {
      const std::uint8_t v = raster(x, y) ? 1 : 0;
      if (v != current) {
        m.runs.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  m.runs.push_back(run);
  return m;
}

inline void validate_rle(const Mask& m) {
  if (m.width <= 0 || m.height <= 0)
    throw Error(ErrorKind::corrupt_mask, "mask dimensions must be positive");
  const std::uint64_t total =
      std::accumulate(m.runs.begin(), m.runs.end(), std::uint64_t{0});
  if (total != static_cast<std::uint64_t>(m.width) * static_cast<std::uint64_t>(m.height))
    throw Error(ErrorKind::corrupt_mask, "runs sum to " + std::to_string(total) + ", expected " +
                                             std::to_string(std::uint64_t(m.width) * m.height));
}

inline Raster decode_rle(const Mask& m) {
  validate_rle(m);
  Raster raster(m.width, m.height, 0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < m.runs.size(); ++i) {
    if (i % 2 == 1) {
      for (std::size_t p = pos; p < pos + m.runs[i]; ++p)
        raster(static_cast<int>(p / m.height), static_cast<int>(p % m.height)) = 1;
    }
    pos += m.runs[i];
  }
  return raster;
}

inline std::uint64_t area(const Mask& m) {
  std::uint64_t a = 0;
  for (std::size_t i = 1; i < m.runs.size(); i += 2) a += m.runs[i];
  return a;
}

inline std::uint64_t area(const Raster& r) {
  return static_cast<std::uint64_t>(std::count_if(r.data().begin(), r.data().end(),
                                                  [](std::uint8_t v) { return v != 0; }));
}

// Foreground pixels shared by two masks, merged run by run.
inline std::uint64_t intersection_area(const Mask& a, const Mask& b) {
  std::uint64_t inter = 0;
  std::size_t ia = 0, ib = 0;
  std::uint64_t ra = a.runs.empty() ? 0 : a.runs[0], rb = b.runs.empty() ? 0 : b.runs[0];
  while (ia < a.runs.size() && ib < b.runs.size()) {
    const std::uint64_t step = std::min(ra, rb);
    if ((ia % 2 == 1) && (ib % 2 == 1)) inter += step;
    ra -= step;
    rb -= step;
    while (ra == 0 && ++ia < a.runs.size()) ra = a.runs[ia];
    while (rb == 0 && ++ib < b.runs.size()) rb = b.runs[ib];
  }
  return inter;
}

// Tight bounding box of the foreground; all zeros when empty.
inline BBox bounding_box(const Mask& m) {
  int x0 = m.width, y0 = m.height, x1 = -1, y1 = -1;
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < m.runs.size(); ++i) {
    const std::uint64_t len = m.runs[i];
    if (i % 2 == 1 && len > 0) {
      const std::uint64_t first = pos, last = pos + len - 1;
      const int cx0 = int(first / m.height), cx1 = int(last / m.height);
      x0 = std::min(x0, cx0);
      x1 = std::max(x1, cx1);
      if (cx0 == cx1) {
        y0 = std::min(y0, int(first % m.height));
        y1 = std::max(y1, int(last % m.height));
      } else {
        // Wraps a column boundary: touches both the last and the first row.
        y0 = 0;
        y1 = m.height - 1;
      }
    }
    pos += len;
  }
  if (x1 < 0) return {};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

inline BBox bounding_box(const Raster& r) {
  int x0 = r.width(), y0 = r.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x)
      if (r(x, y)) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return {};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

}  // namespace agglo
