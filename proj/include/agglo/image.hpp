#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace agglo {

struct ImageSize {
  int width = 0;
  int height = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

// Dense row-major 2D buffer.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : size_{width, height}, data_(static_cast<std::size_t>(width) * height, fill) {}
  explicit Grid(ImageSize size, T fill = T{}) : Grid(size.width, size.height, fill) {}

  int width() const { return size_.width; }
  int height() const { return size_.height; }
  ImageSize size() const { return size_; }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) {
    assert(x >= 0 && y >= 0 && x < size_.width && y < size_.height);
    return data_[static_cast<std::size_t>(y) * size_.width + x];
  }
  const T& operator()(int x, int y) const {
    assert(x >= 0 && y >= 0 && x < size_.width && y < size_.height);
    return data_[static_cast<std::size_t>(y) * size_.width + x];
  }

  std::span<T> row(int y) {
    return {data_.data() + static_cast<std::size_t>(y) * size_.width,
            static_cast<std::size_t>(size_.width)};
  }
  std::span<const T> row(int y) const {
    return {data_.data() + static_cast<std::size_t>(y) * size_.width,
            static_cast<std::size_t>(size_.width)};
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  ImageSize size_{};
  std::vector<T> data_;
};

using FloatImage = Grid<float>;
using Gray8 = Grid<std::uint8_t>;
// Binary raster: 0 = background, 1 = foreground.
using Raster = Grid<std::uint8_t>;

}  // namespace agglo
