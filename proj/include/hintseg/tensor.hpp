#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hintseg {

/// Raised when two operands disagree on spatial or channel layout.
class shape_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a coordinate falls outside an image.
class bounds_error : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Dense row-major H x W plane.
template <typename T>
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int h, int w, T fill = T{}) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {
    if (h < 0 || w < 0) throw shape_error("negative grid extent");
  }

  T& operator()(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& operator()(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

  bool contains(int y, int x) const { return y >= 0 && y < height && x >= 0 && x < width; }
  std::size_t size() const { return data.size(); }

  template <typename U>
  bool same_shape(const Grid<U>& o) const {
    return height == o.height && width == o.width;
  }
};

/// Dense channel-major C x H x W tensor.
template <typename T>
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, int h, int w, T fill = T{})
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {
    if (c < 0 || h < 0 || w < 0) throw shape_error("negative tensor extent");
  }

  T& operator()(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  const T& operator()(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  T* plane(int c) { return data.data() + c * plane_size(); }
  const T* plane(int c) const { return data.data() + c * plane_size(); }
  std::size_t size() const { return data.size(); }

  template <typename U>
  bool same_shape(const Tensor<U>& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  std::string shape_string() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
  Tensor<To> out(src.channels, src.height, src.width);
  for (std::size_t i = 0; i < src.size(); ++i) out.data[i] = static_cast<To>(src.data[i]);
  return out;
}

}  // namespace hintseg
