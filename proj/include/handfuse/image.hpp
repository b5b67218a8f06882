#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "handfuse/error.hpp"
#include "handfuse/geometry.hpp"

namespace handfuse {

/// Row-major raster. `Tag` keeps semantically different rasters with the same
/// pixel type (gray levels vs. binary masks) from being mixed up.
template <typename T, typename Tag = void>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) fail(Errc::InvalidInput, "image dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  Image(int width, int height, std::vector<T> pixels) : width_(width), height_(height), data_(std::move(pixels)) {
    if (width <= 0 || height <= 0) fail(Errc::InvalidInput, "image dimensions must be positive");
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
      fail(Errc::InvalidInput, "pixel count does not match width x height");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator()(Point p) { return (*this)(p.x, p.y); }
  const T& operator()(Point p) const { return (*this)(p.x, p.y); }

  /// Out-of-range reads return `outside`.
  T get(int x, int y, T outside = T{}) const { return contains(x, y) ? (*this)(x, y) : outside; }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(Rgb, Rgb) = default;
};

struct BinaryTag;

using RgbImage = Image<Rgb>;
using GrayImage = Image<std::uint8_t>;
/// Foreground = 1, background = 0.
using BinaryImage = Image<std::uint8_t, BinaryTag>;
/// Real-valued raster; used for the soft hand coverage in [0, 1].
using FloatImage = Image<float>;

template <typename T, typename Tag>
double sample_bilinear(const Image<T, Tag>& img, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  const double v00 = img.get(x0, y0), v10 = img.get(x0 + 1, y0);
  const double v01 = img.get(x0, y0 + 1), v11 = img.get(x0 + 1, y0 + 1);
  return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
}

template <typename T, typename Tag>
double sample_bilinear(const Image<T, Tag>& img, PointF p) {
  return sample_bilinear(img, p.x, p.y);
}

inline std::size_t count_foreground(const BinaryImage& mask) {
  return static_cast<std::size_t>(std::count(mask.pixels().begin(), mask.pixels().end(), std::uint8_t{1}));
}

template <typename Img>
Img flip_horizontal(const Img& img) {
  Img out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out(img.width() - 1 - x, y) = img(x, y);
  return out;
}

}  // namespace handfuse
