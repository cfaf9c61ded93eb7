#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "zsiis/errors.hpp"

namespace zsiis {

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height) * width;
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Dense planar C x H x W array. The tag keeps pixel-domain images and
/// wavelet-domain subbands from being mixed up at compile time.
template <typename T, typename Tag>
class Planar {
 public:
  using value_type = T;

  Planar() = default;
  Planar(int channels, int height, int width, T fill = T{0})
      : Planar(Shape{channels, height, width}, fill) {}
  explicit Planar(Shape shape, T fill = T{0}) : shape_(shape) {
    if (shape.channels < 1 || shape.height < 1 || shape.width < 1)
      throw DimensionError("tensor dimensions must be positive, got " +
                           to_string(shape));
    data_.assign(shape.size(), fill);
  }
  Planar(Shape shape, std::vector<T> values)
      : shape_(shape), data_(std::move(values)) {
    if (data_.size() != shape.size())
      throw DimensionError("value count does not match shape " +
                           to_string(shape));
  }

  const Shape& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  std::span<T> plane(int c) {
    return {data_.data() + c * shape_.plane_size(), shape_.plane_size()};
  }
  std::span<const T> plane(int c) const {
    return {data_.data() + c * shape_.plane_size(), shape_.plane_size()};
  }

  T& operator()(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) *
                     shape_.width +
                 x];
  }
  const T& operator()(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) *
                     shape_.width +
                 x];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Planar<U, Tag> cast() const {
    return Planar<U, Tag>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Planar&, const Planar&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

struct ImageTag {};
struct SubbandTag {};

template <typename T>
using BasicImage = Planar<T, ImageTag>;
template <typename T>
using BasicSubbands = Planar<T, SubbandTag>;

/// Pixel-domain image, nominally in [0,1].
using ImageTensor = BasicImage<float>;
/// 4C x H/2 x W/2 Haar coefficients, band-major (LL, HL, LH, HH).
using SubbandTensor = BasicSubbands<float>;

inline std::string to_string(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(what) + ": shape mismatch " +
                         to_string(a.shape()) + " vs " + to_string(b.shape()));
}

template <typename T, typename Tag>
Planar<T, Tag> clamp01(Planar<T, Tag> x) {
  for (T& v : x.values()) v = std::clamp(v, T{0}, T{1});
  return x;
}

/// Largest absolute elementwise difference.
template <typename T, typename Tag>
double max_abs_diff(const Planar<T, Tag>& a, const Planar<T, Tag>& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

template <typename T, typename Tag>
double max_abs(const Planar<T, Tag>& a) {
  double m = 0.0;
  for (T v : a.values()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

}  // namespace zsiis
