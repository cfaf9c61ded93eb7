#pragma once

#include <array>

#include "zsiis/tensor.hpp"

namespace zsiis {

/// Weights of the hiding, low-frequency, secret-revealing and
/// cover-revealing terms.
struct LossWeights {
  double hiding = 1.0;
  double freq = 10.0;
  double srev = 5.0;
  double crev = 5.0;

  std::array<double, 4> as_array() const { return {hiding, freq, srev, crev}; }
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
  double hiding = 0.0;
  double freq = 0.0;
  double srev = 0.0;
  double crev = 0.0;
  double total = 0.0;

  std::array<double, 4> terms() const { return {hiding, freq, srev, crev}; }
  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// Mean squared error over all elements.
template <typename T, typename Tag>
double mse(const Planar<T, Tag>& a, const Planar<T, Tag>& b) {
  require_same_shape(a, b, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

template <typename T>
double loss_hiding(const BasicImage<T>& stego, const BasicImage<T>& cover) {
  return mse(stego, cover);
}

/// MSE between the LL subbands of stego and cover.
template <typename T>
double loss_freq(const BasicImage<T>& stego, const BasicImage<T>& cover);

template <typename T>
double loss_srev(const BasicImage<T>& rec_secret, const BasicImage<T>& secret) {
  return mse(rec_secret, secret);
}

template <typename T>
double loss_crev(const BasicImage<T>& rec_cover, const BasicImage<T>& cover) {
  return mse(rec_cover, cover);
}

double loss_total(const std::array<double, 4>& terms, const LossWeights& w);

}  // namespace zsiis
