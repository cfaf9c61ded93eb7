#include "zsiis/wavelet.hpp"

namespace zsiis {

template <typename T>
BasicSubbands<T> dwt(const BasicImage<T>& img) {
  const int c = img.channels(), h = img.height(), w = img.width();
  if (h % 2 != 0 || w % 2 != 0)
    throw DimensionError("dwt: height and width must be even, got " +
                         to_string(img.shape()));
  const int hh = h / 2, hw = w / 2;
  BasicSubbands<T> out(4 * c, hh, hw);
  const T half = T(0.5);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < hh; ++y) {
      for (int x = 0; x < hw; ++x) {
        const T a = img(ch, 2 * y, 2 * x);
        const T b = img(ch, 2 * y, 2 * x + 1);
        const T cc = img(ch, 2 * y + 1, 2 * x);
        const T d = img(ch, 2 * y + 1, 2 * x + 1);
        out(ch, y, x) = (a + b + cc + d) * half;
        out(c + ch, y, x) = (-a + b - cc + d) * half;
        out(2 * c + ch, y, x) = (-a - b + cc + d) * half;
        out(3 * c + ch, y, x) = (a - b - cc + d) * half;
      }
    }
  }
  return out;
}

template <typename T>
BasicImage<T> iwt(const BasicSubbands<T>& sub) {
  if (sub.channels() % 4 != 0)
    throw DimensionError("iwt: channel count must be divisible by 4, got " +
                         to_string(sub.shape()));
  const int c = sub.channels() / 4, hh = sub.height(), hw = sub.width();
  BasicImage<T> out(c, 2 * hh, 2 * hw);
  const T half = T(0.5);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < hh; ++y) {
      for (int x = 0; x < hw; ++x) {
        const T ll = sub(ch, y, x);
        const T hl = sub(c + ch, y, x);
        const T lh = sub(2 * c + ch, y, x);
        const T hh_ = sub(3 * c + ch, y, x);
        out(ch, 2 * y, 2 * x) = (ll - hl - lh + hh_) * half;
        out(ch, 2 * y, 2 * x + 1) = (ll + hl - lh - hh_) * half;
        out(ch, 2 * y + 1, 2 * x) = (ll - hl + lh - hh_) * half;
        out(ch, 2 * y + 1, 2 * x + 1) = (ll + hl + lh + hh_) * half;
      }
    }
  }
  return out;
}

template <typename T>
BasicImage<T> extract_ll(const BasicSubbands<T>& sub) {
  if (sub.channels() % 4 != 0)
    throw DimensionError("extract_ll: channel count must be divisible by 4");
  const int c = sub.channels() / 4;
  const auto n = static_cast<std::ptrdiff_t>(c * sub.shape().plane_size());
  return BasicImage<T>(Shape{c, sub.height(), sub.width()},
                       std::vector<T>(sub.data(), sub.data() + n));
}

template BasicSubbands<float> dwt(const BasicImage<float>&);
template BasicSubbands<double> dwt(const BasicImage<double>&);
template BasicImage<float> iwt(const BasicSubbands<float>&);
template BasicImage<double> iwt(const BasicSubbands<double>&);
template BasicImage<float> extract_ll(const BasicSubbands<float>&);
template BasicImage<double> extract_ll(const BasicSubbands<double>&);

}  // namespace zsiis
