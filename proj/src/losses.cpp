#include "zsiis/losses.hpp"

#include "zsiis/wavelet.hpp"

namespace zsiis {

template <typename T>
double loss_freq(const BasicImage<T>& stego, const BasicImage<T>& cover) {
  require_same_shape(stego, cover, "loss_freq");
  return mse(extract_ll(dwt(stego)), extract_ll(dwt(cover)));
}

template double loss_freq(const BasicImage<float>&, const BasicImage<float>&);
template double loss_freq(const BasicImage<double>&, const BasicImage<double>&);

double loss_total(const std::array<double, 4>& terms, const LossWeights& w) {
  const auto weights = w.as_array();
  double total = 0.0;
  for (std::size_t i = 0; i < 4; ++i) total += weights[i] * terms[i];
  return total;
}

}  // namespace zsiis
