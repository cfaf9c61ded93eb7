#include "zsiis/pipeline.hpp"

#include <cmath>
#include <limits>

#include "zsiis/wavelet.hpp"

namespace zsiis {

std::string_view to_string(Verdict v) {
  return v == Verdict::stego ? "stego" : "cover";
}

Verdict classify(double psnr_db, double threshold_db) {
  if (std::isinf(psnr_db) && psnr_db > 0) return Verdict::cover;
  return psnr_db <= threshold_db ? Verdict::stego : Verdict::cover;
}

template <typename T>
BasicSubbands<T> sample_noise(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  BasicSubbands<T> z(shape);
  for (T& v : z.values()) v = static_cast<T>(normal(rng));
  return z;
}

template BasicSubbands<float> sample_noise(const Shape&, std::mt19937_64&);
template BasicSubbands<double> sample_noise(const Shape&, std::mt19937_64&);

ImageTensor conceal(const InnModel<float>& model, const ImageTensor& secret,
                    const ImageTensor& cover) {
  require_same_shape(secret, cover, "conceal");
  auto [unused, stego] = inn_forward(model, dwt(secret), dwt(cover));
  return iwt(stego);
}

template <typename T>
BasicImage<T> residual_augment(const BasicImage<T>& cover,
                               const BasicImage<T>& init_stego, double lam) {
  require_same_shape(cover, init_stego, "residual_augment");
  if (!(lam >= 0.0 && lam <= 1.0))
    throw DomainError("residual_augment: lambda must lie in [0,1], got " +
                      std::to_string(lam));
  // Endpoints are returned verbatim so that they hold bit-exactly.
  if (lam == 0.0) return init_stego;
  if (lam == 1.0) return cover;
  const T l = static_cast<T>(lam);
  BasicImage<T> out(cover.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (cover[i] - init_stego[i]) * l + init_stego[i];
  return out;
}

template BasicImage<float> residual_augment(const BasicImage<float>&,
                                            const BasicImage<float>&, double);
template BasicImage<double> residual_augment(const BasicImage<double>&,
                                             const BasicImage<double>&, double);

ImageTensor reveal(const InnModel<float>& model, const ImageTensor& image,
                   std::mt19937_64& rng) {
  SubbandTensor main = dwt(image);
  const SubbandTensor z = sample_noise<float>(main.shape(), rng);
  auto [recovered, unused] = inn_inverse(model, z, main);
  return clamp01(iwt(recovered));
}

double psnr(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "psnr");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(static_cast<double>(a.size()) / sse);
}

DetectionResult detect(const InnModel<float>& model, const ImageTensor& image,
                       double threshold_db, std::mt19937_64& rng) {
  if (std::isnan(threshold_db)) throw DomainError("detect: threshold is NaN");
  DetectionResult result;
  result.recovered = reveal(model, image, rng);
  result.psnr_db = psnr(image, result.recovered);
  result.threshold_db = threshold_db;
  result.verdict = classify(result.psnr_db, threshold_db);
  return result;
}

}  // namespace zsiis
