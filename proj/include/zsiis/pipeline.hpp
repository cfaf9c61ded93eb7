#pragma once

#include <random>
#include <string_view>

#include "zsiis/inn.hpp"
#include "zsiis/tensor.hpp"

namespace zsiis {

/// Default PSNR decision threshold in dB.
inline constexpr double kDefaultThresholdDb = 25.0;

enum class Verdict { cover, stego };

std::string_view to_string(Verdict v);

struct DetectionResult {
  /// PSNR between the input and its revealed content; +inf when identical.
  double psnr_db = 0.0;
  Verdict verdict = Verdict::cover;
  /// Revealed content, clamped to [0,1].
  ImageTensor recovered;
  double threshold_db = kDefaultThresholdDb;
};

/// Stego iff psnr_db <= threshold_db. +inf is always cover.
Verdict classify(double psnr_db, double threshold_db);

/// i.i.d. standard normal draws in storage order.
template <typename T>
BasicSubbands<T> sample_noise(const Shape& shape, std::mt19937_64& rng);

/// iwt of the stego branch of inn_forward(dwt(secret), dwt(cover)).
/// Unclamped: this is the initial stego image.
ImageTensor conceal(const InnModel<float>& model, const ImageTensor& secret,
                    const ImageTensor& cover);

/// (cover - init_stego) * lam + init_stego. Throws DomainError unless
/// 0 <= lam <= 1.
template <typename T>
BasicImage<T> residual_augment(const BasicImage<T>& cover,
                               const BasicImage<T>& init_stego, double lam);

/// Runs the network backward from (Z, dwt(image)) with fresh Gaussian Z and
/// returns the recovered branch in pixel space, clamped to [0,1].
ImageTensor reveal(const InnModel<float>& model, const ImageTensor& image,
                   std::mt19937_64& rng);

/// 10 log10(1 / MSE) with unit peak; +inf when the images are identical.
double psnr(const ImageTensor& a, const ImageTensor& b);

/// Reveal, then classify by PSNR. Infinite thresholds are allowed; NaN throws
/// DomainError.
DetectionResult detect(const InnModel<float>& model, const ImageTensor& image,
                       double threshold_db, std::mt19937_64& rng);

}  // namespace zsiis
