#pragma once

#include <array>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "zsiis/inn.hpp"
#include "zsiis/tensor.hpp"

namespace zsiis {

/// How the residual-augmentation coefficient is chosen for evaluation stegos.
struct LamMode {
  enum class Kind { zero, uniform, fixed };
  Kind kind = Kind::zero;
  double value = 0.0;

  static LamMode zero() { return {}; }
  static LamMode uniform() { return {Kind::uniform, 0.0}; }
  /// Throws DomainError outside [0,1].
  static LamMode fixed(double lam);
  /// "zero", "uniform" or "fixed:<lam>".
  static LamMode parse(const std::string& text);
  std::string to_string() const;
};

/// Conceal each (cover, secret) pair, apply residual augmentation per `mode`,
/// clamp and quantize to 8 bits.
std::vector<ImageTensor> generate_eval_stegos(const InnModel<float>& model,
                                              const std::vector<ImageTensor>& covers,
                                              const std::vector<ImageTensor>& secrets,
                                              LamMode mode, std::mt19937_64& rng);

struct PsnrStats {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
  /// 10th..90th percentiles, linear interpolation between order statistics.
  std::array<double, 9> deciles{};

  friend bool operator==(const PsnrStats&, const PsnrStats&) = default;
};

PsnrStats summarize(std::vector<double> values);

struct EvalReport {
  int n_cover = 0;
  int n_stego = 0;
  double accuracy = 0.0;
  double true_positive_rate = 0.0;
  double true_negative_rate = 0.0;
  double threshold_db = 0.0;
  PsnrStats cover_psnr_stats;
  PsnrStats stego_psnr_stats;
  /// Per-image scores in input order.
  std::vector<double> cover_psnrs;
  std::vector<double> stego_psnrs;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Fills every report field from per-image scores under the stego-iff-
/// psnr <= threshold rule. Throws DomainError on empty inputs.
EvalReport make_report(std::vector<double> cover_psnrs,
                       std::vector<double> stego_psnrs, double threshold_db);

/// Runs detect on every image. Each image gets its own generator seeded from
/// `rng` in input order (covers, then stegos), so the result does not depend
/// on evaluation order.
EvalReport evaluate_detection(const InnModel<float>& model,
                              const std::vector<ImageTensor>& covers,
                              const std::vector<ImageTensor>& stegos,
                              double threshold_db, std::mt19937_64& rng);

void to_json(nlohmann::json& j, const PsnrStats& s);
void from_json(const nlohmann::json& j, PsnrStats& s);
/// Non-finite scores are written as the strings "inf", "-inf" or "nan".
void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

struct HistogramRow {
  std::string image_id;
  std::string label;
  double psnr_db = 0.0;
};

/// PSNR between every image and its reveal output.
std::vector<HistogramRow> psnr_histogram(const InnModel<float>& model,
                                         const std::vector<ImageTensor>& images,
                                         const std::vector<std::string>& ids,
                                         const std::string& label,
                                         std::mt19937_64& rng);

void write_histogram_csv(const std::filesystem::path& path,
                         const std::vector<HistogramRow>& rows);

/// (TPR + TNR) / 2 at `threshold_db`.
double balanced_accuracy(const std::vector<double>& cover_psnrs,
                         const std::vector<double>& stego_psnrs,
                         double threshold_db);

struct SweepPoint {
  double threshold_db = 0.0;
  double balanced_accuracy = 0.0;
};

/// Candidate thresholds: one below the lowest score, midpoints between
/// consecutive distinct scores, one above the highest; plus `extra`.
/// Sorted ascending.
std::vector<SweepPoint> sweep_curve(const std::vector<double>& cover_psnrs,
                                    const std::vector<double>& stego_psnrs,
                                    const std::vector<double>& extra = {});

/// Threshold maximizing balanced accuracy over the candidates. Ties go to
/// the midpoint of the widest run of optimal candidates.
SweepPoint threshold_sweep(const std::vector<double>& cover_psnrs,
                           const std::vector<double>& stego_psnrs);

void write_sweep_csv(const std::filesystem::path& path,
                     const std::vector<SweepPoint>& points);

/// LSB matching on the 8-bit version of `cover`: a random payload_bpp
/// fraction of samples receives a random bit; on mismatch the sample moves
/// by +-1 (random sign, forced inward at 0 and 255).
ImageTensor lsb_embed(const ImageTensor& cover, std::mt19937_64& rng,
                      double payload_bpp);

/// Same as lsb_embed with an explicit payload bit per selected sample.
ImageTensor lsb_embed_bits(const ImageTensor& cover, std::mt19937_64& rng,
                           double payload_bpp, const std::vector<int>& bits);

struct AblationRow {
  std::string source;
  EvalReport with_ra;
  EvalReport without_ra;
};

struct AblationReport {
  std::vector<AblationRow> rows;

  const AblationRow& row(const std::string& source) const;
  std::string table() const;
};

/// Evaluates both models on the same stego sets: lambda-uniform stegos
/// produced by each of the two models (pooled), and LSB-matching stegos at
/// 1 bpp. Both evaluations use identical noise streams.
AblationReport run_ablation(const InnModel<float>& model_with_ra,
                            const InnModel<float>& model_without_ra,
                            const std::vector<ImageTensor>& covers,
                            const std::vector<ImageTensor>& secrets,
                            double threshold_db, std::mt19937_64& rng);

void to_json(nlohmann::json& j, const AblationReport& r);

}  // namespace zsiis
