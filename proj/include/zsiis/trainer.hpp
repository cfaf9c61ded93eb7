#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "zsiis/inn.hpp"
#include "zsiis/losses.hpp"
#include "zsiis/model_config.hpp"
#include "zsiis/tensor.hpp"

namespace zsiis {

struct TrainConfig {
  double learning_rate = 3e-5;
  /// Even: the first half of every batch are covers, the second secrets.
  int batch_size = 8;
  int epochs = 50;
  int crop_size = 224;
  LossWeights loss_weights;
  std::uint64_t seed = 0;
  ModelConfig model;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.0;
  /// When false every lambda is 0 (the no-augmentation ablation).
  bool residual_augmentation = true;
  /// Write an epoch-numbered checkpoint every this many epochs (0: never).
  /// "latest" is rewritten after every epoch regardless.
  int checkpoint_every = 1;

  void validate() const;

  /// Desk-scale recipe: four blocks, 32 px crops, a higher learning rate.
  static TrainConfig toy();
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Overlays the keys present in `j` onto `c`; rejects unknown keys.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct TrainBatch {
  std::vector<ImageTensor> covers;
  std::vector<ImageTensor> secrets;
  /// Residual-augmentation coefficient per pair.
  std::vector<double> lams;

  void validate(int crop_size) const;
};

/// One fully specified training pair, noise included.
template <typename T>
struct PairSample {
  BasicImage<T> cover;
  BasicImage<T> secret;
  double lam = 0.0;
  /// Noise for revealing the secret from the stego.
  BasicSubbands<T> z;
  /// Independent noise for revealing the cover from itself.
  BasicSubbands<T> z_tilde;
};

/// Loss of one pair. When `grad` is given, d(scale * total)/d(params) is
/// accumulated into it.
template <typename T>
LossBreakdown pair_objective(const InnModel<T>& model, const PairSample<T>& pair,
                             const LossWeights& weights,
                             InnModel<T>* grad = nullptr, double scale = 1.0);

/// Mean loss over pairs; accumulates the gradient of the mean when `grad` is
/// given.
template <typename T>
LossBreakdown batch_objective(const InnModel<T>& model,
                              const std::vector<PairSample<T>>& pairs,
                              const LossWeights& weights,
                              InnModel<T>* grad = nullptr);

struct AdamState {
  InnModel<float> first_moment;
  InnModel<float> second_moment;
  std::int64_t step = 0;

  static AdamState for_model(const InnModel<float>& model);
};

void adam_update(InnModel<float>& model, const InnModel<float>& grad,
                 AdamState& state, const TrainConfig& cfg);

/// Conceal, augment, reveal both ways, and take one optimizer step.
/// Draws Z then Z~ for every pair from `rng`. Throws DivergenceError on a
/// non-finite loss (parameters are left untouched in that case).
LossBreakdown train_step(InnModel<float>& model, const TrainBatch& batch,
                         const TrainConfig& cfg, std::mt19937_64& rng,
                         AdamState& optimizer);

struct Checkpoint;

struct TrainOptions {
  /// Receives loss.csv, latest.zsiis, epoch checkpoints and config.json.
  /// Nothing is written when empty.
  std::filesystem::path output_dir;
  /// Continue from this state instead of a fresh model.
  const Checkpoint* resume = nullptr;
  /// Called after every step with (step, epoch, losses).
  std::function<void(std::int64_t, int, const LossBreakdown&)> on_step;
};

/// Runs cfg.epochs passes over the images in `dataset_dir`.
Checkpoint train(const std::filesystem::path& dataset_dir,
                 const TrainConfig& cfg, const TrainOptions& options = {});

/// Same as above with images already in memory.
Checkpoint train(const std::vector<ImageTensor>& images, const TrainConfig& cfg,
                 const TrainOptions& options = {});

inline constexpr const char* kLossCsvHeader =
    "step,epoch,l_hid,l_freq,l_srev,l_crev,l_total";

std::string loss_csv_row(std::int64_t step, int epoch, const LossBreakdown& l);

}  // namespace zsiis
