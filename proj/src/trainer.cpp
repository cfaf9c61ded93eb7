#include "zsiis/trainer.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json_util.hpp"
#include "zsiis/checkpoint.hpp"
#include "zsiis/image_io.hpp"
#include "zsiis/pipeline.hpp"
#include "zsiis/wavelet.hpp"

namespace zsiis {
namespace fs = std::filesystem;

void TrainConfig::validate() const {
  model.validate();
  if (!(learning_rate > 0.0))
    throw ConfigError("learning_rate must be positive", "train.learning_rate");
  if (batch_size <= 0 || batch_size % 2 != 0)
    throw ConfigError("batch_size must be a positive even number", "train.batch_size");
  if (epochs <= 0) throw ConfigError("epochs must be positive", "train.epochs");
  if (crop_size <= 0 || crop_size % 2 != 0)
    throw ConfigError("crop_size must be a positive even number", "train.crop_size");
  for (double w : loss_weights.as_array())
    if (!(w >= 0.0))
      throw ConfigError("loss weights must be non-negative", "train.loss_weights");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("optimizer betas must lie in [0,1)", "train.betas");
  if (!(adam_epsilon > 0.0))
    throw ConfigError("adam_epsilon must be positive", "train.adam_epsilon");
  if (!(weight_decay >= 0.0))
    throw ConfigError("weight_decay must be non-negative", "train.weight_decay");
  if (checkpoint_every < 0)
    throw ConfigError("checkpoint_every must be non-negative", "train.checkpoint_every");
}

TrainConfig TrainConfig::toy() {
  TrainConfig c;
  c.model = ModelConfig::toy();
  c.crop_size = 32;
  c.learning_rate = 1e-3;
  return c;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{
      {"learning_rate", c.learning_rate},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"crop_size", c.crop_size},
      {"loss_weights",
       {c.loss_weights.hiding, c.loss_weights.freq, c.loss_weights.srev,
        c.loss_weights.crev}},
      {"seed", c.seed},
      {"model", c.model},
      {"betas", {c.beta1, c.beta2}},
      {"adam_epsilon", c.adam_epsilon},
      {"weight_decay", c.weight_decay},
      {"residual_augmentation", c.residual_augmentation},
      {"checkpoint_every", c.checkpoint_every},
  };
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  using detail::read_optional;
  constexpr const char* p = "train";
  detail::reject_unknown(
      j, p,
      {"learning_rate", "batch_size", "epochs", "crop_size", "loss_weights",
       "seed", "model", "betas", "adam_epsilon", "weight_decay",
       "residual_augmentation", "checkpoint_every"});
  read_optional(j, p, "learning_rate", c.learning_rate);
  read_optional(j, p, "batch_size", c.batch_size);
  read_optional(j, p, "epochs", c.epochs);
  read_optional(j, p, "crop_size", c.crop_size);
  read_optional(j, p, "seed", c.seed);
  read_optional(j, p, "adam_epsilon", c.adam_epsilon);
  read_optional(j, p, "weight_decay", c.weight_decay);
  read_optional(j, p, "residual_augmentation", c.residual_augmentation);
  read_optional(j, p, "checkpoint_every", c.checkpoint_every);
  if (auto it = j.find("loss_weights"); it != j.end()) {
    if (!it->is_array() || it->size() != 4 ||
        !std::all_of(it->begin(), it->end(),
                     [](const auto& v) { return v.is_number(); }))
      throw ConfigError("'train.loss_weights' must be an array of 4 numbers",
                        "train.loss_weights");
    c.loss_weights = {(*it)[0].get<double>(), (*it)[1].get<double>(),
                      (*it)[2].get<double>(), (*it)[3].get<double>()};
  }
  if (auto it = j.find("betas"); it != j.end()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() ||
        !(*it)[1].is_number())
      throw ConfigError("'train.betas' must be an array of 2 numbers",
                        "train.betas");
    c.beta1 = (*it)[0].get<double>();
    c.beta2 = (*it)[1].get<double>();
  }
  if (auto it = j.find("model"); it != j.end()) it->get_to(c.model);
}

void TrainBatch::validate(int crop_size) const {
  if (covers.size() != secrets.size() || covers.size() != lams.size())
    throw DimensionError("TrainBatch: covers, secrets and lams differ in length");
  if (covers.empty()) throw DimensionError("TrainBatch: empty batch");
  const Shape expected{covers.front().channels(), crop_size, crop_size};
  for (std::size_t i = 0; i < covers.size(); ++i) {
    if (covers[i].shape() != expected || secrets[i].shape() != expected)
      throw DimensionError("TrainBatch: every image must be " +
                           to_string(expected));
    if (!(lams[i] >= 0.0 && lams[i] <= 1.0))
      throw DomainError("TrainBatch: lambda outside [0,1]");
  }
}

namespace {

// d/da of mean((a - b)^2) scaled by `w`.
template <typename T, typename Tag>
Planar<T, Tag> mse_grad(const Planar<T, Tag>& a, const Planar<T, Tag>& b,
                        double w) {
  Planar<T, Tag> g(a.shape());
  const T f = static_cast<T>(2.0 * w / static_cast<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) g[i] = f * (a[i] - b[i]);
  return g;
}

}  // namespace

template <typename T>
LossBreakdown pair_objective(const InnModel<T>& model, const PairSample<T>& pair,
                             const LossWeights& weights, InnModel<T>* grad,
                             double scale) {
  require_same_shape(pair.cover, pair.secret, "pair_objective");
  const BasicSubbands<T> cover_sub = dwt(pair.cover);
  const BasicSubbands<T> secret_sub = dwt(pair.secret);
  require_same_shape(pair.z, cover_sub, "pair_objective noise");
  require_same_shape(pair.z_tilde, cover_sub, "pair_objective noise");

  InnTrace<T> conceal_trace, reveal_trace, cover_trace;
  const bool want_grad = grad != nullptr;

  auto [unused, stego_sub] = inn_forward(model, secret_sub, cover_sub,
                                         want_grad ? &conceal_trace : nullptr);
  const BasicImage<T> init_stego = iwt(stego_sub);
  const BasicImage<T> stego = residual_augment(pair.cover, init_stego, pair.lam);
  const BasicSubbands<T> stego_dwt = dwt(stego);

  auto [rec_secret_sub, unused1] = inn_inverse(
      model, pair.z, stego_dwt, want_grad ? &reveal_trace : nullptr);
  auto [rec_cover_sub, unused2] = inn_inverse(
      model, pair.z_tilde, cover_sub, want_grad ? &cover_trace : nullptr);
  const BasicImage<T> rec_secret = iwt(rec_secret_sub);
  const BasicImage<T> rec_cover = iwt(rec_cover_sub);

  const BasicImage<T> stego_ll = extract_ll(stego_dwt);
  const BasicImage<T> cover_ll = extract_ll(cover_sub);

  LossBreakdown out;
  out.hiding = loss_hiding(stego, pair.cover);
  out.freq = mse(stego_ll, cover_ll);
  out.srev = loss_srev(rec_secret, pair.secret);
  out.crev = loss_crev(rec_cover, pair.cover);
  out.total = loss_total(out.terms(), weights);
  if (!want_grad) return out;

  const BasicSubbands<T> zero(cover_sub.shape());

  // Cover revealing path.
  inn_inverse_backward(
      model, cover_trace,
      dwt(mse_grad(rec_cover, pair.cover, scale * weights.crev)), zero, *grad);

  // Secret revealing path, back into the stego image.
  auto [d_z, d_stego_dwt] = inn_inverse_backward(
      model, reveal_trace,
      dwt(mse_grad(rec_secret, pair.secret, scale * weights.srev)), zero,
      *grad);
  const BasicImage<T> d_ll = mse_grad(stego_ll, cover_ll, scale * weights.freq);
  for (std::size_t i = 0; i < d_ll.size(); ++i) d_stego_dwt.data()[i] += d_ll[i];
  BasicImage<T> d_stego = iwt(d_stego_dwt);
  const BasicImage<T> d_hid =
      mse_grad(stego, pair.cover, scale * weights.hiding);
  const T keep = static_cast<T>(1.0 - pair.lam);
  for (std::size_t i = 0; i < d_stego.size(); ++i)
    d_stego[i] = (d_stego[i] + d_hid[i]) * keep;

  // Concealing path.
  inn_forward_backward(model, conceal_trace, zero, dwt(d_stego), *grad);
  return out;
}

template <typename T>
LossBreakdown batch_objective(const InnModel<T>& model,
                              const std::vector<PairSample<T>>& pairs,
                              const LossWeights& weights, InnModel<T>* grad) {
  if (pairs.empty()) throw DimensionError("batch_objective: no pairs");
  const double scale = 1.0 / static_cast<double>(pairs.size());
  LossBreakdown mean;
  for (const auto& pair : pairs) {
    const LossBreakdown l = pair_objective(model, pair, weights, grad, scale);
    mean.hiding += l.hiding * scale;
    mean.freq += l.freq * scale;
    mean.srev += l.srev * scale;
    mean.crev += l.crev * scale;
    mean.total += l.total * scale;
  }
  return mean;
}

template LossBreakdown pair_objective(const InnModel<float>&,
                                      const PairSample<float>&,
                                      const LossWeights&, InnModel<float>*,
                                      double);
template LossBreakdown pair_objective(const InnModel<double>&,
                                      const PairSample<double>&,
                                      const LossWeights&, InnModel<double>*,
                                      double);
template LossBreakdown batch_objective(const InnModel<float>&,
                                       const std::vector<PairSample<float>>&,
                                       const LossWeights&, InnModel<float>*);
template LossBreakdown batch_objective(const InnModel<double>&,
                                       const std::vector<PairSample<double>>&,
                                       const LossWeights&, InnModel<double>*);

AdamState AdamState::for_model(const InnModel<float>& model) {
  return AdamState{model.zeros_like(), model.zeros_like(), 0};
}

void adam_update(InnModel<float>& model, const InnModel<float>& grad,
                 AdamState& state, const TrainConfig& cfg) {
  ++state.step;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = cfg.learning_rate;
  const double eps = cfg.adam_epsilon, wd = cfg.weight_decay;

  std::vector<std::span<float>> params, ms, vs;
  std::vector<std::span<const float>> gs;
  model.for_each_param([&](const std::string&, std::span<float> p) { params.push_back(p); });
  state.first_moment.for_each_param([&](const std::string&, std::span<float> p) { ms.push_back(p); });
  state.second_moment.for_each_param([&](const std::string&, std::span<float> p) { vs.push_back(p); });
  grad.for_each_param([&](const std::string&, std::span<const float> p) { gs.push_back(p); });

  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t];
    auto m = ms[t];
    auto v = vs[t];
    auto g = gs[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]) + wd * p[i];
      m[i] = static_cast<float>(b1 * m[i] + (1.0 - b1) * gi);
      v[i] = static_cast<float>(b2 * v[i] + (1.0 - b2) * gi * gi);
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] = static_cast<float>(p[i] - lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

LossBreakdown train_step(InnModel<float>& model, const TrainBatch& batch,
                         const TrainConfig& cfg, std::mt19937_64& rng,
                         AdamState& optimizer) {
  batch.validate(cfg.crop_size);
  std::vector<PairSample<float>> pairs;
  pairs.reserve(batch.covers.size());
  const Shape sub_shape{4 * batch.covers.front().channels(), cfg.crop_size / 2,
                        cfg.crop_size / 2};
  for (std::size_t i = 0; i < batch.covers.size(); ++i) {
    PairSample<float> pair{batch.covers[i], batch.secrets[i], batch.lams[i], {}, {}};
    pair.z = sample_noise<float>(sub_shape, rng);
    pair.z_tilde = sample_noise<float>(sub_shape, rng);
    pairs.push_back(std::move(pair));
  }
  InnModel<float> grad = model.zeros_like();
  const LossBreakdown loss = batch_objective(model, pairs, cfg.loss_weights, &grad);
  bool finite = std::isfinite(loss.total);
  grad.for_each_param([&](const std::string&, std::span<const float> g) {
    for (float v : g) finite = finite && std::isfinite(v);
  });
  if (!finite) {
    char msg[256];
    std::snprintf(msg, sizeof msg,
                  "non-finite loss at optimizer step %" PRId64
                  " (l_hid=%g l_freq=%g l_srev=%g l_crev=%g)",
                  optimizer.step + 1, loss.hiding, loss.freq, loss.srev,
                  loss.crev);
    throw DivergenceError(msg);
  }
  adam_update(model, grad, optimizer, cfg);
  return loss;
}

std::string loss_csv_row(std::int64_t step, int epoch, const LossBreakdown& l) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%" PRId64 ",%d,%.9g,%.9g,%.9g,%.9g,%.9g",
                step, epoch, l.hiding, l.freq, l.srev, l.crev, l.total);
  return buf;
}

namespace {

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

Checkpoint train(const std::vector<ImageTensor>& images, const TrainConfig& cfg,
                 const TrainOptions& options) {
  cfg.validate();
  const std::size_t n = images.size();
  if (n < static_cast<std::size_t>(cfg.batch_size))
    throw DataError("dataset has " + std::to_string(n) +
                    " images, fewer than batch_size " +
                    std::to_string(cfg.batch_size));
  for (const auto& img : images)
    if (img.height() < cfg.crop_size || img.width() < cfg.crop_size ||
        img.channels() * 4 != cfg.model.channels_per_branch)
      throw DataError("image " + to_string(img.shape()) +
                      " cannot provide crops of " +
                      std::to_string(cfg.crop_size) + " for a model with " +
                      std::to_string(cfg.model.channels_per_branch) +
                      " channels per branch");

  Checkpoint state;
  std::mt19937_64 rng(cfg.seed);
  if (options.resume) {
    state = *options.resume;
    if (state.model.config != cfg.model)
      throw ConfigError("resume checkpoint has a different model config", "model");
    std::istringstream is(state.rng_state);
    is >> rng;
    if (!is) throw FormatError("checkpoint rng state is unreadable");
  } else {
    state.model = init_model(cfg.model, rng);
    state.optimizer = AdamState::for_model(state.model);
  }
  state.config = cfg;

  const bool write = !options.output_dir.empty();
  std::ofstream csv;
  if (write) {
    fs::create_directories(options.output_dir);
    std::ofstream(options.output_dir / "config.json") << state.config.dump(2) << '\n';
    const fs::path csv_path = options.output_dir / "loss.csv";
    const bool append = options.resume && fs::exists(csv_path);
    csv.open(csv_path, append ? std::ios::app : std::ios::trunc);
    if (!csv) throw DataError("cannot write " + csv_path.string());
    if (!append) csv << kLossCsvHeader << '\n';
  }

  const int pairs = cfg.batch_size / 2;
  const std::size_t batches = n / static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> order(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < batches; ++b) {
      TrainBatch batch;
      for (int i = 0; i < cfg.batch_size; ++i) {
        ImageTensor patch =
            random_crop(images[order[b * cfg.batch_size + i]], cfg.crop_size, rng);
        (i < pairs ? batch.covers : batch.secrets).push_back(std::move(patch));
      }
      for (int i = 0; i < pairs; ++i)
        batch.lams.push_back(cfg.residual_augmentation ? unit(rng) : 0.0);

      const LossBreakdown loss =
          train_step(state.model, batch, cfg, rng, state.optimizer);
      if (write) csv << loss_csv_row(state.optimizer.step, epoch, loss) << '\n';
      if (options.on_step) options.on_step(state.optimizer.step, epoch, loss);
    }
    state.epoch = epoch + 1;
    state.rng_state = rng_to_string(rng);
    if (write) {
      csv.flush();
      save_checkpoint(state, options.output_dir / "latest.zsiis");
      if (cfg.checkpoint_every > 0 && state.epoch % cfg.checkpoint_every == 0) {
        char name[64];
        std::snprintf(name, sizeof name, "epoch_%04d.zsiis", state.epoch);
        save_checkpoint(state, options.output_dir / name);
      }
    }
  }
  state.rng_state = rng_to_string(rng);
  return state;
}

Checkpoint train(const fs::path& dataset_dir, const TrainConfig& cfg,
                 const TrainOptions& options) {
  cfg.validate();
  std::vector<ImageTensor> images;
  for (auto& loaded : load_images(dataset_dir))
    images.push_back(std::move(loaded.image));
  return train(images, cfg, options);
}

}  // namespace zsiis
