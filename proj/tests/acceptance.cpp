// End-to-end acceptance checks P1..P9. Prints one PASS/FAIL line per
// criterion and exits non-zero if any fails. Criteria can be selected by
// name on the command line (e.g. `acceptance P1 P6`).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <set>
#include <string>

#include "support.hpp"
#include "zsiis/checkpoint.hpp"
#include "zsiis/evaluation.hpp"
#include "zsiis/image_io.hpp"
#include "zsiis/pipeline.hpp"
#include "zsiis/synth.hpp"
#include "zsiis/trainer.hpp"
#include "zsiis/wavelet.hpp"

using namespace zsiis;
using zsiis::testing::random_image;
using zsiis::testing::random_model;
using zsiis::testing::random_subbands;
using zsiis::testing::relative_error;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- P1
Outcome wavelet_exactness() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> half(1, 32);
  double worst_err = 0.0, worst_energy = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int c = i % 2 ? 3 : 1;
    const ImageTensor x = random_image(c, 2 * half(rng), 2 * half(rng), rng);
    const SubbandTensor y = dwt(x);
    worst_err = std::max(worst_err, max_abs_diff(iwt(y), x));
    double ex = 0.0, ey = 0.0;
    for (float v : x.values()) ex += static_cast<double>(v) * v;
    for (float v : y.values()) ey += static_cast<double>(v) * v;
    worst_energy = std::max(worst_energy, std::abs(ey - ex) / ex);
  }
  return {worst_err <= 1e-5 && worst_energy <= 1e-4,
          fmt("max reconstruction error %.3g", worst_err) +
              fmt(", max relative energy change %.3g", worst_energy)};
}

// ---------------------------------------------------------------- P2
Outcome invertibility() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  std::string detail;
  for (int k : {1, 4, 16}) {
    ModelConfig cfg;
    cfg.num_blocks = k;
    double worst_k = 0.0, worst_k64 = 0.0, latent = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
      const InnModel<float> model = random_model(cfg, rng);
      const ImageTensor secret = random_image(3, 32, 32, rng);
      const ImageTensor cover = random_image(3, 32, 32, rng);
      const SubbandTensor s = dwt(secret), c = dwt(cover);
      const auto [z, stego] = inn_forward(model, s, c);
      const auto [s_back, c_back] = inn_inverse(model, z, stego);
      worst_k = std::max({worst_k, relative_error(s_back, s), relative_error(c_back, c)});
      latent = std::max(latent, max_abs(z));

      // Same model and inputs in 64-bit, for the record only.
      const InnModel<double> wide = model.cast<double>();
      const auto s64 = dwt(secret.cast<double>()), c64 = dwt(cover.cast<double>());
      const auto [z64, stego64] = inn_forward(wide, s64, c64);
      const auto [s64_back, c64_back] = inn_inverse(wide, z64, stego64);
      worst_k64 = std::max({worst_k64, relative_error(s64_back, s64), relative_error(c64_back, c64)});
    }
    worst = std::max(worst, worst_k);
    detail += fmt("K=%.0f: ", k) + fmt("%.3g", worst_k) + fmt(" (64-bit %.3g", worst_k64) +
              fmt(", max |latent| %.3g); ", latent);
  }
  return {worst <= 1e-3, detail + fmt("max relative error %.3g", worst)};
}

// ---------------------------------------------------------------- P3
Outcome gradient_oracle() {
  std::mt19937_64 rng(303);
  ModelConfig cfg;
  cfg.num_blocks = 2;
  InnModel<double> model = random_model(cfg, rng, 0.05).cast<double>();
  const LossWeights weights;  // 1, 10, 5, 5
  std::vector<PairSample<double>> pairs;
  for (double lam : {0.3, 0.7})
    pairs.push_back({random_image<double>(3, 8, 8, rng), random_image<double>(3, 8, 8, rng), lam,
                     random_subbands<double>(12, 4, 4, rng), random_subbands<double>(12, 4, 4, rng)});

  InnModel<double> grad = model.zeros_like();
  batch_objective(model, pairs, weights, &grad);

  std::vector<std::span<double>> params, grads;
  model.for_each_param([&](const std::string&, std::span<double> s) { params.push_back(s); });
  grad.for_each_param([&](const std::string&, std::span<double> s) { grads.push_back(s); });
  std::vector<std::pair<std::size_t, std::size_t>> flat;
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t i = 0; i < params[t].size(); ++i) flat.emplace_back(t, i);
  std::shuffle(flat.begin(), flat.end(), rng);

  double worst = 0.0;
  int failures = 0;
  for (int n = 0; n < 100; ++n) {
    const auto [t, i] = flat[n];
    double& value = params[t][i];
    const double saved = value, h = 1e-5;
    value = saved + h;
    const double up = batch_objective(model, pairs, weights).total;
    value = saved - h;
    const double down = batch_objective(model, pairs, weights).total;
    value = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = grads[t][i];
    const double rel = std::abs(numeric - analytic) /
                       std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    worst = std::max(worst, rel);
    failures += rel > 1e-3;
  }
  return {failures == 0, fmt("100 parameters, max relative error %.3g", worst) +
                             fmt(", %.0f above 1e-3", failures)};
}

// ------------------------------------------------------ toy training runs

constexpr int kTrainImages = 200;
constexpr int kTrainSize = 48;
constexpr int kHeldOut = 60;

TrainConfig toy_recipe(bool residual_augmentation) {
  TrainConfig cfg = TrainConfig::toy();
  cfg.epochs = 80;  // 200 images / batch 8 = 25 steps per epoch: 2000 steps
  cfg.seed = 404;
  cfg.residual_augmentation = residual_augmentation;
  return cfg;
}

std::vector<ImageTensor> scenes(int n, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ImageTensor> out;
  for (int i = 0; i < n; ++i) out.push_back(synth::scene(size, size, rng));
  return out;
}

const std::vector<ImageTensor>& training_images() {
  static const auto images = scenes(kTrainImages, kTrainSize, 7);
  return images;
}

const std::vector<ImageTensor>& held_out_covers() {
  static const auto images = scenes(kHeldOut, 32, 8);
  return images;
}

const std::vector<ImageTensor>& held_out_secrets() {
  static const auto images = scenes(kHeldOut, 32, 9);
  return images;
}

const InnModel<float>& trained_model(bool residual_augmentation) {
  static std::optional<InnModel<float>> cache[2];
  auto& slot = cache[residual_augmentation];
  if (!slot) {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainConfig cfg = toy_recipe(residual_augmentation);
    TrainOptions opts;
    opts.on_step = [&](std::int64_t step, int, const LossBreakdown& l) {
      if (step % 250 == 0)
        std::fprintf(stderr, "  [train ra=%d] step %lld total %.4f (%.0f s)\n",
                     residual_augmentation, static_cast<long long>(step), l.total,
                     seconds_since(t0));
    };
    slot = train(training_images(), cfg, opts).model;
  }
  return *slot;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------- P4
Outcome toy_separation() {
  const auto t0 = std::chrono::steady_clock::now();
  const InnModel<float> model = trained_model(true);
  const double train_s = seconds_since(t0);

  std::vector<ImageTensor> covers;
  for (const auto& c : held_out_covers()) covers.push_back(quantize8(c));
  std::mt19937_64 rng(405);
  const auto stegos =
      generate_eval_stegos(model, covers, held_out_secrets(), LamMode::zero(), rng);
  const EvalReport at_default = evaluate_detection(model, covers, stegos, kDefaultThresholdDb, rng);
  const double gap = mean(at_default.cover_psnrs) - mean(at_default.stego_psnrs);
  const SweepPoint best = threshold_sweep(at_default.cover_psnrs, at_default.stego_psnrs);
  std::mt19937_64 rng2(406);
  const EvalReport swept = evaluate_detection(model, covers, stegos, best.threshold_db, rng2);

  double hiding = 0.0, recovery = 0.0;
  for (std::size_t i = 0; i < covers.size(); ++i) {
    hiding += psnr(stegos[i], covers[i]);
    std::mt19937_64 r(500 + i);
    recovery += psnr(reveal(model, stegos[i], r), held_out_secrets()[i]);
  }
  hiding /= static_cast<double>(covers.size());
  recovery /= static_cast<double>(covers.size());

  return {gap >= 10.0 && swept.accuracy >= 0.90,
          fmt("cover self-reveal %.2f dB", mean(at_default.cover_psnrs)) +
              fmt(", stego self-reveal %.2f dB", mean(at_default.stego_psnrs)) +
              fmt(", gap %.2f dB", gap) + fmt(", swept threshold %.2f dB", best.threshold_db) +
              fmt(", accuracy %.3f", swept.accuracy) +
              fmt(" (at 25 dB: %.3f)", at_default.accuracy) +
              fmt("; stego-vs-cover %.2f dB", hiding) + fmt(", secret recovery %.2f dB", recovery) +
              fmt("; training %.0f s", train_s)};
}

// ---------------------------------------------------------------- P5
Outcome initialization_identity() {
  std::mt19937_64 rng(505);
  double worst = 0.0;
  for (int k : {4, 16}) {
    ModelConfig cfg;
    cfg.num_blocks = k;
    const InnModel<float> model = init_model(cfg, rng);
    for (int trial = 0; trial < 4; ++trial) {
      const ImageTensor cover = random_image(3, 32, 32, rng);
      const ImageTensor secret = random_image(3, 32, 32, rng);
      worst = std::max(worst, max_abs_diff(conceal(model, secret, cover), cover));
    }
  }
  return {worst <= 1e-5, fmt("max |conceal(s,c) - c| %.3g", worst)};
}

// ---------------------------------------------------------------- P6
Outcome endpoints_and_rule() {
  std::mt19937_64 rng(606);
  bool ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    const ImageTensor cover = random_image(3, 16, 16, rng);
    ImageTensor init = random_image(3, 16, 16, rng);
    for (float& v : init.values()) v = 1.5f * v - 0.25f;  // unclamped range
    ok = ok && residual_augment(cover, init, 0.0) == init;
    ok = ok && residual_augment(cover, init, 1.0) == cover;
  }
  ok = ok && classify(25.0, 25.0) == Verdict::stego;
  ok = ok && classify(std::nextafter(25.0, 26.0), 25.0) == Verdict::cover;
  ok = ok && classify(std::numeric_limits<double>::infinity(), 25.0) == Verdict::cover;

  ModelConfig cfg;
  cfg.num_blocks = 2;
  const InnModel<float> model = random_model(cfg, rng, 0.05);
  for (int trial = 0; trial < 5; ++trial) {
    const ImageTensor image = random_image(3, 16, 16, rng);
    std::mt19937_64 a(trial), b(trial), c(trial);
    const double score = detect(model, image, 25.0, a).psnr_db;
    ok = ok && detect(model, image, score, b).verdict == Verdict::stego;
    ok = ok && detect(model, image, std::nextafter(score, -1e9), c).verdict == Verdict::cover;
  }
  return {ok, "lambda endpoints exact; verdict flips at psnr <= threshold (25.0 -> stego)"};
}

// ---------------------------------------------------------------- P7
Outcome ablation() {
  const InnModel<float>& with_ra = trained_model(true);
  const auto t0 = std::chrono::steady_clock::now();
  const InnModel<float>& without_ra = trained_model(false);
  const double train_s = seconds_since(t0);

  std::string detail;
  int wins = 0;
  for (std::uint64_t seed : {701, 702, 703}) {
    std::mt19937_64 rng(seed);
    const AblationReport report = run_ablation(with_ra, without_ra, held_out_covers(),
                                               held_out_secrets(), kDefaultThresholdDb, rng);
    const AblationRow& row = report.row("lam_uniform");
    wins += row.with_ra.accuracy >= row.without_ra.accuracy;
    detail += fmt("seed %.0f: ", static_cast<double>(seed)) +
              fmt("with-RA %.3f", row.with_ra.accuracy) +
              fmt(" vs without %.3f", row.without_ra.accuracy) +
              fmt(" (lsb %.3f", report.row("lsb").with_ra.accuracy) +
              fmt(" vs %.3f); ", report.row("lsb").without_ra.accuracy);
  }
  detail += fmt("with-RA >= without-RA in %.0f of 3 seeds", wins) +
            fmt("; no-RA training %.0f s", train_s);
  return {wins >= 2, detail};
}

// ---------------------------------------------------------------- P8
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome persistence() {
  const fs::path dir = fs::temp_directory_path() / "zsiis_acceptance_p8";
  fs::remove_all(dir);
  TrainConfig cfg = TrainConfig::toy();
  cfg.epochs = 2;
  cfg.seed = 808;
  const auto images = scenes(16, 40, 808);

  TrainOptions a, b;
  a.output_dir = dir / "a";
  b.output_dir = dir / "b";
  train(images, cfg, a);
  train(images, cfg, b);
  const bool same_csv = slurp(dir / "a" / "loss.csv") == slurp(dir / "b" / "loss.csv");

  const Checkpoint loaded = load_checkpoint(dir / "a" / "latest.zsiis");
  save_checkpoint(loaded, dir / "resaved.zsiis");
  const bool same_bytes = slurp(dir / "a" / "latest.zsiis") == slurp(dir / "resaved.zsiis");
  const auto size = fs::file_size(dir / "resaved.zsiis");
  fs::remove_all(dir);
  return {same_csv && same_bytes,
          std::string("loss CSV ") + (same_csv ? "identical" : "differs") +
              ", save-load-save " + (same_bytes ? "byte-identical" : "differs") +
              fmt(" (%.0f bytes)", static_cast<double>(size))};
}

// ---------------------------------------------------------------- P9
Outcome oracle_equivalence() {
  std::mt19937_64 rng(909);
  ModelConfig cfg;
  cfg.num_blocks = 2;
  cfg.growth = 8;
  const InnModel<float> model = random_model(cfg, rng, 0.1);
  bool ok = true;
  int lists = 0;

  std::uniform_int_distribution<int> count(1, 10);
  for (int trial = 0; trial < 6; ++trial) {
    std::vector<ImageTensor> covers, stegos;
    for (int i = count(rng); i > 0; --i) covers.push_back(quantize8(random_image(3, 8, 8, rng)));
    for (int i = count(rng); i > 0; --i) stegos.push_back(quantize8(random_image(3, 8, 8, rng)));

    // Brute force: reveal each image under the documented per-image seeds
    // and count correct verdicts by hand.
    const std::uint64_t seed = rng();
    std::mt19937_64 seeder(seed);
    std::vector<double> scores;
    for (std::size_t i = 0; i < covers.size() + stegos.size(); ++i) {
      std::mt19937_64 local(seeder());
      const ImageTensor& img = i < covers.size() ? covers[i] : stegos[i - covers.size()];
      scores.push_back(psnr(img, reveal(model, img, local)));
    }
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    for (double threshold : {sorted.front() - 1.0, sorted[sorted.size() / 2], sorted.back() + 1.0}) {
      int correct = 0;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool says_stego = scores[i] <= threshold;
        correct += (i < covers.size()) ? !says_stego : says_stego;
      }
      std::mt19937_64 eval(seed);
      const EvalReport r = evaluate_detection(model, covers, stegos, threshold, eval);
      ok = ok && std::abs(r.accuracy - static_cast<double>(correct) / scores.size()) < 1e-12;
      ++lists;
    }
  }

  int sweeps = 0;
  std::normal_distribution<double> c(30, 5), s(22, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> covers, stegos;
    for (int i = count(rng); i > 0; --i) covers.push_back(std::round(2 * c(rng)) / 2);
    for (int i = count(rng); i > 0; --i) stegos.push_back(std::round(2 * s(rng)) / 2);
    const SweepPoint best = threshold_sweep(covers, stegos);
    std::vector<double> all(covers);
    all.insert(all.end(), stegos.begin(), stegos.end());
    std::sort(all.begin(), all.end());
    // Every threshold in a fine grid across the scores is a candidate.
    for (double t = all.front() - 1.0; t <= all.back() + 1.0; t += 0.25) {
      int tn = 0, tp = 0;
      for (double x : covers) tn += x > t;
      for (double x : stegos) tp += x <= t;
      const double bal = 0.5 * (static_cast<double>(tn) / covers.size() +
                                static_cast<double>(tp) / stegos.size());
      ok = ok && best.balanced_accuracy >= bal - 1e-12;
    }
    ++sweeps;
  }
  return {ok, fmt("%.0f accuracy tallies", lists) + fmt(", %.0f exhaustive sweeps", sweeps)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"P1", wavelet_exactness},  {"P2", invertibility},      {"P3", gradient_oracle},
      {"P4", toy_separation},     {"P5", initialization_identity}, {"P6", endpoints_and_rule},
      {"P7", ablation},           {"P8", persistence},        {"P9", oracle_equivalence}};
  std::set<std::string> wanted(argv + 1, argv + argc);

  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!wanted.empty() && !wanted.count(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s (%.1f s) %s\n", name.c_str(), o.pass ? "PASS" : "FAIL",
                seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
