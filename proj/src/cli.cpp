#include "zsiis/cli.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "json_util.hpp"
#include "zsiis/checkpoint.hpp"
#include "zsiis/image_io.hpp"
#include "zsiis/pipeline.hpp"

namespace zsiis {
namespace fs = std::filesystem;
using nlohmann::json;

RunConfig run_config_from_json(const json& j) {
  detail::reject_unknown(j, "", {"profile", "dataset_dir", "checkpoint", "output_dir", "train", "eval"});
  RunConfig c;
  detail::read_optional(j, "", "profile", c.profile);
  if (c.profile == "toy")
    c.train = TrainConfig::toy();
  else if (!c.profile.empty())
    throw ConfigError("unknown profile '" + c.profile + "' (expected \"toy\")", "profile");

  std::string path;
  auto read_path = [&](const char* key, fs::path& out) {
    path.clear();
    detail::read_optional(j, "", key, path);
    if (!path.empty()) out = path;
  };
  read_path("dataset_dir", c.dataset_dir);
  read_path("checkpoint", c.checkpoint);
  read_path("output_dir", c.output_dir);

  if (auto it = j.find("train"); it != j.end()) {
    detail::require_object(*it, "train");
    from_json(*it, c.train);
  }
  c.train.validate();

  if (auto it = j.find("eval"); it != j.end()) {
    const json& e = *it;
    detail::reject_unknown(e, "eval", {"threshold_db", "lam_mode", "seed", "cover_dir", "secret_dir", "crop_size"});
    detail::read_optional(e, "eval", "threshold_db", c.eval.threshold_db);
    detail::read_optional(e, "eval", "seed", c.eval.seed);
    detail::read_optional(e, "eval", "crop_size", c.eval.crop_size);
    std::string text;
    detail::read_optional(e, "eval", "lam_mode", text);
    if (!text.empty()) {
      try {
        c.eval.lam_mode = LamMode::parse(text);
      } catch (const DomainError& err) {
        throw ConfigError(err.what(), "eval.lam_mode");
      }
    }
    text.clear();
    detail::read_optional(e, "eval", "cover_dir", text);
    if (!text.empty()) c.eval.cover_dir = text;
    text.clear();
    detail::read_optional(e, "eval", "secret_dir", text);
    if (!text.empty()) c.eval.secret_dir = text;
  }
  if (std::isnan(c.eval.threshold_db))
    throw ConfigError("eval.threshold_db must be a number", "eval.threshold_db");
  if (c.eval.crop_size < 0 || c.eval.crop_size % 2)
    throw ConfigError("eval.crop_size must be even and non-negative", "eval.crop_size");
  return c;
}

json to_json(const RunConfig& c) {
  json j{{"dataset_dir", c.dataset_dir.string()},
         {"checkpoint", c.checkpoint.string()},
         {"output_dir", c.output_dir.string()},
         {"train", c.train},
         {"eval",
          {{"threshold_db", c.eval.threshold_db},
           {"lam_mode", c.eval.lam_mode.to_string()},
           {"seed", c.eval.seed},
           {"cover_dir", c.eval.cover_dir.string()},
           {"secret_dir", c.eval.secret_dir.string()},
           {"crop_size", c.eval.crop_size}}}};
  if (!c.profile.empty()) j["profile"] = c.profile;
  return j;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what(), "<file>");
  }
  return run_config_from_json(j);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DomainError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const FormatError*>(&e)) return kExitData;
  if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
  if (dynamic_cast<const DimensionError*>(&e)) return kExitDimension;
  return kExitFailure;
}

namespace {

std::string format_db(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Values given on the command line; unset ones leave the config alone.
struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> threshold;
  std::optional<std::string> lam;
  std::optional<std::string> checkpoint;
  std::optional<std::string> dataset;
  std::optional<int> epochs;
  std::optional<int> crop;
  std::optional<std::string> covers;
  std::optional<std::string> secrets;
};

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (f.out) c.output_dir = *f.out;
  if (f.checkpoint) c.checkpoint = *f.checkpoint;
  if (f.dataset) c.dataset_dir = *f.dataset;
  if (f.seed) {
    c.train.seed = *f.seed;
    c.eval.seed = *f.seed;
  }
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.threshold) c.eval.threshold_db = *f.threshold;
  if (f.lam) c.eval.lam_mode = LamMode::parse(*f.lam);
  if (f.crop) c.eval.crop_size = *f.crop;
  if (f.covers) c.eval.cover_dir = *f.covers;
  if (f.secrets) c.eval.secret_dir = *f.secrets;
  c.train.validate();
  return c;
}

void require_path(const fs::path& p, const char* key) {
  if (p.empty()) throw ConfigError(std::string("no ") + key + " given", key);
}

void echo_config(const RunConfig& c) {
  fs::create_directories(c.output_dir);
  std::ofstream(c.output_dir / "effective_config.json") << to_json(c).dump(2) << '\n';
}

InnModel<float> load_model(const RunConfig& c) {
  require_path(c.checkpoint, "checkpoint");
  return load_checkpoint(c.checkpoint).model;
}

ImageTensor prepared(const ImageTensor& img, int crop) {
  return crop > 0 ? center_crop(img, crop) : img;
}

std::vector<LoadedImage> load_dir(const fs::path& dir, int crop) {
  auto images = load_images(dir);
  for (auto& l : images) l.image = prepared(l.image, crop);
  return images;
}

// A single file or every PNG in a directory.
std::vector<LoadedImage> load_target(const fs::path& target) {
  if (fs::is_directory(target)) return load_images(target);
  return {{target, read_png(target)}};
}

std::vector<std::uint64_t> image_seeds(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> seeds(n);
  for (auto& s : seeds) s = rng();
  return seeds;
}

int cmd_train(const Flags& f, const std::optional<std::string>& resume, std::ostream& out) {
  const RunConfig c = resolve(f);
  require_path(c.dataset_dir, "dataset_dir");
  require_path(c.output_dir, "output_dir");
  if (!fs::is_directory(c.dataset_dir))
    throw DataError("dataset directory " + c.dataset_dir.string() + " does not exist");
  echo_config(c);

  std::optional<Checkpoint> state;
  TrainOptions opts;
  opts.output_dir = c.output_dir;
  if (resume) {
    state = load_checkpoint(*resume, c.train.model);
    opts.resume = &*state;
  }
  out << kLossCsvHeader << '\n';
  opts.on_step = [&](std::int64_t step, int epoch, const LossBreakdown& l) {
    out << loss_csv_row(step, epoch, l) << '\n' << std::flush;
  };
  const Checkpoint final = train(c.dataset_dir, c.train, opts);
  out << "# checkpoint " << (c.output_dir / "latest.zsiis").string() << " epoch "
      << final.epoch << '\n';
  return kExitOk;
}

int cmd_conceal(const Flags& f, const std::string& cover_path, const std::string& secret_path,
                const std::string& out_path, double lam, std::ostream& out) {
  const RunConfig c = resolve(f);
  const InnModel<float> model = load_model(c);
  const ImageTensor cover = read_png(cover_path);
  const ImageTensor secret = read_png(secret_path);
  const ImageTensor stego = quantize8(residual_augment(cover, conceal(model, secret, cover), lam));
  write_png(out_path, stego);
  out << out_path << '\t' << format_db(psnr(stego, cover)) << '\n';
  return kExitOk;
}

int cmd_reveal(const Flags& f, const std::string& image_path, const std::string& out_path,
               std::ostream& out) {
  const RunConfig c = resolve(f);
  const InnModel<float> model = load_model(c);
  const ImageTensor image = read_png(image_path);
  std::mt19937_64 rng(image_seeds(1, c.eval.seed)[0]);
  const ImageTensor recovered = reveal(model, image, rng);
  write_png(out_path, recovered);
  out << out_path << '\t' << format_db(psnr(image, recovered)) << '\n';
  return kExitOk;
}

int cmd_detect(const Flags& f, const std::string& target, bool as_json, std::ostream& out) {
  const RunConfig c = resolve(f);
  const InnModel<float> model = load_model(c);
  const auto images = load_target(target);
  const auto seeds = image_seeds(images.size(), c.eval.seed);
  json records = json::array();
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::mt19937_64 rng(seeds[i]);
    const auto d = detect(model, prepared(images[i].image, c.eval.crop_size), c.eval.threshold_db, rng);
    const std::string verdict(to_string(d.verdict));
    if (as_json)
      records.push_back({{"path", images[i].path.string()},
                         {"psnr_db", std::isinf(d.psnr_db) ? json("inf") : json(d.psnr_db)},
                         {"verdict", verdict}});
    else
      out << images[i].path.string() << '\t' << format_db(d.psnr_db) << '\t' << verdict << '\n';
  }
  if (as_json)
    out << json{{"threshold_db", c.eval.threshold_db}, {"results", records}}.dump() << '\n';
  return kExitOk;
}

int cmd_evaluate(const Flags& f, std::ostream& out) {
  const RunConfig c = resolve(f);
  require_path(c.eval.cover_dir, "eval.cover_dir");
  require_path(c.eval.secret_dir, "eval.secret_dir");
  require_path(c.output_dir, "output_dir");
  const InnModel<float> model = load_model(c);
  const auto covers = load_dir(c.eval.cover_dir, c.eval.crop_size);
  const auto secrets = load_dir(c.eval.secret_dir, c.eval.crop_size);
  echo_config(c);

  std::vector<ImageTensor> cover_images, secret_images;
  for (std::size_t i = 0; i < covers.size(); ++i) {
    cover_images.push_back(quantize8(covers[i].image));
    secret_images.push_back(secrets[i % secrets.size()].image);
  }
  std::mt19937_64 rng(c.eval.seed);
  const auto stegos = generate_eval_stegos(model, cover_images, secret_images, c.eval.lam_mode, rng);
  const EvalReport report = evaluate_detection(model, cover_images, stegos, c.eval.threshold_db, rng);

  std::ofstream(c.output_dir / "report.json") << json(report).dump(2) << '\n';
  write_sweep_csv(c.output_dir / "sweep.csv",
                  sweep_curve(report.cover_psnrs, report.stego_psnrs,
                              {kDefaultThresholdDb, c.eval.threshold_db}));
  std::vector<HistogramRow> rows;
  for (std::size_t i = 0; i < covers.size(); ++i)
    rows.push_back({covers[i].path.filename().string(), "cover", report.cover_psnrs[i]});
  for (std::size_t i = 0; i < covers.size(); ++i)
    rows.push_back({covers[i].path.filename().string(), "stego", report.stego_psnrs[i]});
  write_histogram_csv(c.output_dir / "histogram.csv", rows);

  const SweepPoint best = threshold_sweep(report.cover_psnrs, report.stego_psnrs);
  out << json{{"n_cover", report.n_cover},
              {"n_stego", report.n_stego},
              {"threshold_db", report.threshold_db},
              {"accuracy", report.accuracy},
              {"true_positive_rate", report.true_positive_rate},
              {"true_negative_rate", report.true_negative_rate},
              {"cover_psnr_mean", report.cover_psnr_stats.mean},
              {"stego_psnr_mean", report.stego_psnr_stats.mean},
              {"best_threshold_db", best.threshold_db},
              {"best_balanced_accuracy", best.balanced_accuracy}}
             .dump()
      << '\n';
  return kExitOk;
}

int cmd_histogram(const Flags& f, const std::string& dir, const std::string& label,
                  std::ostream& out) {
  const RunConfig c = resolve(f);
  require_path(c.output_dir, "output_dir");
  const InnModel<float> model = load_model(c);
  const auto images = load_dir(dir, c.eval.crop_size);
  echo_config(c);
  std::vector<ImageTensor> tensors;
  std::vector<std::string> ids;
  for (const auto& l : images) {
    tensors.push_back(l.image);
    ids.push_back(l.path.filename().string());
  }
  std::mt19937_64 rng(c.eval.seed);
  const auto rows = psnr_histogram(model, tensors, ids, label, rng);
  write_histogram_csv(c.output_dir / "histogram.csv", rows);
  std::vector<double> scores;
  for (const auto& r : rows) scores.push_back(r.psnr_db);
  out << json{{"label", label}, {"count", rows.size()}, {"stats", summarize(scores)}}.dump() << '\n';
  return kExitOk;
}

int cmd_ablate(const Flags& f, const std::string& with_ra, const std::string& without_ra,
               std::ostream& out) {
  const RunConfig c = resolve(f);
  require_path(c.eval.cover_dir, "eval.cover_dir");
  require_path(c.eval.secret_dir, "eval.secret_dir");
  const InnModel<float> a = load_checkpoint(with_ra).model;
  const InnModel<float> b = load_checkpoint(without_ra).model;
  const auto covers = load_dir(c.eval.cover_dir, c.eval.crop_size);
  const auto secrets = load_dir(c.eval.secret_dir, c.eval.crop_size);
  std::vector<ImageTensor> cover_images, secret_images;
  for (std::size_t i = 0; i < covers.size(); ++i) {
    cover_images.push_back(covers[i].image);
    secret_images.push_back(secrets[i % secrets.size()].image);
  }
  std::mt19937_64 rng(c.eval.seed);
  const AblationReport report = run_ablation(a, b, cover_images, secret_images, c.eval.threshold_db, rng);
  out << report.table();
  if (!c.output_dir.empty()) {
    echo_config(c);
    std::ofstream(c.output_dir / "ablation.json") << json(report).dump(2) << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot steganalysis with an invertible hiding network"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "RunConfig JSON file")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "Seed for every random draw");
    sub->add_option("--out", f.out, "Output directory (output_dir)");
  };
  auto with_checkpoint = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", f.checkpoint, "Model checkpoint (.zsiis)");
  };
  auto with_eval = [&](CLI::App* sub) {
    sub->add_option("--threshold", f.threshold, "Decision threshold in dB (default 25)");
    sub->add_option("--crop", f.crop, "Center-crop images to this size");
  };

  auto* train_cmd = app.add_subcommand("train", "Train a model on a directory of PNGs");
  common(train_cmd);
  train_cmd->add_option("--dataset", f.dataset, "Training images (dataset_dir)");
  train_cmd->add_option("--epochs", f.epochs, "Number of passes over the images");
  std::optional<std::string> resume;
  train_cmd->add_option("--resume", resume, "Continue from this checkpoint");

  std::string cover_path, secret_path, image_path, out_path;
  double lam = 0.0;
  auto* conceal_cmd = app.add_subcommand("conceal", "Hide a secret image in a cover");
  common(conceal_cmd);
  with_checkpoint(conceal_cmd);
  conceal_cmd->add_option("--cover", cover_path, "Cover PNG")->required();
  conceal_cmd->add_option("--secret", secret_path, "Secret PNG")->required();
  conceal_cmd->add_option("--output,-o", out_path, "Stego PNG to write")->required();
  conceal_cmd->add_option("--lam", lam, "Residual augmentation in [0,1]")->default_val(0.0);

  auto* reveal_cmd = app.add_subcommand("reveal", "Recover hidden content from an image");
  common(reveal_cmd);
  with_checkpoint(reveal_cmd);
  reveal_cmd->add_option("--image", image_path, "Input PNG")->required();
  reveal_cmd->add_option("--output,-o", out_path, "Recovered PNG to write")->required();

  bool as_json = false;
  std::string target;
  auto* detect_cmd = app.add_subcommand("detect", "Classify images as cover or stego");
  common(detect_cmd);
  with_checkpoint(detect_cmd);
  with_eval(detect_cmd);
  detect_cmd->add_option("path", target, "PNG file or directory")->required();
  detect_cmd->add_flag("--json", as_json, "Print one JSON document");

  auto* eval_cmd = app.add_subcommand("evaluate", "Detection accuracy on self-generated stegos");
  common(eval_cmd);
  with_checkpoint(eval_cmd);
  with_eval(eval_cmd);
  eval_cmd->add_option("--covers", f.covers, "Cover images (eval.cover_dir)");
  eval_cmd->add_option("--secrets", f.secrets, "Secret images (eval.secret_dir)");
  eval_cmd->add_option("--lam", f.lam, "zero, uniform or fixed:<lam>");

  std::string label = "cover", hist_dir;
  auto* hist_cmd = app.add_subcommand("histogram", "Per-image PSNR between input and reveal");
  common(hist_cmd);
  with_checkpoint(hist_cmd);
  hist_cmd->add_option("--crop", f.crop, "Center-crop images to this size");
  hist_cmd->add_option("--images", hist_dir, "Image directory")->required();
  hist_cmd->add_option("--label", label, "Label written to every row");

  std::string with_ra, without_ra;
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare models trained with and without augmentation");
  common(ablate_cmd);
  with_eval(ablate_cmd);
  ablate_cmd->add_option("--with-ra", with_ra, "Checkpoint trained with augmentation")->required();
  ablate_cmd->add_option("--without-ra", without_ra, "Checkpoint trained without")->required();
  ablate_cmd->add_option("--covers", f.covers, "Cover images (eval.cover_dir)");
  ablate_cmd->add_option("--secrets", f.secrets, "Secret images (eval.secret_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(f, resume, out);
    if (*conceal_cmd) return cmd_conceal(f, cover_path, secret_path, out_path, lam, out);
    if (*reveal_cmd) return cmd_reveal(f, image_path, out_path, out);
    if (*detect_cmd) return cmd_detect(f, target, as_json, out);
    if (*eval_cmd) return cmd_evaluate(f, out);
    if (*hist_cmd) return cmd_histogram(f, hist_dir, label, out);
    if (*ablate_cmd) return cmd_ablate(f, with_ra, without_ra, out);
  } catch (const ConfigError& e) {
    err << "config error (" << e.key() << "): " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitFailure;
}

}  // namespace zsiis
