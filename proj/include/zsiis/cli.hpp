#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "zsiis/evaluation.hpp"
#include "zsiis/trainer.hpp"

namespace zsiis {

/// Process exit statuses of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitDivergence = 4,
  kExitDimension = 5,
};

struct EvalOptions {
  double threshold_db = 25.0;
  LamMode lam_mode;
  std::uint64_t seed = 0;
  std::filesystem::path cover_dir;
  std::filesystem::path secret_dir;
  /// Center-crop every evaluation image to this size; 0 keeps full images.
  int crop_size = 0;
};

/// Everything one command needs, as read from a JSON file.
///
///   {
///     "profile": "toy",              // optional base recipe
///     "dataset_dir": "...", "checkpoint": "...", "output_dir": "...",
///     "train": { TrainConfig keys, including "model": { ... } },
///     "eval": { "threshold_db", "lam_mode", "seed", "cover_dir",
///               "secret_dir", "crop_size" }
///   }
///
/// Absent keys keep their defaults; unknown keys are rejected.
struct RunConfig {
  std::string profile;
  std::filesystem::path dataset_dir;
  std::filesystem::path checkpoint;
  std::filesystem::path output_dir;
  TrainConfig train;
  EvalOptions eval;
};

/// Throws ConfigError naming the offending key.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
/// Reads and parses a JSON file. Throws ConfigError (malformed or invalid)
/// or DataError (unreadable).
RunConfig load_run_config(const std::filesystem::path& path);

/// Maps an exception thrown by the library to its exit status.
int exit_code_for(const std::exception& e);

/// Entry point of the `zsiis` tool: train, conceal, reveal, detect,
/// evaluate, histogram and ablate subcommands.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace zsiis
