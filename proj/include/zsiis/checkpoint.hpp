#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "zsiis/inn.hpp"
#include "zsiis/trainer.hpp"

namespace zsiis {

/// Training state on disk.
///
/// Layout: the 7 magic bytes "ZSIIS1\n", a little-endian u64 manifest
/// length, a UTF-8 JSON manifest, then raw little-endian blobs. Every
/// manifest entry is {name, dtype, shape, offset, nbytes} with offsets
/// relative to the first byte after the manifest.
struct Checkpoint {
  InnModel<float> model;
  AdamState optimizer;
  /// Effective training configuration, echoed verbatim.
  nlohmann::json config = nlohmann::json::object();
  int epoch = 0;
  /// Textual std::mt19937_64 state.
  std::string rng_state;
};

inline constexpr char kCheckpointMagic[] = "ZSIIS1\n";

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws FormatError on bad magic, truncation, or a manifest that does not
/// match the declared (or `expected`) model configuration.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<ModelConfig>& expected = {});

}  // namespace zsiis
