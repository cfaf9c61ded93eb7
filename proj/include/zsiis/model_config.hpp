#pragma once

#include <json.hpp>

namespace zsiis {

/// Architecture of the invertible network.
struct ModelConfig {
  int num_blocks = 16;
  /// 4C: subband channels per branch (12 for RGB).
  int channels_per_branch = 12;
  /// Hidden channels added by every dense layer.
  int growth = 32;
  int num_subnet_layers = 5;
  /// Upper bound of the scale exponent, alpha(x) = clamp_k * sigmoid(x).
  double clamp_k = 2.0;
  int kernel = 3;

  /// Throws ConfigError on a non-positive field or even kernel.
  void validate() const;

  /// Desk-scale profile: four blocks, otherwise the defaults.
  static ModelConfig toy();

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace zsiis
