#include "zsiis/model_config.hpp"

#include <string>

#include "json_util.hpp"
#include "zsiis/errors.hpp"

namespace zsiis {

void ModelConfig::validate() const {
  auto positive = [](int v, const char* key) {
    if (v <= 0)
      throw ConfigError(std::string("model.") + key + " must be positive",
                        std::string("model.") + key);
  };
  positive(num_blocks, "num_blocks");
  positive(channels_per_branch, "channels_per_branch");
  positive(growth, "growth");
  positive(num_subnet_layers, "num_subnet_layers");
  positive(kernel, "kernel");
  if (kernel % 2 == 0)
    throw ConfigError("model.kernel must be odd", "model.kernel");
  if (!(clamp_k > 0.0))
    throw ConfigError("model.clamp_k must be positive", "model.clamp_k");
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.num_blocks = 4;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"num_blocks", c.num_blocks},
                     {"channels_per_branch", c.channels_per_branch},
                     {"growth", c.growth},
                     {"num_subnet_layers", c.num_subnet_layers},
                     {"clamp_k", c.clamp_k},
                     {"kernel", c.kernel}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  using detail::read_optional;
  detail::reject_unknown(j, "model",
                         {"num_blocks", "channels_per_branch", "growth",
                          "num_subnet_layers", "clamp_k", "kernel"});
  read_optional(j, "model", "num_blocks", c.num_blocks);
  read_optional(j, "model", "channels_per_branch", c.channels_per_branch);
  read_optional(j, "model", "growth", c.growth);
  read_optional(j, "model", "num_subnet_layers", c.num_subnet_layers);
  read_optional(j, "model", "clamp_k", c.clamp_k);
  read_optional(j, "model", "kernel", c.kernel);
}

}  // namespace zsiis
