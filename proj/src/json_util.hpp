// Strict JSON object readers that report the offending key.
#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "zsiis/errors.hpp"

namespace zsiis::detail {

inline std::string join_key(std::string_view prefix, std::string_view key) {
  return prefix.empty() ? std::string(key)
                        : std::string(prefix) + "." + std::string(key);
}

inline void require_object(const nlohmann::json& j, std::string_view prefix) {
  if (!j.is_object())
    throw ConfigError("'" + std::string(prefix.empty() ? "<root>" : prefix) +
                          "' must be a JSON object",
                      std::string(prefix));
}

inline void reject_unknown(const nlohmann::json& j, std::string_view prefix,
                           std::initializer_list<std::string_view> known) {
  require_object(j, prefix);
  for (const auto& [key, value] : j.items()) {
    bool found = false;
    for (auto k : known) found = found || k == key;
    if (!found)
      throw ConfigError("unknown key '" + join_key(prefix, key) + "'",
                        join_key(prefix, key));
  }
}

/// Overwrites `out` with j[key] when present; type errors name the key.
template <typename V>
void read_optional(const nlohmann::json& j, std::string_view prefix,
                   const char* key, V& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_integral_v<V> && !std::is_same_v<V, bool>) {
      if (!it->is_number_integer())
        throw ConfigError("'" + join_key(prefix, key) + "' must be an integer",
                          join_key(prefix, key));
    } else if constexpr (std::is_floating_point_v<V>) {
      if (!it->is_number())
        throw ConfigError("'" + join_key(prefix, key) + "' must be a number",
                          join_key(prefix, key));
    }
    it->get_to(out);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid value for '" + join_key(prefix, key) +
                          "': " + e.what(),
                      join_key(prefix, key));
  }
}

}  // namespace zsiis::detail
