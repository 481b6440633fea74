#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bcert/app/config.hpp"
#include "bcert/bundled_data.hpp"

namespace bcert::app {

/// Names of the bundled benchmark configurations, sorted.
inline std::vector<std::string> bundled_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : detail::kBundledData) out.emplace_back(name);
  return out;
}

inline std::optional<std::string_view> bundled_text(std::string_view name) {
  for (const auto& [n, text] : detail::kBundledData) {
    if (n == name) return text;
  }
  return std::nullopt;
}

/// Throws ConfigError for unknown names.
inline RunConfig bundled_config(std::string_view name) {
  auto text = bundled_text(name);
  if (!text) throw ConfigError("example: unknown bundled example '" + std::string(name) + "'");
  return parse_config(std::string(*text));
}

}  // namespace bcert::app
