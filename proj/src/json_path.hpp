#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace scenefuse::detail {

// Follows a dotted path such as "choices.0.message.content"; numeric
// segments index arrays. Returns nullopt unless the target is a string.
inline std::optional<std::string> string_at_path(const nlohmann::json& root, std::string_view path) {
  const nlohmann::json* node = &root;
  while (!path.empty()) {
    const auto dot = path.find('.');
    const std::string seg(path.substr(0, dot));
    path = dot == std::string_view::npos ? std::string_view{} : path.substr(dot + 1);
    if (node->is_object()) {
      auto it = node->find(seg);
      if (it == node->end()) return std::nullopt;
      node = &*it;
    } else if (node->is_array()) {
      if (seg.empty() || seg.find_first_not_of("0123456789") != std::string::npos || seg.size() > 9) {
        return std::nullopt;
      }
      const auto idx = std::stoul(seg);
      if (idx >= node->size()) return std::nullopt;
      node = &(*node)[idx];
    } else {
      return std::nullopt;
    }
  }
  if (!node->is_string()) return std::nullopt;
  return node->get<std::string>();
}

}  // namespace scenefuse::detail
