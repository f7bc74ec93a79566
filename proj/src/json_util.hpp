#pragma once

// Strict field access for schema'd JSON documents: every failure becomes a
// SchemaError that names the offending field path.

#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "cogmac/error.hpp"

namespace cogmac::detail {

inline std::string join_path(std::string_view base, std::string_view key) {
  if (base.empty()) return std::string(key);
  return std::string(base) + "." + std::string(key);
}

inline const nlohmann::json& require(const nlohmann::json& j, std::string_view key,
                                     std::string_view path) {
  if (!j.is_object()) throw SchemaError("expected object at '" + std::string(path.empty() ? "<root>" : path) + "'");
  const auto it = j.find(std::string(key));
  if (it == j.end()) throw SchemaError("missing field '" + join_path(path, key) + "'");
  return *it;
}

template <typename T>
T get_as(const nlohmann::json& value, std::string_view path) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("bad value at '" + std::string(path) + "': " + e.what());
  }
}

template <typename T>
T field(const nlohmann::json& j, std::string_view key, std::string_view path) {
  return get_as<T>(require(j, key, path), join_path(path, key));
}

template <typename T>
void optional_field(const nlohmann::json& j, std::string_view key, std::string_view path, T& out) {
  const auto it = j.find(std::string(key));
  if (it != j.end()) out = get_as<T>(*it, join_path(path, key));
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                           std::string_view path) {
  if (!j.is_object()) throw SchemaError("expected object at '" + std::string(path.empty() ? "<root>" : path) + "'");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || k == key;
    if (!ok) throw SchemaError("unknown field '" + join_path(path, key) + "'");
  }
}

inline nlohmann::json parse_json(std::string_view text, std::string_view what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string(what) + ": malformed JSON: " + e.what());
  }
}

}  // namespace cogmac::detail
