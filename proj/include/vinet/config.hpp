#pragma once

#include <initializer_list>
#include <string>
#include <type_traits>

#include "json.hpp"
#include "vinet/heatmap.hpp"
#include "vinet/model.hpp"
#include "vinet/synth.hpp"

namespace vinet {

using Json = nlohmann::ordered_json;

// JSON forms of the configuration structs. Parsing is strict: unknown keys
// and wrongly typed values throw ConfigError naming the key; missing keys
// keep their defaults.
Json to_json(const VtdmConfig& c);
Json to_json(const ScorerConfig& c);
Json to_json(const ModelConfig& c);
Json to_json(const ActionConfig& c);
Json to_json(const synth::DatasetSpec& c);

void from_json(const Json& j, VtdmConfig& c);
void from_json(const Json& j, ScorerConfig& c);
void from_json(const Json& j, ModelConfig& c);
void from_json(const Json& j, ActionConfig& c);
void from_json(const Json& j, synth::DatasetSpec& c);

template <typename T>
T parse_config(const Json& j) {
  T value;
  from_json(j, value);
  return value;
}

namespace detail {
[[noreturn]] void throw_bad_value(const std::string& where, const char* key, const Json& value);
void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

template <typename T>
void read_key(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (!j.at(key).is_number_unsigned()) throw_bad_value(where, key, j.at(key));
  }
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw_bad_value(where, key, j.at(key));
  }
}
}  // namespace detail

}  // namespace vinet
