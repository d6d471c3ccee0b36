#pragma once

#include <json.hpp>

#include <string>
#include <string_view>

#include "bflow/error.hpp"

#include "bflow/law.hpp"
#include "bflow/network.hpp"

namespace bflow::detail {

using json = nlohmann::ordered_json;

json law_to_json(const BistableLaw& law);
BistableLaw law_from_json(const json& j);

json network_to_json(const FlowNetwork& net, const BistableLaw& law);
FlowNetwork network_from_json(const json& j);

json parse_json(std::string_view text, std::string_view what);

// Typed field access that reports schema errors with the field name.
template <class T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::schema, std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::schema, std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return field<T>(j, key);
}

}  // namespace bflow::detail
