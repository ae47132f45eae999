#pragma once

#include <string>

#include <json.hpp>

namespace vpi {

using Json = nlohmann::ordered_json;

/// Serializes with doubles at 17 significant digits; non-finite doubles
/// become the strings "inf", "-inf" and "nan".
std::string dump_json(const Json& j, int indent = 2);

}  // namespace vpi
