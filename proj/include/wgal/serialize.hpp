#pragma once

#include <string>

#include <json.hpp>

#include <wgal/network.hpp>

namespace wgal {

/// {arch: {depth, widths, activation, relu_power?, b_theta}, layers: [{A, b}]}
/// with A flattened row-major.
nlohmann::json network_to_json(const NetworkParams& net);
NetworkParams network_from_json(const nlohmann::json& j);

nlohmann::json arch_to_json(const NetworkArch& arch);
NetworkArch arch_from_json(const nlohmann::json& j);

}  // namespace wgal
