#pragma once

// nlohmann::json bindings for configuration types shared by the simulator,
// the corpus manifest and the CLI.

#include <nlohmann/json.hpp>

#include "cogmac/sim.hpp"

namespace cogmac::sim {

// Strict parsers; SchemaError messages name fields relative to `path`.
CsmaParams parse_mac(const nlohmann::json& j, std::string_view path);
InterferencePattern parse_pattern(const nlohmann::json& j, std::string_view path);
SimConfig parse_config(const nlohmann::json& j, std::string_view path);

void to_json(nlohmann::json& j, const CsmaParams& p);
void from_json(const nlohmann::json& j, CsmaParams& p);
void to_json(nlohmann::json& j, const InterferencePattern& p);
void from_json(const nlohmann::json& j, InterferencePattern& p);
void to_json(nlohmann::json& j, const SimConfig& c);
void from_json(const nlohmann::json& j, SimConfig& c);

}  // namespace cogmac::sim
