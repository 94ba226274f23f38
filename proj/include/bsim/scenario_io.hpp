// Scenario documents (JSON), built-in presets and sweep parameter edits.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bsim/sim.hpp"

namespace bsim {

/// Major schema version this build reads and writes.
inline constexpr int kScenarioVersion = 1;

/// Canonical document for a scenario: every field spelled out, profiles and
/// harvester curves inlined.
nlohmann::json to_json(const Scenario& scenario);

/// Builds and validates a scenario. Unknown keys, wrong types and bad values
/// raise ValidationError whose where() is a JSON pointer such as
/// "/nodes/0/supercap/v_min_v".
Scenario scenario_from_json(const nlohmann::json& doc);

/// Parses text; syntax errors carry line and column.
nlohmann::json parse_scenario_text(std::string_view text);

/// FNV-1a over the canonical document.
std::uint64_t scenario_hash(const Scenario& scenario);

std::vector<std::string> preset_names();
bool is_preset(std::string_view name);
/// Throws ValidationError for unknown names.
nlohmann::json preset_document(std::string_view name);

/// A preset name or a path to a scenario file.
nlohmann::json load_scenario_document(std::string_view preset_or_path);
Scenario load_scenario(std::string_view preset_or_path);

/// Replaces the value at a JSON pointer. The pointer must already exist in
/// the document; throws ValidationError otherwise.
void set_param(nlohmann::json& doc, const std::string& pointer, const nlohmann::json& value);

/// Energy profile from a name ("ble-table1", "liot-table2") or a file
/// holding a profile object.
EnergyProfile load_profile(std::string_view name_or_path);

nlohmann::json profile_to_json(const EnergyProfile& profile);
EnergyProfile profile_from_json(const nlohmann::json& j, const std::string& where = "");

}  // namespace bsim
