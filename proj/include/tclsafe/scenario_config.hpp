#pragma once

#include <filesystem>

#include <json.hpp>

#include "tclsafe/harness.hpp"

namespace tclsafe::harness {

/// Parse a scenario document. Unknown keys are errors; relative file paths
/// resolve against `base_dir`. Throws ConfigError.
ScenarioConfig scenario_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Fully resolved document; round-trips through scenario_from_json except
/// for the worker count, which never changes results.
nlohmann::json scenario_to_json(const ScenarioConfig& config);

}  // namespace tclsafe::harness
