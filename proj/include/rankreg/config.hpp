#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rankreg/mc.hpp"

namespace rankreg::config {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct RunConfig {
    std::uint64_t master_seed = 20240101;
    std::vector<mc::ExperimentConfig> experiments;
};

// Parse and validate a JSON config document. Errors name the offending key
// path (e.g. "experiments[0].kernel.b").
RunConfig parse_config(const std::string& json_text);
RunConfig load_config_file(const std::string& path);

// Builtin presets, each a complete config document.
std::vector<std::pair<std::string, std::string>> list_presets(); // (name, description)
std::string preset_config_json(const std::string& name);

// Re-derive experiment seeds from an overriding master seed.
void override_master_seed(RunConfig& cfg, std::uint64_t seed);

// Deterministic JSON summary of the results (no timestamps, no wall clock).
std::string results_summary_json(const std::vector<mc::McResult>& results);

} // namespace rankreg::config
