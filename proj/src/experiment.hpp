#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "diagnostics.hpp"

namespace mrf {

std::string tool_version();

// Parse a field/integrator description (JSON text, strict keys) — shared by
// the experiment runner and the C API.
VectorField field_from_json(const std::string& text);
IntegratorParams integrator_from_json(const std::string& text);

struct RunOptions {
    int threads = 1;
    std::string out_dir;               // empty: "out-<name>" under the cwd
    std::optional<uint64_t> seed;      // overrides the ensemble seed
};

struct ExperimentOutcome {
    bool all_pass = false;
    std::string report_path;
    DiagnosticsReport report;
};

// Runs one experiment from JSON config text. Parsing is strict (unknown keys
// rejected) and completes before any output is written; artifacts are
// report.json, densities.csv and optionally trajectories.csv, all embedding
// the config digest and tool version.
ExperimentOutcome run_experiment_text(const std::string& config_text, const std::string& name,
                                      const RunOptions& opts);

// Path may name a config file or a shipped preset.
ExperimentOutcome run_experiment(const std::string& path_or_preset, const RunOptions& opts);

struct PresetInfo {
    std::string name;
    std::string anchor;         // the claim the preset checks
    std::string runtime_class;  // seconds / minutes
};

std::vector<PresetInfo> list_presets();
const char* preset_config(const std::string& name);  // nullptr if unknown

}  // namespace mrf
