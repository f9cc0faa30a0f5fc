#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridstor/analysis.hpp"
#include "gridstor/profiles.hpp"
#include "gridstor/sizing.hpp"

namespace gridstor {

/// Exit codes shared by the CLI and the runner.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitSolverFailure = 3;
inline constexpr int kExitInfeasible = 4;

struct ScenarioConfig {
    std::string feeder_path;

    // profiles: either a CSV path or the seeded generator
    std::string profiles_path;  // empty = synthesize
    std::uint64_t seed = 1;
    SynthParams synth;

    TimeGrid grid;
    std::vector<int> candidates;
    int n_ess = 1;  // kFreeCount for an open count
    std::vector<int> n_sweep{1, 2, 3};
    bool aggregate_from_cess = true;          // sweep fixes the total at the single-unit optimum
    std::optional<double> aggregate_cap_kwh;  // explicit override
    double capacity_bound_kwh = 100.0;
    EssSpec ess_defaults;
    bool use_rate_link = true;
    double rate_link_hours = 2.0;
    QpSettings solver;
    int hosting_day = 0;
    double hosting_tol_kw = 0.01;
    double vuf_reference_percent = 2.0;
    std::string out_dir = "out";
};

/// Parse the JSON config file; unknown keys are rejected so typos surface.
ScenarioConfig load_config(const std::string& path);

struct RunResult {
    int exit_code = kExitOk;
    std::string error_kind;     // empty on success
    std::string error_message;
    std::vector<std::string> artifacts;  // files written, relative to out_dir
};

/// Commands: validate | baseline | size | sweep | report.
/// All artifact writes are whole-file atomic (temp + rename).
RunResult run_command(const std::string& command, const ScenarioConfig& config, int jobs = 1);

/// Atomic text-file write used for every artifact.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace gridstor
