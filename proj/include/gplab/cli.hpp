#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gplab/error.hpp"
#include "gplab/kernel.hpp"

namespace gplab::cli {

inline const std::vector<std::string> kCommands = {"sample",      "estimate",    "bisect-lc",     "fit-decay",
                                                   "compare",     "interpolate", "local-compare", "cm-check"};

/// One experiment, as read from a JSON document. Absent optional fields are
/// filled by resolve_schedule.
struct ExperimentConfig {
    std::string command;
    std::string kernel = "bargmann-fock";
    int dim = 2;
    std::optional<double> spacing;   // geometry.h
    std::optional<double> epsilon;   // geometry.epsilon
    double window = 8.0;             // geometry.window: half-width for `sample`

    std::string model_type;          // "continuum" or "truncated"; empty = by N
    std::optional<double> range;     // model.N
    std::optional<double> delta;
    std::optional<double> sprinkle;  // model.s
    std::optional<double> eta;
    std::string schedule = "none";   // none | polynomial | bargmann-fock
    double bf_c = 1.0;
    std::optional<double> gamma;
    double level = 0.0;
    std::vector<double> levels;

    std::vector<std::string> events;
    std::size_t replicas = 1000;
    std::uint64_t seed = 0;
    // Where and how a run executes does not change its results, so neither
    // is echoed into result headers.
    std::string out = "out";
    unsigned threads = 0;  // 0 = machine parallelism

    // bisect-lc
    double target = 0.5;
    double level_lo = -1.0, level_hi = 1.0;
    double min_width = 1e-4;
    std::vector<double> scales;
    // fit-decay
    std::string fit_kind = "one-arm";
    double fit_r = 1.0;
    std::vector<double> radii;
    double fit_margin = 0.0;
    // interpolate
    std::vector<std::uint64_t> steps = {0};
    std::string direction = "up";
    std::uint64_t trace_steps = 0;
    std::uint64_t pbm_stride = 0;
    // local-compare
    std::vector<double> ranges = {4, 6, 8};
    double threshold = 0.1;
    // cm-check
    std::vector<std::vector<double>> cm_K;
    std::vector<double> cm_w, cm_lo, cm_hi;
    std::size_t cm_samples = 100000;
};

/// Throws ConfigInvalid naming the offending field.
ExperimentConfig parse_config(const nlohmann::ordered_json& doc);
nlohmann::ordered_json echo(const ExperimentConfig& config);

/// Discretisation parameters of one truncation range.
struct ResolvedModel {
    double range = 0.0;
    double sprinkle = 0.0;
    double epsilon = 0.25;
    double epsilon_requested = 0.25;  // before snapping to the h-lattice
    double delta = 0.0;
    std::string source;               // "given", "scheduled" or "default"
};

struct Resolved {
    kernel::KernelSpec kernel = kernel::KernelSpec::bargmann_fock(2);
    double spacing = 0.25;
    std::string schedule = "none";
    std::optional<double> eta;
    std::string eta_source;  // "given" or "defaulted"
    std::optional<double> gamma;
    bool has_range = false;
    ResolvedModel fine;    // N
    ResolvedModel coarse;  // 2N
    nlohmann::ordered_json to_json() const;
};

/// Schedule values and lattice parameters for `config`. Throws
/// InvalidSchedule or ConfigInvalid.
Resolved resolve_schedule(const ExperimentConfig& config);

/// Runs the experiment, writing result files under config.out and progress
/// lines to `log`. Throws gplab::Error.
void run(const ExperimentConfig& config, std::ostream& log);

int exit_code(ErrorKind kind);
std::string error_record(const std::exception& e);

}  // namespace gplab::cli
