#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "modescatter/io.hpp"

namespace modescatter {

enum class ExperimentKind {
    forward_sweep,
    flux_audit,
    lemma1_audit,
    dtn_compare,
    continuation_audit,
    time_synthesis,
    embedded_eigen_probe
};

std::string to_string(ExperimentKind k);
ExperimentKind experiment_from_string(const std::string& s);

struct TimeSpec {
    double dt = 0.02;
    int steps = 2000;
    double t0 = 10.0;      // wavelet centre
    double width = 2.0;    // Gaussian envelope width
    double k0 = 2.0;       // carrier
    double lateral = 0.5;  // g = (1 + lateral cos x1) wavelet(t)
    double band = 3.6;     // family covers |k| <= band
    int pad_factor = 8;
    int basis = 2;         // trace basis |m| <= basis
};

struct ContinuationSpec {
    double target = 2.05;
    int n = 0;
    int m = 0;
};

/// Fully resolved experiment description.
struct ExperimentConfig {
    std::filesystem::path config_path;
    std::filesystem::path scenario_path;  // empty for inline scenarios
    json scenario_json;
    Scenario scenario;
    ExperimentKind kind = ExperimentKind::forward_sweep;
    std::vector<double> ks;
    int M = 0;                  // amplitude cutoff: |m| <= M (gratings) or m <= M (guides)
    std::vector<int> incident;  // empty: every propagating mode at each k
    int n_span = 7;             // dtn_compare: incident |n| <= n_span (n <= n_span for guides)
    int basis = 7;              // dtn_compare trace basis size parameter
    std::filesystem::path output = "modescatter_out";
    double resolution_scale = 1.0;
    std::uint64_t seed = 1;
    std::map<std::string, double> tolerances;
    TimeSpec time;
    ContinuationSpec continuation;
    double probe_window = 0.02;

    double tolerance(const std::string& name) const { return tolerances.at(name); }
    json to_json() const;
};

/// Parses a config file, loads its scenario, fills defaults (M = propagating
/// modes + 8 evanescent rows at the largest k, T' = T + 2) and checks the k-grid
/// against every threshold. Throws ParseError (malformed or missing files,
/// with the path) and ThresholdCollisionError (naming the mode p and
/// suggesting shifted k values).
ExperimentConfig validate_config(const std::filesystem::path& path, double resolution_scale = 1.0);

struct ManifestEntry {
    std::string path;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunResult {
    std::filesystem::path directory;
    std::vector<ManifestEntry> files;
    json metrics;
    bool audits_passed = true;
};

/// Executes the configured pipeline; writes outputs, metrics.json, gnuplot
/// scripts and manifest.json into a fresh output directory (built beside the
/// target and renamed into place).
RunResult run_experiment(const ExperimentConfig& cfg);

/// Entry point of the command-line tool; returns the process exit status.
int cli_main(int argc, char** argv);

}  // namespace modescatter
