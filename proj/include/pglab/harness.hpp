#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pglab/optimizer.hpp"

namespace pglab {

struct AlgorithmConfig {
    std::string name;  // unique label within the experiment
    OptimizerConfig opt;
};

struct ExperimentConfig {
    int version = 1;
    std::string name;
    std::string env_name;
    nlohmann::json env_params = nlohmann::json::object();
    std::vector<AlgorithmConfig> algorithms;
    std::vector<uint64_t> seeds;
    std::string output_dir = "out";
    int batches = 100;
    int checkpoint_interval = 0;
    double success_threshold = std::numeric_limits<double>::quiet_NaN();
    int patience = 5;
    bool stop_on_success = true;

    void validate() const;
};

// Parses a config file; errors carry the line number of the offending spot.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const nlohmann::json& j);

// One metrics row, streamed as a JSON line and flattened into the merged CSV.
struct MetricsRecord {
    std::string experiment;
    std::string algorithm;
    uint64_t seed = 0;
    UpdateStats stats;

    nlohmann::ordered_json to_json() const;
    static MetricsRecord from_json(const nlohmann::json& j);
    std::string csv_row() const;
    static std::string csv_header();
};

// Runs every (algorithm x seed) cell, streaming metrics to per-cell JSONL
// files; completed cells (presence of a .done marker) are skipped. Afterwards
// writes the merged CSV, the report, and the learning-curve SVGs. Returns the
// number of failed cells (0 on full success).
int run_experiment(const ExperimentConfig& config, int parallel = 1);

// Resolved directory of one experiment's outputs.
std::string experiment_dir(const ExperimentConfig& config);
std::string cell_stem(const std::string& algorithm, uint64_t seed);

struct AlgorithmSummary {
    std::string algorithm;
    // Medians over seeds; unset when no seed reached the threshold.
    std::optional<double> batches_to_threshold;
    std::optional<double> macro_steps_to_threshold;
    std::optional<double> raw_steps_to_threshold;
    double final_return_mean = 0.0;
    double final_return_std = 0.0;
    double median_adv_variance = 0.0;
    int seeds_reported = 0;
    std::vector<std::string> missing_cells;
};

struct ComparisonReport {
    std::string experiment;
    double threshold = std::numeric_limits<double>::quiet_NaN();
    std::vector<AlgorithmSummary> algorithms;

    nlohmann::ordered_json to_json() const;
    std::string to_text() const;
};

// Pure function of the persisted metrics files in `dir`.
ComparisonReport generate_report(const std::string& dir);

// Writes return-vs-macro-steps and return-vs-raw-steps SVGs from the merged
// CSV; byte-identical for identical input.
std::vector<std::string> plot_curves(const std::string& dir);

// Invariant self-checks reachable from the CLI; returns the failure count and
// prints one line per check.
int run_selftest();

}  // namespace pglab
