#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bitd/learners.hpp"
#include "bitd/mdp.hpp"

namespace bitd {

struct EnvConfig {
    std::string preset = "chain";  // "chain" | "two-state" | path to a JSON description
    int chain_n = 9;
    double amplitude = 5.0;
    double gamma = 0.99;
    std::string features = "triangular";  // "triangular" | "one-hot"
    std::vector<int> anchors = {0, 2, 4, 6, 8};
    int hidden = 9;  // 0 selects linear heads
    int max_episode_steps = 10000;

    TabularMdp build() const;
    FeatureMap feature_map(const TabularMdp& mdp) const;
};

struct ExperimentConfig {
    EnvConfig env;
    std::vector<std::string> algorithms = {"TDLambda", "BiTD-FR"};
    std::vector<double> alphas = {0.3, 0.1, 0.03, 0.01, 0.003};
    std::vector<double> lambdas = {0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95};
    TargetVariants targets;  // BiTD head targets
    long steps = 20000;
    int eval_interval = 100;
    int seeds = 20;
    std::uint64_t master_seed = 909090;
    bool svg = false;

    void validate() const;
    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
    static ExperimentConfig from_json_file(const std::string& path);
};

/// "TD0" | "TDLambda" | "RefreshedTDLambda" | "BackwardMC" | "BiTD-FR" |
/// "BiTD-BiR" | "BiTD-FBi"
std::pair<Algorithm, Parameterization> parse_algorithm(const std::string& name);

/// Per-seed streams are shared across grid cells (common random numbers), so
/// adding cells never perturbs existing cells' results.
std::uint64_t derive_seed(std::uint64_t master_seed, int seed_index);

struct MetricSeries {
    std::vector<long> steps;
    std::vector<double> mstde;
    std::vector<double> rmsve;
};

/// Trapezoidal integral of the MSTDE series over environment steps.
double trapezoid_auc(const MetricSeries& series);

struct RunRecord {
    std::string algorithm;
    double alpha = 0.0;
    double lambda = 0.0;
    int seed_index = 0;
    std::uint64_t rng_seed = 0;
    MetricSeries series;
    double auc = 0.0;  // trapezoidal integral of the MSTDE series; +inf when diverged
    bool diverged = false;
    bool failed = false;
    std::string error;
    double wall_seconds = 0.0;
};

struct CellSummary {
    std::string algorithm;
    double alpha = 0.0;
    double lambda = 0.0;
    int seeds = 0;
    int diverged = 0;
    int failed = 0;
    double mean_auc = 0.0;
    double stderr_auc = 0.0;
    std::vector<double> mean_mstde;  // aligned with eval_steps; empty when any run diverged
    bool best_for_algorithm = false;
};

struct SweepResult {
    std::vector<RunRecord> records;
    std::vector<CellSummary> summary;
    std::vector<long> eval_steps;
};

RunRecord run_single(const ExperimentConfig& cfg, const std::string& algorithm, double alpha,
                     double lambda, int seed_index);

/// Full grid x seeds. Parallel and serial execution produce identical
/// results: runs land in preassigned slots and are reduced in index order.
SweepResult run_sweep(const ExperimentConfig& cfg, bool parallel = true);

/// Writes curves.csv and summary.csv (and curves.svg when cfg.svg) into
/// out_dir; returns the file paths written.
std::vector<std::string> emit_outputs(const SweepResult& result, const ExperimentConfig& cfg,
                                      const std::string& out_dir);

}  // namespace bitd
