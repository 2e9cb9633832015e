#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rankreg/asymptotics.hpp"
#include "rankreg/estimators.hpp"

namespace rankreg::mc {

using estimators::Method;

enum class ExperimentKind { Rate, Identity, Matched, Dist };
const char* to_string(ExperimentKind k);

struct ExperimentConfig {
    std::string id;
    ExperimentKind kind = ExperimentKind::Rate;
    dgp::DgpSpec spec;
    std::vector<Method> estimators;
    int n = 1; // rank handed to the restricted estimators
    std::vector<int> T_grid;
    int R = 100;
    std::uint64_t seed = 1;
    covest::KernelConfig kernel;
    dgp::Preproc preprocessing = dgp::Preproc::None;
    int limit_grid_N = 1000;

    void validate() const;
};

struct McRow {
    std::string estimator; // "-" for experiment-level statistics
    int T = 0;             // 0 when the statistic is not tied to one T
    std::string block;     // "-" when not block-specific
    std::string statistic;
    double value = 0.0;
    int reps = 0;
    int failures = 0;
};

struct McResult {
    std::string experiment_id;
    ExperimentKind kind = ExperimentKind::Rate;
    std::vector<McRow> rows;
    bool hard_failure = false;
    std::vector<std::string> notes;
    double wall_ms = 0.0; // reported in the manifest only, never in CSV

    // First matching row value; throws if absent.
    double get(const std::string& estimator, int T, const std::string& block,
               const std::string& statistic) const;
    bool has(const std::string& estimator, int T, const std::string& block,
             const std::string& statistic) const;
};

McResult run_rate_experiment(const ExperimentConfig& cfg, int threads = 1);
McResult run_identity_checks(const ExperimentConfig& cfg, int threads = 1);
McResult run_matched_comparison(const ExperimentConfig& cfg, int threads = 1);
McResult run_dist_experiment(const ExperimentConfig& cfg, int threads = 1);

// Dispatch on cfg.kind.
McResult run_experiment(const ExperimentConfig& cfg, int threads = 1);

// results.csv schema: experiment_id,estimator,T,block,statistic,value,reps,failures
void write_results_csv(std::ostream& os, const std::vector<McResult>& results);

// Two-column (log T, log median-norm) per rate block; returns written names.
std::vector<std::string> write_plot_data(const std::string& out_dir, const McResult& result);

// Two-sample Kolmogorov-Smirnov distance.
double ks_distance(std::vector<double> a, std::vector<double> b);

double median(std::vector<double> v);

} // namespace rankreg::mc
