#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "argfree/certify.hpp"
#include "argfree/graph.hpp"
#include "argfree/problem.hpp"
#include "argfree/solver.hpp"

namespace argfree {

// Raised on malformed configuration or input files; the CLI maps it to
// exit code 1 (numerical aborts map to 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OutputFormat { csv, json };

// Formation benchmark parameters, an explicit instance, or a file.
struct ProblemSpec {
  int n_agents = 5;
  int dim = 2;
  double gamma = 2.0;
  double box_lo = 0.0;
  double box_hi = 10.0;
  std::uint64_t seed = 1;
  std::optional<std::string> file;
  std::optional<FormationSpec> instance;

  AggregativeProblem build() const;
};

struct GraphSpec {
  int n = 5;
  double p = 0.6;
  std::uint64_t seed = 1;
  std::optional<std::string> file;  // overrides generation

  WeightedDigraph build() const;
};

// One experiment = one problem, one graph, one solver configuration, run
// n_monte_carlo times with replica seeds master_seed + replica index.
// noise_cov_scale > 0 wraps the solver-side oracles in additive measurement
// noise N(0, scale * I) per query; diagnostics always use the clean problem.
struct ExperimentConfig {
  ProblemSpec problem;
  GraphSpec graph;
  SolverConfig solver;
  int n_monte_carlo = 10;
  double noise_cov_scale = 0.0;
  std::string output_dir = "out";
  OutputFormat output_format = OutputFormat::csv;

  std::string to_json_text() const;
  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
};

// Across-run mean and (population) standard deviation per recorded
// iteration. rel_loss is (f - f*)/(f0 - f*) when the optimum is known and
// the raw loss otherwise; `normalization` records which convention applies.
struct AggregatedStats {
  std::vector<long> ks;
  std::vector<double> mean_rel_loss, std_rel_loss;
  std::vector<double> mean_grad_norm, std_grad_norm;
  std::vector<std::array<double, 5>> mean_theta, std_theta;
  std::vector<double> mean_x_err, std_x_err;  // ||x - x*||, NaN when unknown
  std::string normalization;
  int n_runs = 0;

  double terminal_mean_rel_loss() const;
  double terminal_mean_x_err() const;
};

struct ExperimentResult {
  AggregatedStats stats;
  std::vector<RunTrace> traces;
  std::vector<std::string> trace_paths;
  std::string stats_path;
  std::string meta_path;
};

// n_monte_carlo independent runs, traces persisted per replica, statistics
// aggregated after all replicas complete. A replica abort is rethrown with
// its seed; nothing is aggregated in that case.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// (f(x_k) - f*) / (f(x_0) - f*) per recorded iteration.
std::vector<double> relative_loss(const RunTrace& trace, double f_star);

void export_trace(const RunTrace& trace, const std::string& path, OutputFormat format);
RunTrace parse_trace(const std::string& path);

AggregatedStats aggregate_stats(const std::vector<RunTrace>& traces,
                                std::optional<double> f_star,
                                const std::optional<Eigen::VectorXd>& x_star);
void export_stats(const AggregatedStats& stats, const std::string& path, OutputFormat format);

struct SweepRow {
  double value = 0.0;
  double mean_terminal_x_err = 0.0;
  double mean_terminal_rel_loss = 0.0;
};

// One run_experiment per value of `parameter` (delta | alpha |
// momentum_kappa); outputs land in per-value subdirectories.
std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const std::string& parameter,
                            const std::vector<double>& values);

}  // namespace argfree
