#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "argfree/graph.hpp"
#include "argfree/problem.hpp"
#include "argfree/smoothing.hpp"

namespace argfree {

enum class Algorithm { argfree, argfree_em, exact_gradient_baseline };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

// How the exploration signal is built for a run. In momentum mode, B_i is
// kappa * I when kappa is set, otherwise a random symmetric matrix with
// eigenvalues in (b_eig_lo, b_eig_hi); Sigma_v and Sigma_u^0 are scaled
// identities.
struct ExplorationSpec {
  ExplorationProcess::Mode mode = ExplorationProcess::Mode::iid;
  std::optional<double> kappa;
  double b_eig_lo = 0.9;
  double b_eig_hi = 1.0;
  double sigma_v_scale = 0.16;
  double sigma_u0_scale = 1.0;
  // A scripted sequence bypasses the fields above (tests, replay).
  std::optional<std::vector<Eigen::VectorXd>> script;
};

struct SolverConfig {
  Algorithm algorithm = Algorithm::argfree;
  double alpha = 2e-3;
  double delta = 1e-5;
  ExplorationSpec exploration;
  long k_max = 5000;
  std::uint64_t seed = 0;
  long record_every = 1;
  bool warn_on_theory_violation = true;
  // Initial iterate: explicit, or drawn uniformly from [x0_lo, x0_hi]^n.
  std::optional<Eigen::VectorXd> x0;
  double x0_lo = 0.0;
  double x0_hi = 10.0;

  void validate_or_throw() const;
};

// Complete synchronous-round state. For the gradient-free algorithms each
// agent carries (x_i, u_i, sigma_i, s_i, fp_i, p_i) where sigma_i and s_i
// track the aggregate at x and at the probed point x + delta u, while fp_i
// and p_i track the corresponding network-average losses. Oracle values from
// the current round are cached so the next tracking update only pays the two
// new evaluations per agent; under measurement noise this reuse is what keeps
// the tracking recursions telescoping.
struct SolverState {
  long k = 0;
  Algorithm algorithm = Algorithm::argfree;
  Eigen::VectorXd x;       // stacked decision variables
  Eigen::MatrixXd sigma;   // N x d, row i = sigma_i
  Eigen::MatrixXd s;       // N x d, row i = s_i
  Eigen::VectorXd fp;      // N, loss-at-x tracker
  Eigen::VectorXd p;       // N, loss-at-probe tracker
  ExplorationProcess exploration;

  // cached oracle values from round k
  Eigen::MatrixXd phi_x;     // N x d: phi_i(x_i)
  Eigen::MatrixXd phi_xdu;   // N x d: phi_i(x_i + delta u_i)
  Eigen::VectorXd loss_x;    // N: f_i(x_i, sigma_i)
  Eigen::VectorXd loss_xdu;  // N: f_i(x_i + delta u_i, s_i)

  // baseline-only tracking of the mean sigma-gradient
  Eigen::MatrixXd y;  // N x d

  Eigen::VectorXd stacked_sigma() const;
  Eigen::VectorXd stacked_s() const;
};

// Thrown when an iterate leaves the finite range (guard at ||x|| > 1e12).
class SolverAbort : public std::runtime_error {
 public:
  SolverAbort(const std::string& what, long iteration)
      : std::runtime_error(what), iteration(iteration) {}
  long iteration;
};

struct TraceRow {
  long k = 0;
  Eigen::VectorXd x;
  double loss = 0.0;
  double grad_norm = 0.0;  // NaN when no analytic gradient is available
  Eigen::VectorXd theta;   // 5 entries; theta(0) is NaN when x* is unknown
  long loss_evals = 0;
  long agg_evals = 0;
  double wall_seconds = 0.0;  // in-memory only, never persisted
};

struct RunTrace {
  std::vector<TraceRow> rows;
  std::vector<std::string> warnings;
  std::vector<int> local_dims;  // for coordinate column labels
  long k_max = 0;
  long record_every = 1;
};

SolverState init(const AggregativeProblem& problem, const WeightedDigraph& graph,
                 const SolverConfig& config);

// One synchronous round; dispatches on config.algorithm.
void step(SolverState& state, const AggregativeProblem& problem, const WeightedDigraph& graph,
          const SolverConfig& config);

// Exact-gradient distributed baseline: descent along
//   grad_x f_i(x_i, sigma_i) + (d phi_i)^T y_i
// with sigma_i tracking the aggregate and y_i tracking the network-average
// sigma-gradient. Requires analytic extras.
void baseline_gradient_tracking_step(SolverState& state, const AggregativeProblem& problem,
                                     const WeightedDigraph& graph, const SolverConfig& config);

// Error vector (||x - x*||, ||sigma - J sigma||, ||s - J s||, ||fp - J fp||,
// ||p - J p||); the first component is omitted when x* is not supplied.
// Components without backing state (baseline runs) are NaN.
Eigen::VectorXd theta(const SolverState& state, const std::optional<Eigen::VectorXd>& x_star);

// Executes k_max rounds, recording every record_every iterations plus the
// final one. Diagnostics (loss, gradient norm, theta) are evaluated on
// `diagnostic` when given; pass the clean problem here whenever `problem` is
// noise-wrapped so recording never perturbs the solver's random streams.
RunTrace run(const AggregativeProblem& problem, const WeightedDigraph& graph,
             const SolverConfig& config,
             const std::optional<AggregativeProblem>& diagnostic = std::nullopt);

}  // namespace argfree
