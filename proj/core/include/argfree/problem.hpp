#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace argfree {

// Per-agent oracle query counters. gradient_evals stays zero for any run of
// the gradient-free solvers; only the exact-gradient baseline (and explicit
// diagnostics) may touch the analytic oracles.
struct OracleCounters {
  std::vector<long> loss_evals;
  std::vector<long> agg_evals;
  std::vector<long> gradient_evals;

  explicit OracleCounters(int n_agents = 0)
      : loss_evals(n_agents, 0), agg_evals(n_agents, 0), gradient_evals(n_agents, 0) {}

  long total_loss() const;
  long total_agg() const;
  long total_gradient() const;
  void reset();
};

// Analytic side information available for benchmark instances: exact
// per-agent gradients (consumed by the baseline), the optimizer, and the
// regularity constants used by the convergence certificates. The constants
// are valid over the declared bounded domain [domain_lo, domain_hi]^n.
struct AnalyticExtras {
  // d f_i / d x_i at (x_i, sigma)
  std::function<Eigen::VectorXd(int, const Eigen::VectorXd&, const Eigen::VectorXd&)> grad_x;
  // d f_i / d sigma at (x_i, sigma)
  std::function<Eigen::VectorXd(int, const Eigen::VectorXd&, const Eigen::VectorXd&)> grad_sigma;
  // d phi_i / d x_i at x_i, shape d x n_i
  std::function<Eigen::MatrixXd(int, const Eigen::VectorXd&)> agg_jacobian;

  std::optional<Eigen::VectorXd> x_star;
  std::optional<double> f_star;
  std::optional<double> mu;
  std::optional<double> l0;
  std::optional<double> l1;
  std::optional<double> l_phi;
  std::optional<double> l0_hat;
  double domain_lo = 0.0;
  double domain_hi = 0.0;
};

// An aggregative optimization instance seen strictly through oracles:
// per-agent losses f_i(x_i, sigma) and aggregation maps phi_i(x_i). The
// global objective is f(x) = (1/N) sum_i f_i(x_i, sigma_f(x)) with
// sigma_f(x) = (1/N) sum_i phi_i(x_i). Copies share oracle state and
// counters; use with_fresh_counters() for an independently counted handle.
class AggregativeProblem {
 public:
  using LossOracle =
      std::function<double(int, const Eigen::VectorXd&, const Eigen::VectorXd&)>;
  using AggOracle = std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)>;

  AggregativeProblem(std::vector<int> local_dims, int agg_dim, LossOracle loss, AggOracle agg);

  int n_agents() const { return static_cast<int>(dims_.size()); }
  int agg_dim() const { return agg_dim_; }
  int total_dim() const { return total_dim_; }
  const std::vector<int>& local_dims() const { return dims_; }
  int offset(int agent) const { return offsets_[agent]; }
  Eigen::VectorXd agent_block(const Eigen::VectorXd& x, int agent) const {
    return x.segment(offsets_[agent], dims_[agent]);
  }

  // Oracle access; every call is counted.
  double local_loss(int agent, const Eigen::VectorXd& x_i, const Eigen::VectorXd& sigma) const;
  Eigen::VectorXd agg_map(int agent, const Eigen::VectorXd& x_i) const;

  bool has_analytic() const { return analytic_ != nullptr; }
  const AnalyticExtras& analytic() const;
  void set_analytic(AnalyticExtras extras);

  // Analytic oracle access (counted as gradient evaluations).
  Eigen::VectorXd grad_x(int agent, const Eigen::VectorXd& x_i, const Eigen::VectorXd& sigma) const;
  Eigen::VectorXd grad_sigma(int agent, const Eigen::VectorXd& x_i,
                             const Eigen::VectorXd& sigma) const;
  Eigen::MatrixXd agg_jacobian(int agent, const Eigen::VectorXd& x_i) const;
  // Full gradient of f at a stacked x, assembled from the per-agent oracles.
  Eigen::VectorXd global_gradient(const Eigen::VectorXd& x) const;

  OracleCounters& counters() const { return *counters_; }
  AggregativeProblem with_fresh_counters() const;

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_;
  int agg_dim_ = 0;
  int total_dim_ = 0;
  LossOracle loss_;
  AggOracle agg_;
  std::shared_ptr<AnalyticExtras> analytic_;
  std::shared_ptr<OracleCounters> counters_;
};

// sigma_f(x) = (1/N) sum_i phi_i(x_i)
Eigen::VectorXd aggregate(const AggregativeProblem& p, const Eigen::VectorXd& x);

// f(x) = (1/N) sum_i f_i(x_i, sigma_f(x))
double global_loss(const AggregativeProblem& p, const Eigen::VectorXd& x);

OracleCounters& oracle_counts(const AggregativeProblem& p);

// Formation-control benchmark: phi_i = identity and
//   f_i(x_i, sigma) = (gamma_i / 2) ||x_i - r_i||^2 + (1/2) ||x_i - sigma||^2.
// Ships analytic gradients, the closed-form optimizer, and regularity
// constants computed over the declared domain box.
AggregativeProblem formation_problem(const std::vector<Eigen::VectorXd>& targets,
                                     const std::vector<double>& gammas, double domain_lo = 0.0,
                                     double domain_hi = 10.0);

// Wraps all oracles of p so each query at x_i is evaluated at x_i + w_i with
// a fresh draw w_i ~ N(0, noise_cov[i]) per oracle call. The caller's x is
// never mutated and the solver's true state is unaffected. Noise draws use a
// dedicated stream, separate from exploration noise.
AggregativeProblem with_measurement_noise(const AggregativeProblem& p,
                                          const std::vector<Eigen::MatrixXd>& noise_cov,
                                          std::uint64_t seed);
// Convenience: noise_cov = cov_scale * I for every agent.
AggregativeProblem with_measurement_noise(const AggregativeProblem& p, double cov_scale,
                                          std::uint64_t seed);

// Serializable description of a formation benchmark instance.
struct FormationSpec {
  std::vector<Eigen::VectorXd> targets;
  std::vector<double> gammas;
  std::uint64_t seed = 0;  // generator seed, recorded for provenance

  std::string to_json() const;
  static FormationSpec from_json(const std::string& text);
  static FormationSpec load(const std::string& path);
  void save(const std::string& path) const;
  AggregativeProblem make_problem(double domain_lo = 0.0, double domain_hi = 10.0) const;
};

// Targets uniform in [lo, hi]^dim, all gammas equal; deterministic in seed.
FormationSpec random_formation_spec(int n_agents, int dim, double gamma, double lo, double hi,
                                    std::uint64_t seed);

}  // namespace argfree
