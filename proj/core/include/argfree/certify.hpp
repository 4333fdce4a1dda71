#pragma once

#include <string>

#include <Eigen/Dense>

#include "argfree/graph.hpp"
#include "argfree/problem.hpp"

namespace argfree {

// Regularity and topology constants feeding the convergence certificates.
// mu, L0, L1 describe the global objective; L_phi the aggregation maps;
// L0_hat the per-agent losses; rho_a and norm_a_minus_i come from the graph.
struct TheoryConstants {
  double mu = 0.0;
  double l0 = 0.0;
  double l1 = 0.0;
  double l_phi = 0.0;
  double l0_hat = 0.0;
  int n = 0;  // total decision dimension
  int n_agents = 0;
  int d = 0;  // aggregate dimension
  double rho_a = 0.0;
  double norm_a_minus_i = 0.0;
};

// Pulls the constants from a problem's analytic extras and a graph report.
TheoryConstants theory_constants(const AggregativeProblem& p, const GraphReport& report);

struct StepsizeBounds {
  double alpha_max_centralized = 0.0;  // 1 / (2 (n+4) L1)
  double alpha1_star = 0.0;
  double alpha2_star = 0.0;  // meaningful only when alpha2_feasible
  bool alpha2_feasible = false;  // L0_hat < (1 - rho_a) / ||A - I||
};
StepsizeBounds stepsize_bounds(const TheoryConstants& c, double delta);

// The explicit 5x5 contraction matrix driving E[theta_{k+1}] <= M E[theta_k] + b,
// assembled from beta1 and the gamma constants.
Eigen::MatrixXd assemble_M(double alpha, double delta, const TheoryConstants& c);

// The disturbance vector b paired with assemble_M; e_du_norm bounds
// E||u_{k+1} - u_k|| (sqrt(2n) in the iid case).
Eigen::VectorXd disturbance_bound_vector(double alpha, double delta, const TheoryConstants& c,
                                         double e_du_norm);

// Perron root of a non-negative matrix by power iteration, tolerance 1e-12.
double spectral_radius(const Eigen::MatrixXd& m);

struct EtaEstimates {
  double eta1 = 0.0;
  double eta2 = 0.0;
  double eta3 = 0.0;
  double max() const { return std::max(eta1, std::max(eta2, eta3)); }
};
// Closed-form Gershgorin row bounds on the rate; eta1/eta2/eta3 equal the
// row sums of assemble_M for rows 1, 2-3 and 4-5.
EtaEstimates eta_estimates(double alpha, double delta, const TheoryConstants& c);

// Closed-form approximation-error bound. e_du_sq is E||u_{k+1} - u_k||^2
// (2n for iid exploration; the stationary trace form under momentum).
// squared_expectation selects whether that expectation enters squared or
// linearly; the two conventions disagree in places, so the certificate
// reports both rather than silently picking one.
double epsilon_bound(double alpha, double delta, const TheoryConstants& c, double e_du_sq,
                     bool squared_expectation = true);

// delta * max{ trace[(B-I)^T Sigma (B-I) + Sigma_v], sqrt(n) } with Sigma the
// stationary covariance of the momentum process.
double epsilon_order_em(const Eigen::MatrixXd& b, const Eigen::MatrixXd& sigma_v, double delta,
                        int n);

// Everything the theory says about one configuration, evaluated numerically.
struct Certificate {
  double alpha = 0.0;
  double delta = 0.0;
  TheoryConstants constants;

  double alpha_max_centralized = 0.0;
  double alpha1_star = 0.0;
  double alpha2_star = 0.0;
  bool alpha_within_bounds = false;
  bool delta_under_alpha_sqrt_n = false;  // delta < alpha sqrt(n)
  bool l0_hat_margin = false;             // L0_hat ||A - I|| < 1 - rho_a
  bool feasible = false;                  // all three predicates above

  double eta1_star = 0.0;
  double eta2_star = 0.0;
  double eta3_star = 0.0;
  double eta_numeric = 0.0;  // rho(M(alpha)), the authoritative rate
  bool contractive = false;  // eta_numeric < 1

  double e_du_sq = 0.0;
  double epsilon = 0.0;            // squared-expectation form
  double epsilon_unsquared = 0.0;  // linear-expectation variant
  double epsilon_em = 0.0;         // trace form

  std::string to_json() const;
};

Certificate make_certificate(const TheoryConstants& c, double alpha, double delta,
                             double e_du_sq);

}  // namespace argfree
