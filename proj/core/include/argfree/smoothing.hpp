#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "argfree/rng.hpp"

namespace argfree {

// Forward-difference gradient-free oracle
//   g_delta(x) = ((f(x + delta u) - f(x)) / delta) * Sigma^{-1} u.
// The caller supplies the pre-whitened direction sigma_inv_u = Sigma^{-1} u
// (equal to u itself for identity covariance). Exactly two f evaluations;
// non-finite values are rejected.
Eigen::VectorXd forward_difference_oracle(
    const std::function<double(const Eigen::VectorXd&)>& f_eval, const Eigen::VectorXd& x,
    const Eigen::VectorXd& u, double delta, const Eigen::VectorXd& sigma_inv_u);

// Monte Carlo estimate of the Gaussian smoothing E_u[f(x + delta u)] with
// standard normal u.
double gaussian_smoothed_value(const std::function<double(const Eigen::VectorXd&)>& f_eval,
                               const Eigen::VectorXd& x, double delta, long n_samples,
                               std::uint64_t seed);

// Closed-form bound on E||u||^p for u ~ N(0, I_n):
//   n^{p/2} for p in [0, 2], (p + n)^{p/2} for p > 2.
double moment_bound(int p, int n);

// Monte Carlo estimate of E||u||^p; diagnostic companion to moment_bound.
double empirical_moment(int p, int n, long n_samples, std::uint64_t seed);

// Constants of the single-step contraction of randomized descent:
//   beta1 = alpha mu (1 - 2 alpha (n+4) L1)
//   beta2 = sqrt(alpha delta^2 L1 (n + (alpha/2) (n+6)^3 L1))
// A valid rate requires 0 < beta1 < 1.
struct ContractionConstants {
  double beta1 = 0.0;
  double beta2 = 0.0;
  bool valid = false;
};
ContractionConstants contraction_constants(double alpha, double delta, double mu, double l1,
                                           int n);

// Unique fixed point of the discrete Lyapunov equation
// Sigma = B Sigma B^T + Sigma_v, for spectral_radius(B) < 1.
Eigen::MatrixXd stationary_covariance(const Eigen::MatrixXd& b, const Eigen::MatrixXd& sigma_v);

// Symmetric Q diag(d) Q^T with eigenvalues uniform in (eig_lo, eig_hi).
Eigen::MatrixXd random_momentum_matrix(int dim, double eig_lo, double eig_hi, Rng& rng);

// Per-agent exploration signal for the solvers.
//
//   iid      -- u_i^k ~ N(0, I) independently each round; Sigma_u = I.
//   momentum -- AR(1) filter u_i^{k+1} = B_i u_i^k + v_i^{k+1},
//               v ~ N(0, Sigma_v,i), with the exact covariance recursion
//               Sigma_u^{k+1} = B Sigma_u^k B^T + Sigma_v.
//   scripted -- replays a fixed stacked sequence (tests and replay).
//
// Single-owner mutable state; parallel Monte Carlo must use independent
// instances with distinct seeds.
class ExplorationProcess {
 public:
  enum class Mode { iid, momentum, scripted };

  ExplorationProcess() = default;  // empty process; factories below build usable ones

  static ExplorationProcess iid(std::vector<int> dims, std::uint64_t seed);
  static ExplorationProcess momentum(std::vector<int> dims, std::vector<Eigen::MatrixXd> b,
                                     std::vector<Eigen::MatrixXd> sigma_v,
                                     std::vector<Eigen::MatrixXd> sigma_u0, std::uint64_t seed);
  static ExplorationProcess scripted(std::vector<int> dims,
                                     std::vector<Eigen::VectorXd> stacked_sequence);

  Mode mode() const { return mode_; }
  int n_agents() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }

  // Draw u^{k+1} (and update Sigma_u in momentum mode).
  void advance();

  const Eigen::VectorXd& sample(int agent) const { return samples_[agent]; }
  Eigen::VectorXd stacked_sample() const;
  const Eigen::MatrixXd& covariance(int agent) const { return sigma_u_[agent]; }
  // (Sigma_u)^{-1} u via factor-and-solve; the identity shortcut applies in
  // iid and scripted modes.
  Eigen::VectorXd whitened(int agent) const;

 private:
  void check_covariances() const;

  Mode mode_ = Mode::iid;
  std::vector<int> dims_;
  std::vector<Eigen::VectorXd> samples_;
  std::vector<Eigen::MatrixXd> sigma_u_;
  std::vector<Eigen::MatrixXd> b_;
  std::vector<Eigen::MatrixXd> sigma_v_raw_;
  std::vector<Eigen::MatrixXd> sigma_v_factor_;
  std::vector<Rng> streams_;
  std::vector<Eigen::VectorXd> script_;
  std::size_t script_pos_ = 0;
};

}  // namespace argfree
