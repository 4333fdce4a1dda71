#include "argfree/smoothing.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace argfree {

namespace {

double general_spectral_radius(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> eig(m, /*computeEigenvectors=*/false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd psd_factor_checked(const Eigen::MatrixXd& cov, const char* what) {
  if (cov.rows() != cov.cols()) throw std::invalid_argument(std::string(what) + ": not square");
  if (!cov.isApprox(cov.transpose(), 1e-12)) {
    throw std::invalid_argument(std::string(what) + ": not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw std::invalid_argument(std::string(what) + ": not positive semidefinite");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

Eigen::VectorXd forward_difference_oracle(
    const std::function<double(const Eigen::VectorXd&)>& f_eval, const Eigen::VectorXd& x,
    const Eigen::VectorXd& u, double delta, const Eigen::VectorXd& sigma_inv_u) {
  if (!(delta > 0.0)) throw std::invalid_argument("forward_difference_oracle: delta must be > 0");
  if (u.size() != x.size() || sigma_inv_u.size() != x.size()) {
    throw std::invalid_argument("forward_difference_oracle: dimension mismatch");
  }
  const double f_plus = f_eval(x + delta * u);
  const double f_base = f_eval(x);
  if (!std::isfinite(f_plus) || !std::isfinite(f_base)) {
    throw std::runtime_error("forward_difference_oracle: non-finite function value");
  }
  return ((f_plus - f_base) / delta) * sigma_inv_u;
}

double gaussian_smoothed_value(const std::function<double(const Eigen::VectorXd&)>& f_eval,
                               const Eigen::VectorXd& x, double delta, long n_samples,
                               std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("gaussian_smoothed_value: n_samples must be >= 1");
  Rng rng = Rng::stream(seed, 0x736d6f, 0);
  const int n = static_cast<int>(x.size());
  double acc = 0.0;
  for (long s = 0; s < n_samples; ++s) {
    acc += f_eval(x + delta * rng.normal_vector(n));
  }
  return acc / static_cast<double>(n_samples);
}

double moment_bound(int p, int n) {
  if (p < 0 || n < 1) throw std::invalid_argument("moment_bound: need p >= 0 and n >= 1");
  if (p <= 2) return std::pow(static_cast<double>(n), p / 2.0);
  return std::pow(static_cast<double>(p + n), p / 2.0);
}

double empirical_moment(int p, int n, long n_samples, std::uint64_t seed) {
  if (p < 0 || n < 1 || n_samples < 1) throw std::invalid_argument("empirical_moment: bad inputs");
  Rng rng = Rng::stream(seed, 0x6d6f6d, 0);
  double acc = 0.0;
  for (long s = 0; s < n_samples; ++s) {
    acc += std::pow(rng.normal_vector(n).norm(), p);
  }
  return acc / static_cast<double>(n_samples);
}

ContractionConstants contraction_constants(double alpha, double delta, double mu, double l1,
                                           int n) {
  if (alpha < 0.0 || delta < 0.0 || !(mu >= 0.0) || !(l1 > 0.0) || n < 1) {
    throw std::invalid_argument("contraction_constants: bad inputs");
  }
  ContractionConstants c;
  c.beta1 = alpha * mu * (1.0 - 2.0 * alpha * (n + 4) * l1);
  const double inner = alpha * delta * delta * l1 *
                       (n + 0.5 * alpha * std::pow(n + 6.0, 3.0) * l1);
  c.beta2 = std::sqrt(std::max(inner, 0.0));
  c.valid = c.beta1 > 0.0 && c.beta1 < 1.0;
  return c;
}

Eigen::MatrixXd stationary_covariance(const Eigen::MatrixXd& b, const Eigen::MatrixXd& sigma_v) {
  if (b.rows() != b.cols() || sigma_v.rows() != sigma_v.cols() || b.rows() != sigma_v.rows()) {
    throw std::invalid_argument("stationary_covariance: dimension mismatch");
  }
  if (general_spectral_radius(b) >= 1.0) {
    throw std::invalid_argument("stationary_covariance: spectral radius of B must be < 1");
  }
  // Doubling iteration: after k rounds S holds sum_{j < 2^k} B^j Sigma_v B^j^T.
  Eigen::MatrixXd s = sigma_v;
  Eigen::MatrixXd m = b;
  for (int it = 0; it < 200; ++it) {
    const Eigen::MatrixXd next = s + m * s * m.transpose();
    const double delta = (next - s).norm();
    s = next;
    m = (m * m).eval();
    if (delta <= 1e-15 * std::max(1.0, s.norm())) break;
  }
  s = 0.5 * (s + s.transpose()).eval();
  const double residual = (b * s * b.transpose() + sigma_v - s).norm();
  if (residual > 1e-12 * (1.0 + s.norm())) {
    throw std::runtime_error("stationary_covariance: fixed-point residual too large");
  }
  return s;
}

Eigen::MatrixXd random_momentum_matrix(int dim, double eig_lo, double eig_hi, Rng& rng) {
  if (dim < 1 || !(0.0 <= eig_lo && eig_lo < eig_hi && eig_hi <= 1.0)) {
    throw std::invalid_argument("random_momentum_matrix: need 0 <= lo < hi <= 1");
  }
  Eigen::MatrixXd gauss(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) gauss(i, j) = rng.normal();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ();
  Eigen::VectorXd eigs(dim);
  for (int i = 0; i < dim; ++i) eigs(i) = rng.uniform(eig_lo, eig_hi);
  return q * eigs.asDiagonal() * q.transpose();
}

ExplorationProcess ExplorationProcess::iid(std::vector<int> dims, std::uint64_t seed) {
  ExplorationProcess p;
  p.mode_ = Mode::iid;
  p.dims_ = std::move(dims);
  for (std::size_t i = 0; i < p.dims_.size(); ++i) {
    p.streams_.push_back(Rng::stream(seed, i, 0x75756964));
    p.sigma_u_.push_back(Eigen::MatrixXd::Identity(p.dims_[i], p.dims_[i]));
    p.samples_.push_back(p.streams_.back().normal_vector(p.dims_[i]));
  }
  return p;
}

ExplorationProcess ExplorationProcess::momentum(std::vector<int> dims,
                                                std::vector<Eigen::MatrixXd> b,
                                                std::vector<Eigen::MatrixXd> sigma_v,
                                                std::vector<Eigen::MatrixXd> sigma_u0,
                                                std::uint64_t seed) {
  ExplorationProcess p;
  p.mode_ = Mode::momentum;
  p.dims_ = std::move(dims);
  const std::size_t n_ag = p.dims_.size();
  if (b.size() != n_ag || sigma_v.size() != n_ag || sigma_u0.size() != n_ag) {
    throw std::invalid_argument("ExplorationProcess: one B, Sigma_v, Sigma_u0 per agent");
  }
  for (std::size_t i = 0; i < n_ag; ++i) {
    const int d = p.dims_[i];
    if (b[i].rows() != d || b[i].cols() != d) {
      throw std::invalid_argument("ExplorationProcess: B dimension mismatch");
    }
    if (general_spectral_radius(b[i]) >= 1.0) {
      throw std::invalid_argument("ExplorationProcess: spectral radius of B must be < 1");
    }
    p.sigma_v_factor_.push_back(psd_factor_checked(sigma_v[i], "Sigma_v"));
    p.sigma_u_.push_back(0.5 * (sigma_u0[i] + sigma_u0[i].transpose()));
    p.streams_.push_back(Rng::stream(seed, i, 0x756d6f6d));
    const Eigen::MatrixXd u0_factor = psd_factor_checked(sigma_u0[i], "Sigma_u0");
    p.samples_.push_back(u0_factor * p.streams_.back().normal_vector(d));
  }
  p.b_ = std::move(b);
  p.sigma_v_raw_ = std::move(sigma_v);
  p.check_covariances();
  return p;
}

ExplorationProcess ExplorationProcess::scripted(std::vector<int> dims,
                                                std::vector<Eigen::VectorXd> stacked_sequence) {
  ExplorationProcess p;
  p.mode_ = Mode::scripted;
  p.dims_ = std::move(dims);
  if (stacked_sequence.empty()) {
    throw std::invalid_argument("ExplorationProcess: scripted sequence must be non-empty");
  }
  int total = 0;
  for (int d : p.dims_) total += d;
  for (const auto& v : stacked_sequence) {
    if (v.size() != total) throw std::invalid_argument("ExplorationProcess: scripted size mismatch");
  }
  p.script_ = std::move(stacked_sequence);
  int off = 0;
  for (std::size_t i = 0; i < p.dims_.size(); ++i) {
    p.sigma_u_.push_back(Eigen::MatrixXd::Identity(p.dims_[i], p.dims_[i]));
    p.samples_.push_back(p.script_[0].segment(off, p.dims_[i]));
    off += p.dims_[i];
  }
  p.script_pos_ = 0;
  return p;
}

void ExplorationProcess::check_covariances() const {
  for (std::size_t i = 0; i < sigma_u_.size(); ++i) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma_u_[i]);
    if (eig.eigenvalues().minCoeff() <= 1e-12) {
      throw std::runtime_error("ExplorationProcess: exploration covariance lost positive definiteness");
    }
  }
}

void ExplorationProcess::advance() {
  switch (mode_) {
    case Mode::iid:
      for (std::size_t i = 0; i < dims_.size(); ++i) {
        samples_[i] = streams_[i].normal_vector(dims_[i]);
      }
      break;
    case Mode::momentum:
      for (std::size_t i = 0; i < dims_.size(); ++i) {
        const Eigen::VectorXd v =
            sigma_v_factor_[i] * streams_[i].normal_vector(dims_[i]);
        samples_[i] = b_[i] * samples_[i] + v;
        sigma_u_[i] = (b_[i] * sigma_u_[i] * b_[i].transpose() + sigma_v_raw_[i]).eval();
        sigma_u_[i] = 0.5 * (sigma_u_[i] + sigma_u_[i].transpose()).eval();
      }
      check_covariances();
      break;
    case Mode::scripted: {
      if (script_pos_ + 1 >= script_.size()) {
        throw std::runtime_error("ExplorationProcess: scripted sequence exhausted");
      }
      ++script_pos_;
      int off = 0;
      for (std::size_t i = 0; i < dims_.size(); ++i) {
        samples_[i] = script_[script_pos_].segment(off, dims_[i]);
        off += dims_[i];
      }
      break;
    }
  }
}

Eigen::VectorXd ExplorationProcess::stacked_sample() const {
  int total = 0;
  for (int d : dims_) total += d;
  Eigen::VectorXd out(total);
  int off = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    out.segment(off, dims_[i]) = samples_[i];
    off += dims_[i];
  }
  return out;
}

Eigen::VectorXd ExplorationProcess::whitened(int agent) const {
  if (mode_ != Mode::momentum) return samples_[agent];
  return Eigen::LLT<Eigen::MatrixXd>(sigma_u_[agent]).solve(samples_[agent]);
}

}  // namespace argfree
