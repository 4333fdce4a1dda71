#include "argfree/problem.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "argfree/rng.hpp"

namespace argfree {

long OracleCounters::total_loss() const {
  return std::accumulate(loss_evals.begin(), loss_evals.end(), 0L);
}
long OracleCounters::total_agg() const {
  return std::accumulate(agg_evals.begin(), agg_evals.end(), 0L);
}
long OracleCounters::total_gradient() const {
  return std::accumulate(gradient_evals.begin(), gradient_evals.end(), 0L);
}
void OracleCounters::reset() {
  std::fill(loss_evals.begin(), loss_evals.end(), 0L);
  std::fill(agg_evals.begin(), agg_evals.end(), 0L);
  std::fill(gradient_evals.begin(), gradient_evals.end(), 0L);
}

AggregativeProblem::AggregativeProblem(std::vector<int> local_dims, int agg_dim, LossOracle loss,
                                       AggOracle agg)
    : dims_(std::move(local_dims)),
      agg_dim_(agg_dim),
      loss_(std::move(loss)),
      agg_(std::move(agg)) {
  if (dims_.empty()) throw std::invalid_argument("AggregativeProblem: need at least one agent");
  if (agg_dim_ < 1) throw std::invalid_argument("AggregativeProblem: agg_dim must be positive");
  offsets_.resize(dims_.size());
  total_dim_ = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (dims_[i] < 1) throw std::invalid_argument("AggregativeProblem: local dims must be positive");
    offsets_[i] = total_dim_;
    total_dim_ += dims_[i];
  }
  counters_ = std::make_shared<OracleCounters>(n_agents());
}

double AggregativeProblem::local_loss(int agent, const Eigen::VectorXd& x_i,
                                      const Eigen::VectorXd& sigma) const {
  ++counters_->loss_evals[agent];
  return loss_(agent, x_i, sigma);
}

Eigen::VectorXd AggregativeProblem::agg_map(int agent, const Eigen::VectorXd& x_i) const {
  ++counters_->agg_evals[agent];
  Eigen::VectorXd out = agg_(agent, x_i);
  if (out.size() != agg_dim_) {
    throw std::runtime_error("aggregation oracle returned wrong dimension");
  }
  return out;
}

const AnalyticExtras& AggregativeProblem::analytic() const {
  if (!analytic_) throw std::logic_error("problem has no analytic extras");
  return *analytic_;
}

void AggregativeProblem::set_analytic(AnalyticExtras extras) {
  analytic_ = std::make_shared<AnalyticExtras>(std::move(extras));
}

Eigen::VectorXd AggregativeProblem::grad_x(int agent, const Eigen::VectorXd& x_i,
                                           const Eigen::VectorXd& sigma) const {
  ++counters_->gradient_evals[agent];
  return analytic().grad_x(agent, x_i, sigma);
}

Eigen::VectorXd AggregativeProblem::grad_sigma(int agent, const Eigen::VectorXd& x_i,
                                               const Eigen::VectorXd& sigma) const {
  ++counters_->gradient_evals[agent];
  return analytic().grad_sigma(agent, x_i, sigma);
}

Eigen::MatrixXd AggregativeProblem::agg_jacobian(int agent, const Eigen::VectorXd& x_i) const {
  ++counters_->gradient_evals[agent];
  return analytic().agg_jacobian(agent, x_i);
}

Eigen::VectorXd AggregativeProblem::global_gradient(const Eigen::VectorXd& x) const {
  const int n_ag = n_agents();
  const Eigen::VectorXd sigma = aggregate(*this, x);
  Eigen::VectorXd sum_gs = Eigen::VectorXd::Zero(agg_dim_);
  for (int i = 0; i < n_ag; ++i) {
    sum_gs += grad_sigma(i, agent_block(x, i), sigma);
  }
  const Eigen::VectorXd mean_gs = sum_gs / n_ag;
  Eigen::VectorXd grad(total_dim_);
  for (int i = 0; i < n_ag; ++i) {
    const Eigen::VectorXd xi = agent_block(x, i);
    grad.segment(offsets_[i], dims_[i]) =
        (grad_x(i, xi, sigma) + agg_jacobian(i, xi).transpose() * mean_gs) / n_ag;
  }
  return grad;
}

AggregativeProblem AggregativeProblem::with_fresh_counters() const {
  AggregativeProblem copy = *this;
  copy.counters_ = std::make_shared<OracleCounters>(n_agents());
  return copy;
}

Eigen::VectorXd aggregate(const AggregativeProblem& p, const Eigen::VectorXd& x) {
  if (x.size() != p.total_dim()) throw std::invalid_argument("aggregate: wrong x dimension");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(p.agg_dim());
  for (int i = 0; i < p.n_agents(); ++i) {
    acc += p.agg_map(i, p.agent_block(x, i));
  }
  return acc / p.n_agents();
}

double global_loss(const AggregativeProblem& p, const Eigen::VectorXd& x) {
  if (x.size() != p.total_dim()) throw std::invalid_argument("global_loss: wrong x dimension");
  const Eigen::VectorXd sigma = aggregate(p, x);
  double acc = 0.0;
  for (int i = 0; i < p.n_agents(); ++i) {
    acc += p.local_loss(i, p.agent_block(x, i), sigma);
  }
  return acc / p.n_agents();
}

OracleCounters& oracle_counts(const AggregativeProblem& p) { return p.counters(); }

AggregativeProblem formation_problem(const std::vector<Eigen::VectorXd>& targets,
                                     const std::vector<double>& gammas, double domain_lo,
                                     double domain_hi) {
  const int n_ag = static_cast<int>(targets.size());
  if (n_ag < 1) throw std::invalid_argument("formation_problem: need at least one target");
  if (gammas.size() != targets.size()) {
    throw std::invalid_argument("formation_problem: one gamma per target required");
  }
  const int d = static_cast<int>(targets[0].size());
  for (const auto& r : targets) {
    if (r.size() != d) throw std::invalid_argument("formation_problem: targets must share a dimension");
  }
  for (double g : gammas) {
    if (!(g > 0.0)) throw std::invalid_argument("formation_problem: gammas must be positive");
  }
  if (!(domain_hi > domain_lo)) {
    throw std::invalid_argument("formation_problem: empty domain box");
  }

  auto r = std::make_shared<std::vector<Eigen::VectorXd>>(targets);
  auto g = std::make_shared<std::vector<double>>(gammas);

  AggregativeProblem problem(
      std::vector<int>(n_ag, d), d,
      [r, g](int i, const Eigen::VectorXd& x_i, const Eigen::VectorXd& sigma) {
        return 0.5 * (*g)[i] * (x_i - (*r)[i]).squaredNorm() + 0.5 * (x_i - sigma).squaredNorm();
      },
      [](int, const Eigen::VectorXd& x_i) { return x_i; });

  AnalyticExtras extras;
  extras.grad_x = [r, g](int i, const Eigen::VectorXd& x_i, const Eigen::VectorXd& sigma) {
    return ((*g)[i] * (x_i - (*r)[i]) + (x_i - sigma)).eval();
  };
  extras.grad_sigma = [](int, const Eigen::VectorXd& x_i, const Eigen::VectorXd& sigma) {
    return (sigma - x_i).eval();
  };
  extras.agg_jacobian = [d](int, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(d, d).eval();
  };

  // Closed-form optimizer: stationarity gives x_i = (gamma_i r_i + xbar)/(1+gamma_i);
  // averaging solves for xbar.
  Eigen::VectorXd weighted = Eigen::VectorXd::Zero(d);
  double c_sum = 0.0;
  for (int i = 0; i < n_ag; ++i) {
    const double c = 1.0 / (1.0 + gammas[i]);
    weighted += gammas[i] * c * targets[i];
    c_sum += c;
  }
  const Eigen::VectorXd xbar = weighted / (n_ag - c_sum);
  Eigen::VectorXd x_star(n_ag * d);
  for (int i = 0; i < n_ag; ++i) {
    x_star.segment(i * d, d) = (gammas[i] * targets[i] + xbar) / (1.0 + gammas[i]);
  }
  extras.x_star = x_star;

  double f_star = 0.0;
  for (int i = 0; i < n_ag; ++i) {
    const Eigen::VectorXd xi = x_star.segment(i * d, d);
    f_star += 0.5 * gammas[i] * (xi - targets[i]).squaredNorm() + 0.5 * (xi - xbar).squaredNorm();
  }
  extras.f_star = f_star / n_ag;

  // Hessian of f is (1/N)(diag(gamma) + I - J) kron I_d; its extreme
  // eigenvalues give mu and L1. The Kronecker factor does not change them.
  Eigen::MatrixXd h(n_ag, n_ag);
  h = Eigen::MatrixXd::Constant(n_ag, n_ag, -1.0 / n_ag);
  for (int i = 0; i < n_ag; ++i) h(i, i) += gammas[i] + 1.0;
  h /= n_ag;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  extras.mu = eig.eigenvalues().minCoeff();
  extras.l1 = eig.eigenvalues().maxCoeff();
  extras.l_phi = 1.0;

  // Worst-case distance from x_star to a corner of the domain box bounds
  // ||grad f|| over the box; f_i Lipschitz constants use box diameters.
  double far_sq = 0.0;
  for (int c = 0; c < n_ag * d; ++c) {
    const double away = std::max(std::abs(domain_lo - x_star(c)), std::abs(domain_hi - x_star(c)));
    far_sq += away * away;
  }
  extras.l0 = *extras.l1 * std::sqrt(far_sq);

  const double box_diag = (domain_hi - domain_lo) * std::sqrt(static_cast<double>(d));
  double l0_hat = 0.0;
  for (int i = 0; i < n_ag; ++i) {
    double far_r = 0.0;
    for (int c = 0; c < d; ++c) {
      const double away =
          std::max(std::abs(domain_lo - targets[i](c)), std::abs(domain_hi - targets[i](c)));
      far_r += away * away;
    }
    const double grad_x_sup = gammas[i] * std::sqrt(far_r) + box_diag;
    l0_hat = std::max(l0_hat, std::hypot(grad_x_sup, box_diag));
  }
  extras.l0_hat = l0_hat;
  extras.domain_lo = domain_lo;
  extras.domain_hi = domain_hi;

  problem.set_analytic(std::move(extras));
  return problem;
}

namespace {

// PSD factor L with L L^T = cov, via eigendecomposition so semidefinite
// covariances are accepted.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw std::invalid_argument("noise covariance must be square");
  if (!cov.isApprox(cov.transpose(), 1e-12)) {
    throw std::invalid_argument("noise covariance must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw std::invalid_argument("noise covariance must be positive semidefinite");
  }
  const Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * clamped.cwiseSqrt().asDiagonal();
}

}  // namespace

AggregativeProblem with_measurement_noise(const AggregativeProblem& p,
                                          const std::vector<Eigen::MatrixXd>& noise_cov,
                                          std::uint64_t seed) {
  const int n_ag = p.n_agents();
  if (static_cast<int>(noise_cov.size()) != n_ag) {
    throw std::invalid_argument("with_measurement_noise: one covariance per agent required");
  }
  auto factors = std::make_shared<std::vector<Eigen::MatrixXd>>();
  factors->reserve(noise_cov.size());
  for (int i = 0; i < n_ag; ++i) {
    if (noise_cov[i].rows() != p.local_dims()[i]) {
      throw std::invalid_argument("with_measurement_noise: covariance dimension mismatch");
    }
    factors->push_back(psd_factor(noise_cov[i]));
  }
  auto streams = std::make_shared<std::vector<Rng>>();
  streams->reserve(n_ag);
  for (int i = 0; i < n_ag; ++i) {
    streams->push_back(Rng::stream(seed, static_cast<std::uint64_t>(i), 0x6e6f6973));
  }

  const AggregativeProblem base = p;  // shares base oracles and counters
  auto draw = [factors, streams](int i) {
    return ((*factors)[i] * (*streams)[i].normal_vector((*factors)[i].cols())).eval();
  };

  AggregativeProblem noisy(
      std::vector<int>(p.local_dims()), p.agg_dim(),
      [base, draw](int i, const Eigen::VectorXd& x_i, const Eigen::VectorXd& sigma) {
        return base.local_loss(i, x_i + draw(i), sigma);
      },
      [base, draw](int i, const Eigen::VectorXd& x_i) { return base.agg_map(i, x_i + draw(i)); });

  if (p.has_analytic()) {
    AnalyticExtras extras = p.analytic();
    extras.grad_x = [base, draw](int i, const Eigen::VectorXd& x_i, const Eigen::VectorXd& sigma) {
      return base.grad_x(i, x_i + draw(i), sigma);
    };
    extras.grad_sigma = [base, draw](int i, const Eigen::VectorXd& x_i,
                                     const Eigen::VectorXd& sigma) {
      return base.grad_sigma(i, x_i + draw(i), sigma);
    };
    extras.agg_jacobian = [base, draw](int i, const Eigen::VectorXd& x_i) {
      return base.agg_jacobian(i, x_i + draw(i));
    };
    noisy.set_analytic(std::move(extras));
  }
  return noisy;
}

AggregativeProblem with_measurement_noise(const AggregativeProblem& p, double cov_scale,
                                          std::uint64_t seed) {
  std::vector<Eigen::MatrixXd> cov;
  cov.reserve(p.n_agents());
  for (int i = 0; i < p.n_agents(); ++i) {
    cov.push_back(cov_scale * Eigen::MatrixXd::Identity(p.local_dims()[i], p.local_dims()[i]));
  }
  return with_measurement_noise(p, cov, seed);
}

std::string FormationSpec::to_json() const {
  nlohmann::json j;
  auto arr = nlohmann::json::array();
  for (const auto& t : targets) {
    arr.push_back(std::vector<double>(t.data(), t.data() + t.size()));
  }
  j["targets"] = arr;
  j["gammas"] = gammas;
  j["seed"] = seed;
  return j.dump(2);
}

FormationSpec FormationSpec::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  FormationSpec spec;
  for (const auto& t : j.at("targets")) {
    const auto v = t.get<std::vector<double>>();
    spec.targets.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
  }
  spec.gammas = j.at("gammas").get<std::vector<double>>();
  spec.seed = j.value("seed", std::uint64_t{0});
  return spec;
}

FormationSpec FormationSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open problem file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void FormationSpec::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write problem file: " + path);
  out << to_json() << "\n";
}

AggregativeProblem FormationSpec::make_problem(double domain_lo, double domain_hi) const {
  return formation_problem(targets, gammas, domain_lo, domain_hi);
}

FormationSpec random_formation_spec(int n_agents, int dim, double gamma, double lo, double hi,
                                    std::uint64_t seed) {
  if (n_agents < 1 || dim < 1) throw std::invalid_argument("random_formation_spec: bad sizes");
  FormationSpec spec;
  spec.seed = seed;
  Rng rng = Rng::stream(seed, 0x7461, 0);
  for (int i = 0; i < n_agents; ++i) {
    Eigen::VectorXd r(dim);
    for (int c = 0; c < dim; ++c) r(c) = rng.uniform(lo, hi);
    spec.targets.push_back(std::move(r));
    spec.gammas.push_back(gamma);
  }
  return spec;
}

}  // namespace argfree
