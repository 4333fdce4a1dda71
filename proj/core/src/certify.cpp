#include "argfree/certify.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "argfree/smoothing.hpp"

namespace argfree {

namespace {

struct Gammas {
  double g1, g2, g3, g4, g5, g6, g7, g8;
};

Gammas gamma_constants(double alpha, double delta, const TheoryConstants& c) {
  Gammas g;
  const double sqrt_n = std::sqrt(static_cast<double>(c.n));
  g.g1 = alpha * sqrt_n / delta;
  g.g2 = 0.5 * alpha * delta * c.l1 * std::pow(c.n + 6.0, 1.5);
  g.g3 = std::sqrt(2.0 * (c.n + 4.0)) * alpha * c.l1;
  g.g4 = c.l0_hat * g.g3 * (1.0 + c.l_phi);
  g.g5 = c.l0_hat * c.norm_a_minus_i;
  g.g6 = c.l0_hat * g.g1 * (1.0 + c.l_phi);
  g.g7 = c.l0_hat * g.g2 * (1.0 + c.l_phi);
  g.g8 = c.l0_hat * delta * (1.0 + c.l_phi);
  return g;
}

// mu, l_phi and l0_hat may be zero in degenerate probes (no strong
// convexity, constant maps); l1 and the graph quantities must be real.
void check_constants(const TheoryConstants& c) {
  if (!(c.mu >= 0.0) || !(c.l1 > 0.0) || !(c.l_phi >= 0.0) || !(c.l0_hat >= 0.0) || c.n < 1 ||
      !(c.rho_a >= 0.0) || !(c.rho_a < 1.0) || !(c.norm_a_minus_i >= 0.0)) {
    throw std::invalid_argument("TheoryConstants: constants out of range");
  }
}

}  // namespace

TheoryConstants theory_constants(const AggregativeProblem& p, const GraphReport& report) {
  if (!p.has_analytic()) throw std::logic_error("theory_constants: problem has no analytic extras");
  const AnalyticExtras& a = p.analytic();
  if (!a.mu || !a.l1 || !a.l_phi || !a.l0_hat) {
    throw std::logic_error("theory_constants: regularity constants missing");
  }
  TheoryConstants c;
  c.mu = *a.mu;
  c.l0 = a.l0.value_or(0.0);
  c.l1 = *a.l1;
  c.l_phi = *a.l_phi;
  c.l0_hat = *a.l0_hat;
  c.n = p.total_dim();
  c.n_agents = p.n_agents();
  c.d = p.agg_dim();
  c.rho_a = report.rho_a;
  c.norm_a_minus_i = report.norm_a_minus_i;
  return c;
}

StepsizeBounds stepsize_bounds(const TheoryConstants& c, double delta) {
  check_constants(c);
  if (!(delta > 0.0)) throw std::invalid_argument("stepsize_bounds: delta must be > 0");
  StepsizeBounds b;
  const double sqrt_n = std::sqrt(static_cast<double>(c.n));
  const double probe = std::sqrt(2.0 * (c.n + 4.0)) * c.l1 + 2.0 * sqrt_n / delta;
  b.alpha_max_centralized = 1.0 / (2.0 * (c.n + 4.0) * c.l1);
  b.alpha1_star = (1.0 - c.rho_a) / (c.l_phi * probe);
  const double numerator = 1.0 - c.rho_a - c.l0_hat * c.norm_a_minus_i;
  b.alpha2_feasible = numerator > 0.0;
  b.alpha2_star = numerator / (c.l0_hat * (1.0 + c.l_phi) * probe);
  return b;
}

Eigen::MatrixXd assemble_M(double alpha, double delta, const TheoryConstants& c) {
  check_constants(c);
  if (alpha < 0.0 || !(delta > 0.0)) throw std::invalid_argument("assemble_M: bad alpha or delta");
  const Gammas g = gamma_constants(alpha, delta, c);
  const ContractionConstants beta = contraction_constants(alpha, delta, c.mu, c.l1, c.n);
  const double root = std::sqrt(std::max(1.0 - beta.beta1, 0.0));
  const double rho = c.rho_a;
  const double lp = c.l_phi;

  Eigen::MatrixXd m(5, 5);
  m << root, 0.0, 0.0, g.g1, g.g1,                          //
      lp * g.g3, rho, 0.0, lp * g.g1, lp * g.g1,            //
      lp * g.g3, 0.0, rho, lp * g.g1, lp * g.g1,            //
      g.g4, g.g5, 0.0, rho + g.g6, g.g6,                    //
      g.g4, 0.0, g.g5, g.g6, rho + g.g6;
  return m;
}

Eigen::VectorXd disturbance_bound_vector(double alpha, double delta, const TheoryConstants& c,
                                         double e_du_norm) {
  check_constants(c);
  const Gammas g = gamma_constants(alpha, delta, c);
  const ContractionConstants beta = contraction_constants(alpha, delta, c.mu, c.l1, c.n);
  Eigen::VectorXd b(5);
  b << beta.beta2,                                   //
      c.l_phi * g.g2,                                //
      c.l_phi * g.g2 + c.l_phi * delta * e_du_norm,  //
      g.g7,                                          //
      g.g7 + g.g8 * e_du_norm;
  return b;
}

double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw std::invalid_argument("spectral_radius: matrix must be square");
  }
  if ((m.array() < 0.0).any()) {
    throw std::invalid_argument("spectral_radius: matrix must be non-negative");
  }
  // Shift by I: the Perron root moves to rho + 1 and the shifted matrix has a
  // positive diagonal, so plain power iteration converges even for periodic
  // zero-diagonal patterns.
  const int n = static_cast<int>(m.rows());
  const Eigen::MatrixXd shifted = m + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n).normalized();
  double lambda = 1.0;
  for (int it = 0; it < 200000; ++it) {
    Eigen::VectorXd w = shifted * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double next = v.dot(w);
    v = w / norm;
    if (it > 0 && std::abs(next - lambda) <= 1e-13 * std::max(1.0, std::abs(next))) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::max(lambda - 1.0, 0.0);
}

EtaEstimates eta_estimates(double alpha, double delta, const TheoryConstants& c) {
  check_constants(c);
  const Gammas g = gamma_constants(alpha, delta, c);
  const ContractionConstants beta = contraction_constants(alpha, delta, c.mu, c.l1, c.n);
  const double probe = std::sqrt(2.0 * (c.n + 4.0)) * c.l1 +
                       2.0 * std::sqrt(static_cast<double>(c.n)) / delta;
  EtaEstimates e;
  e.eta1 = std::sqrt(std::max(1.0 - beta.beta1, 0.0)) + 2.0 * g.g1;
  e.eta2 = c.rho_a + alpha * c.l_phi * probe;
  e.eta3 = c.rho_a + alpha * c.l0_hat * (1.0 + c.l_phi) * probe + c.l0_hat * c.norm_a_minus_i;
  return e;
}

double epsilon_bound(double alpha, double delta, const TheoryConstants& c, double e_du_sq,
                     bool squared_expectation) {
  check_constants(c);
  if (e_du_sq < 0.0) throw std::invalid_argument("epsilon_bound: e_du_sq must be >= 0");
  const double l_comb_sq =
      c.l_phi * c.l_phi + c.l0_hat * c.l0_hat * (1.0 + c.l_phi) * (1.0 + c.l_phi);
  const double du_term = squared_expectation ? e_du_sq * e_du_sq : e_du_sq;
  const double inner = alpha * c.l1 * c.n + 2.0 * l_comb_sq * du_term +
                       0.5 * alpha * alpha * c.l1 * c.l1 * std::pow(c.n + 6.0, 3.0) *
                           (1.0 + 1.5 * l_comb_sq);
  return delta * std::sqrt(std::max(inner, 0.0));
}

double epsilon_order_em(const Eigen::MatrixXd& b, const Eigen::MatrixXd& sigma_v, double delta,
                        int n) {
  if (n < 1) throw std::invalid_argument("epsilon_order_em: n must be >= 1");
  const Eigen::MatrixXd sigma = stationary_covariance(b, sigma_v);
  const Eigen::MatrixXd bmi = b - Eigen::MatrixXd::Identity(b.rows(), b.cols());
  const double trace = (bmi.transpose() * sigma * bmi + sigma_v).trace();
  return delta * std::max(trace, std::sqrt(static_cast<double>(n)));
}

Certificate make_certificate(const TheoryConstants& c, double alpha, double delta,
                             double e_du_sq) {
  Certificate cert;
  cert.alpha = alpha;
  cert.delta = delta;
  cert.constants = c;

  const StepsizeBounds b = stepsize_bounds(c, delta);
  cert.alpha_max_centralized = b.alpha_max_centralized;
  cert.alpha1_star = b.alpha1_star;
  cert.alpha2_star = b.alpha2_star;
  cert.alpha_within_bounds = b.alpha2_feasible && alpha > 0.0 &&
                             alpha < std::min({b.alpha_max_centralized, b.alpha1_star,
                                               b.alpha2_star});
  cert.delta_under_alpha_sqrt_n = delta < alpha * std::sqrt(static_cast<double>(c.n));
  cert.l0_hat_margin = c.l0_hat * c.norm_a_minus_i < 1.0 - c.rho_a;
  cert.feasible = cert.alpha_within_bounds && cert.delta_under_alpha_sqrt_n && cert.l0_hat_margin;

  const EtaEstimates eta = eta_estimates(alpha, delta, c);
  cert.eta1_star = eta.eta1;
  cert.eta2_star = eta.eta2;
  cert.eta3_star = eta.eta3;
  cert.eta_numeric = spectral_radius(assemble_M(alpha, delta, c));
  cert.contractive = cert.eta_numeric < 1.0;

  cert.e_du_sq = e_du_sq;
  cert.epsilon = epsilon_bound(alpha, delta, c, e_du_sq, true);
  cert.epsilon_unsquared = epsilon_bound(alpha, delta, c, e_du_sq, false);
  cert.epsilon_em = delta * std::max(e_du_sq, std::sqrt(static_cast<double>(c.n)));
  return cert;
}

std::string Certificate::to_json() const {
  nlohmann::json j;
  j["alpha"] = alpha;
  j["delta"] = delta;
  j["constants"] = {{"mu", constants.mu},
                    {"l0", constants.l0},
                    {"l1", constants.l1},
                    {"l_phi", constants.l_phi},
                    {"l0_hat", constants.l0_hat},
                    {"n", constants.n},
                    {"n_agents", constants.n_agents},
                    {"d", constants.d},
                    {"rho_a", constants.rho_a},
                    {"norm_a_minus_i", constants.norm_a_minus_i}};
  j["alpha_max_centralized"] = alpha_max_centralized;
  j["alpha1_star"] = alpha1_star;
  j["alpha2_star"] = alpha2_star;
  j["alpha_within_bounds"] = alpha_within_bounds;
  j["delta_under_alpha_sqrt_n"] = delta_under_alpha_sqrt_n;
  j["l0_hat_margin"] = l0_hat_margin;
  j["feasible"] = feasible;
  j["eta1_star"] = eta1_star;
  j["eta2_star"] = eta2_star;
  j["eta3_star"] = eta3_star;
  j["eta_numeric"] = eta_numeric;
  j["contractive"] = contractive;
  j["e_du_sq"] = e_du_sq;
  j["epsilon"] = epsilon;
  j["epsilon_unsquared"] = epsilon_unsquared;
  j["epsilon_em"] = epsilon_em;
  return j.dump(2);
}

}  // namespace argfree
