// Acceptance suite: one check per shipped guarantee, each printed as a
// single PASS/FAIL line. Run all checks with no arguments, a single one
// with --only <id>, or list them with --list.

#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "argfree/certify.hpp"
#include "argfree/graph.hpp"
#include "argfree/harness.hpp"
#include "argfree/problem.hpp"
#include "argfree/rng.hpp"
#include "argfree/smoothing.hpp"
#include "argfree/solver.hpp"

using namespace argfree;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Check {
  int id;
  const char* name;
  std::function<Outcome()> fn;
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

// The robotic formation benchmark: N = 5 planar agents, Erdos-Renyi
// topology with p = 0.6, gamma_i = 2, targets and starts uniform in [0, 10].
ExperimentConfig benchmark_config(Algorithm alg, const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.problem.n_agents = 5;
  cfg.problem.dim = 2;
  cfg.problem.gamma = 2.0;
  cfg.problem.box_lo = 0.0;
  cfg.problem.box_hi = 10.0;
  cfg.problem.seed = 42;
  cfg.graph.n = 5;
  cfg.graph.p = 0.6;
  cfg.graph.seed = 42;
  cfg.solver.algorithm = alg;
  cfg.solver.alpha = 2e-3;
  cfg.solver.delta = 1e-5;
  cfg.solver.seed = 1000;
  cfg.solver.k_max = 3000;
  cfg.solver.record_every = 50;
  cfg.solver.warn_on_theory_violation = false;
  if (alg == Algorithm::argfree_em) {
    cfg.solver.exploration.mode = ExplorationProcess::Mode::momentum;
    cfg.solver.exploration.b_eig_lo = 0.9;
    cfg.solver.exploration.b_eig_hi = 1.0;
    cfg.solver.exploration.sigma_v_scale = 0.16;
    cfg.solver.exploration.sigma_u0_scale = 1.0;
  }
  cfg.n_monte_carlo = 10;
  cfg.output_dir = out_dir;
  return cfg;
}

struct Quadratic {
  Eigen::MatrixXd q;
  Eigen::VectorXd center;
  double mu = 0.0;
  double l1 = 0.0;

  double operator()(const Eigen::VectorXd& x) const {
    return 0.5 * (x - center).dot(q * (x - center));
  }
  Eigen::VectorXd grad(const Eigen::VectorXd& x) const { return q * (x - center); }
};

Quadratic random_quadratic(int n, double eig_lo, double eig_hi, Rng& rng) {
  Eigen::MatrixXd gauss(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) gauss(i, j) = rng.normal();
  const Eigen::MatrixXd qbasis = Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ();
  Eigen::VectorXd eigs(n);
  for (int i = 0; i < n; ++i) eigs(i) = rng.uniform(eig_lo, eig_hi);
  Quadratic f;
  f.q = qbasis * eigs.asDiagonal() * qbasis.transpose();
  f.mu = eigs.minCoeff();
  f.l1 = eigs.maxCoeff();
  f.center = rng.normal_vector(n);
  return f;
}

// ---------------------------------------------------------------------------
// 1. Average-preservation identities along the benchmark run
// ---------------------------------------------------------------------------

Outcome criterion_tracking_identities() {
  const ExperimentConfig cfg = benchmark_config(Algorithm::argfree, "");
  const AggregativeProblem p = cfg.problem.build();
  const AggregativeProblem diag = p.with_fresh_counters();
  const WeightedDigraph g = cfg.graph.build();
  SolverConfig sc = cfg.solver;
  sc.k_max = 2000;

  SolverState st = init(p, g, sc);
  double worst = 0.0;
  for (long k = 0; k < sc.k_max; ++k) {
    step(st, p, g, sc);
    const Eigen::VectorXd sigma_f = aggregate(diag, st.x);
    const Eigen::VectorXd probe = st.x + sc.delta * st.exploration.stacked_sample();
    const Eigen::VectorXd s_ref = aggregate(diag, probe);
    double fp_ref = 0.0, p_ref = 0.0;
    for (int i = 0; i < 5; ++i) {
      fp_ref += diag.local_loss(i, diag.agent_block(st.x, i), st.sigma.row(i));
      p_ref += diag.local_loss(i, diag.agent_block(probe, i), st.s.row(i));
    }
    fp_ref /= 5;
    p_ref /= 5;

    const Eigen::VectorXd sigma_bar = st.sigma.colwise().mean();
    const Eigen::VectorXd s_bar = st.s.colwise().mean();
    const double e1 = (sigma_bar - sigma_f).norm() / (1.0 + sigma_f.norm());
    const double e2 = (s_bar - s_ref).norm() / (1.0 + s_ref.norm());
    const double e3 = std::abs(st.fp.mean() - fp_ref) / (1.0 + std::abs(fp_ref));
    const double e4 = std::abs(st.p.mean() - p_ref) / (1.0 + std::abs(p_ref));
    worst = std::max({worst, e1, e2, e3, e4});
  }
  Outcome out;
  out.pass = worst < 1e-8;
  out.detail = "max relative identity error over 2000 rounds: " + fmt(worst);
  return out;
}

// ---------------------------------------------------------------------------
// 2. Single-step contraction of randomized descent
// ---------------------------------------------------------------------------

Outcome criterion_contraction() {
  Rng rng(2024);
  const long draws = 10000;
  int checked = 0, failed = 0;
  double worst_margin = 1e300;
  for (int n : {1, 2, 5, 10}) {
    for (int instance = 0; instance < 5; ++instance) {
      const Quadratic f = random_quadratic(n, 0.5, 2.0, rng);
      const double alpha = 0.8 / (2.0 * (n + 4) * f.l1);
      const double delta = 0.01;
      const ContractionConstants beta =
          contraction_constants(alpha, delta, f.mu, f.l1, n);
      auto f_eval = [&f](const Eigen::VectorXd& y) { return f(y); };
      for (int probe = 0; probe < 10; ++probe) {
        const Eigen::VectorXd x = f.center + rng.normal_vector(n) * rng.uniform(0.5, 3.0);
        double acc = 0.0, acc_sq = 0.0;
        for (long s = 0; s < draws; ++s) {
          const Eigen::VectorXd u = rng.normal_vector(n);
          const Eigen::VectorXd g = forward_difference_oracle(f_eval, x, u, delta, u);
          const double v = (x - alpha * g - f.center).norm();
          acc += v;
          acc_sq += v * v;
        }
        const double mean = acc / draws;
        const double se = std::sqrt(std::max(acc_sq / draws - mean * mean, 0.0) / draws);
        const double bound =
            std::sqrt(1.0 - beta.beta1) * (x - f.center).norm() + beta.beta2 + 4.0 * se;
        ++checked;
        if (mean > bound) ++failed;
        worst_margin = std::min(worst_margin, bound - mean);
      }
    }
  }
  Outcome out;
  out.pass = failed == 0;
  out.detail = std::to_string(checked) + " (quadratic, x) pairs, worst bound margin " +
               fmt(worst_margin);
  return out;
}

// ---------------------------------------------------------------------------
// 3. Gaussian smoothing moment suite
// ---------------------------------------------------------------------------

Outcome criterion_smoothing_suite() {
  Rng rng(515);
  const long samples = 100000;
  const double delta = 0.05;
  std::ostringstream detail;
  bool pass = true;
  for (int n : {1, 2, 5}) {
    const Quadratic f = random_quadratic(n, 0.5, 2.0, rng);
    const Eigen::VectorXd x = f.center + rng.normal_vector(n);
    const Eigen::VectorXd grad = f.grad(x);  // equals grad f_delta for quadratics
    auto f_eval = [&f](const Eigen::VectorXd& y) { return f(y); };

    Eigen::VectorXd mean_g = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sq_g = Eigen::VectorXd::Zero(n);
    double mean_gsq = 0.0, sq_gsq = 0.0;
    double mean_fd = 0.0, sq_fd = 0.0;
    Rng draw(516 + n);
    for (long s = 0; s < samples; ++s) {
      const Eigen::VectorXd u = draw.normal_vector(n);
      const Eigen::VectorXd g = forward_difference_oracle(f_eval, x, u, delta, u);
      mean_g += g;
      sq_g += g.cwiseProduct(g);
      const double gsq = g.squaredNorm();
      mean_gsq += gsq;
      sq_gsq += gsq * gsq;
      const double fd = f(x + delta * u);
      mean_fd += fd;
      sq_fd += fd * fd;
    }
    mean_g /= samples;
    sq_g /= samples;
    mean_gsq /= samples;
    sq_gsq /= samples;
    mean_fd /= samples;
    sq_fd /= samples;

    // unbiasedness, componentwise
    for (int c = 0; c < n; ++c) {
      const double se = std::sqrt(std::max(sq_g(c) - mean_g(c) * mean_g(c), 0.0) / samples);
      if (std::abs(mean_g(c) - grad(c)) > 4.0 * se) pass = false;
    }
    // smoothing gap |f_delta - f| <= (delta^2/2) L1 n
    const double se_fd = std::sqrt(std::max(sq_fd - mean_fd * mean_fd, 0.0) / samples);
    if (std::abs(mean_fd - f(x)) > 0.5 * delta * delta * f.l1 * n + 4.0 * se_fd) pass = false;
    if (mean_fd - f(x) < -4.0 * se_fd) pass = false;  // convexity direction
    // second moments
    const double se_gsq = std::sqrt(std::max(sq_gsq - mean_gsq * mean_gsq, 0.0) / samples);
    const double bound_a = 0.5 * delta * delta * std::pow(n + 6.0, 3.0) * f.l1 * f.l1 +
                           2.0 * (n + 4) * grad.squaredNorm();
    const double bound_b = 4.0 * (n + 4) * grad.squaredNorm() +
                           3.0 * delta * delta * f.l1 * f.l1 * std::pow(n + 4.0, 3.0);
    if (mean_gsq > bound_a + 4.0 * se_gsq) pass = false;
    if (mean_gsq > bound_b + 4.0 * se_gsq) pass = false;
    detail << "n=" << n << " Egsq/bound=" << fmt(mean_gsq / bound_a) << " ";
  }
  Outcome out;
  out.pass = pass;
  out.detail = detail.str();
  return out;
}

// ---------------------------------------------------------------------------
// 4. Noiseless benchmark: gradient-free methods settle near 1e-2 relative
//    loss; the exact-gradient baseline lands strictly lower
// ---------------------------------------------------------------------------

Outcome criterion_noiseless_experiment() {
  const AggregatedStats free_stats =
      run_experiment(benchmark_config(Algorithm::argfree, "acceptance_out/c4_argfree")).stats;
  const AggregatedStats em_stats =
      run_experiment(benchmark_config(Algorithm::argfree_em, "acceptance_out/c4_em")).stats;
  const AggregatedStats base_stats =
      run_experiment(
          benchmark_config(Algorithm::exact_gradient_baseline, "acceptance_out/c4_baseline"))
          .stats;

  auto reaches = [](const AggregatedStats& s, double level) {
    for (double v : s.mean_rel_loss)
      if (v <= level) return true;
    return false;
  };
  const double t_free = free_stats.terminal_mean_rel_loss();
  const double t_em = em_stats.terminal_mean_rel_loss();
  const double t_base = base_stats.terminal_mean_rel_loss();

  bool pass = reaches(free_stats, 1e-1) && reaches(em_stats, 1e-1);
  pass = pass && t_free >= 3e-3 && t_free <= 3e-1;
  pass = pass && t_em >= 3e-3 && t_em <= 3e-1;
  pass = pass && t_base < t_free && t_base < t_em;

  Outcome out;
  out.pass = pass;
  out.detail = "terminal mean relative loss: argfree " + fmt(t_free) + ", argfree_em " +
               fmt(t_em) + ", baseline " + fmt(t_base);
  return out;
}

// ---------------------------------------------------------------------------
// 5. Noisy benchmark: with additive measurement noise N(0, 0.2 I), both
//    gradient-free solvers end below the exact-gradient baseline
// ---------------------------------------------------------------------------

Outcome criterion_noisy_experiment() {
  auto noisy = [](Algorithm alg, const std::string& dir) {
    ExperimentConfig cfg = benchmark_config(alg, dir);
    cfg.noise_cov_scale = 0.2;
    // The forward difference divides measurement noise by delta, so the
    // noiseless delta = 1e-5 diverges here; 0.5 keeps that amplification at
    // the scale of the noise itself.
    cfg.solver.delta = 0.5;
    cfg.solver.k_max = 10000;
    cfg.solver.record_every = 100;
    return run_experiment(cfg).stats;
  };
  const double t_free = noisy(Algorithm::argfree, "acceptance_out/c5_argfree")
                            .terminal_mean_rel_loss();
  const double t_em = noisy(Algorithm::argfree_em, "acceptance_out/c5_em")
                          .terminal_mean_rel_loss();
  const double t_base =
      noisy(Algorithm::exact_gradient_baseline, "acceptance_out/c5_baseline")
          .terminal_mean_rel_loss();

  Outcome out;
  out.pass = t_free < t_base && t_em < t_base;
  out.detail = "noisy terminal mean relative loss: argfree " + fmt(t_free) + ", argfree_em " +
               fmt(t_em) + ", baseline " + fmt(t_base);
  return out;
}

// ---------------------------------------------------------------------------
// 6. Shrinking the smoothing ratio shrinks the terminal error
// ---------------------------------------------------------------------------

Outcome criterion_delta_scaling() {
  ExperimentConfig cfg = benchmark_config(Algorithm::argfree, "acceptance_out/c6");
  cfg.solver.k_max = 20000;
  cfg.solver.record_every = 200;
  // One decade of smoothing ratios, placed where the delta-driven error
  // dominates the delta-independent tracking-noise floor (about 3.6 in
  // ||x - x*|| on this benchmark).
  const std::vector<double> deltas = {24.0, 13.5, 7.6, 4.27, 2.4};

  std::vector<double> err, se;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    ExperimentConfig sub = cfg;
    sub.solver.delta = deltas[i];
    sub.output_dir = cfg.output_dir + "/d" + std::to_string(i);
    const AggregatedStats stats = run_experiment(sub).stats;
    err.push_back(stats.mean_x_err.back());
    se.push_back(stats.std_x_err.back() / std::sqrt(static_cast<double>(stats.n_runs)));
  }
  bool monotone = true;
  for (std::size_t i = 0; i + 1 < err.size(); ++i) {
    const double slack = 2.0 * std::sqrt(se[i] * se[i] + se[i + 1] * se[i + 1]);
    if (err[i + 1] > err[i] + slack) monotone = false;
  }
  const bool shrinks = err.back() <= 0.5 * err.front();

  Outcome out;
  out.pass = monotone && shrinks;
  std::ostringstream ss;
  ss << "terminal ||x - x*|| over delta decade:";
  for (std::size_t i = 0; i < err.size(); ++i) ss << " " << fmt(err[i]);
  ss << " (ratio " << fmt(err.front() / err.back()) << "x)";
  out.detail = ss.str();
  return out;
}

// ---------------------------------------------------------------------------
// 7. Exploration momentum shrinks the convergence neighborhood
// ---------------------------------------------------------------------------

Outcome criterion_momentum_improvement() {
  ExperimentConfig plain = benchmark_config(Algorithm::argfree, "acceptance_out/c7_argfree");
  plain.solver.k_max = 20000;
  plain.solver.record_every = 200;

  ExperimentConfig em = benchmark_config(Algorithm::argfree_em, "acceptance_out/c7_em");
  em.solver.k_max = 20000;
  em.solver.record_every = 200;
  const double kappa = 0.95;
  em.solver.exploration.kappa = kappa;
  // innovation variance matched so the stationary exploration covariance is
  // the identity, exactly as in the iid runs
  em.solver.exploration.sigma_v_scale = 1.0 - kappa * kappa;
  em.solver.exploration.sigma_u0_scale = 1.0;

  const double e_plain = run_experiment(plain).stats.terminal_mean_x_err();
  const double e_em = run_experiment(em).stats.terminal_mean_x_err();

  Outcome out;
  out.pass = e_em < e_plain;
  out.detail = "terminal ||x - x*||: argfree " + fmt(e_plain) + ", argfree_em(kappa=0.95) " +
               fmt(e_em);
  return out;
}

// ---------------------------------------------------------------------------
// 8. Certificate consistency and the geometric error envelope
// ---------------------------------------------------------------------------

TheoryConstants random_certificate_constants(Rng& rng, bool aim_contractive) {
  TheoryConstants c;
  c.l1 = rng.uniform(0.5, 3.0);
  c.mu = c.l1 * rng.uniform(0.05, 1.0);
  c.l0 = 1.0;
  c.l_phi = rng.uniform(0.2, 2.0);
  c.n = 1 + static_cast<int>(rng.integer() % 10);
  c.n_agents = 2 + static_cast<int>(rng.integer() % 5);
  c.d = 1 + static_cast<int>(rng.integer() % 3);
  c.norm_a_minus_i = rng.uniform(0.3, 2.0);
  if (aim_contractive) {
    c.rho_a = rng.uniform(0.05, 0.5);
    c.l0_hat = rng.uniform(1e-4, 0.5 * (1.0 - c.rho_a) / c.norm_a_minus_i);
  } else {
    c.rho_a = rng.uniform(0.05, 0.9);
    c.l0_hat = rng.uniform(0.001, 0.3);
  }
  return c;
}

// Tiny two-agent instance with a contractive certificate: a formation-style
// objective with a damped aggregation map phi(x) = c_phi x so the
// stepsize-feasibility region is non-empty.
struct EnvelopeInstance {
  AggregativeProblem problem;
  WeightedDigraph graph;
  TheoryConstants constants;
};

EnvelopeInstance make_envelope_instance() {
  const double gamma = 2.0;
  const double c_phi = 0.1;
  const double h = 0.002;
  const Eigen::Vector2d targets(-h, h);

  auto loss = [gamma, c_phi, targets](int i, const Eigen::VectorXd& x_i,
                                      const Eigen::VectorXd& sigma) {
    const double dr = x_i(0) - targets(i);
    const double dc = c_phi * x_i(0) - sigma(0);
    return 0.5 * gamma * dr * dr + 0.5 * dc * dc;
  };
  auto agg = [c_phi](int, const Eigen::VectorXd& x_i) { return (c_phi * x_i).eval(); };
  AggregativeProblem problem({1, 1}, 1, loss, agg);

  AnalyticExtras extras;
  extras.grad_x = [gamma, c_phi, targets](int i, const Eigen::VectorXd& x_i,
                                          const Eigen::VectorXd& sigma) {
    Eigen::VectorXd g(1);
    g(0) = gamma * (x_i(0) - targets(i)) + c_phi * (c_phi * x_i(0) - sigma(0));
    return g;
  };
  extras.grad_sigma = [c_phi](int, const Eigen::VectorXd& x_i, const Eigen::VectorXd& sigma) {
    Eigen::VectorXd g(1);
    g(0) = sigma(0) - c_phi * x_i(0);
    return g;
  };
  extras.agg_jacobian = [c_phi](int, const Eigen::VectorXd&) {
    return (c_phi * Eigen::MatrixXd::Identity(1, 1)).eval();
  };
  // stationarity: gamma (x_i - r_i) + c_phi^2 (x_i - xbar) = 0 and xbar = rbar
  const double xbar = 0.5 * (targets(0) + targets(1));
  Eigen::VectorXd x_star(2);
  for (int i = 0; i < 2; ++i) {
    x_star(i) = (gamma * targets(i) + c_phi * c_phi * xbar) / (gamma + c_phi * c_phi);
  }
  extras.x_star = x_star;
  double f_star = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double dr = x_star(i) - targets(i);
    const double dc = c_phi * x_star(i) - c_phi * xbar;
    f_star += 0.5 * gamma * dr * dr + 0.5 * dc * dc;
  }
  extras.f_star = f_star / 2;
  // Hessian (1/N)(gamma I + c_phi^2 (I - J)): eigenvalues gamma/2 and
  // (gamma + c_phi^2)/2
  extras.mu = gamma / 2.0;
  extras.l1 = (gamma + c_phi * c_phi) / 2.0;
  extras.l_phi = c_phi;
  // Lipschitz constant of the local losses over a ball of radius 0.008
  // around the origin (iterates stay well inside)
  const double radius = 0.008;
  const double sup_gx = gamma * (radius + h) + c_phi * (c_phi * radius + c_phi * radius);
  const double sup_gs = 2.0 * c_phi * radius;
  extras.l0_hat = std::hypot(sup_gx, sup_gs);
  extras.l0 = *extras.l1 * 2.0 * radius;
  extras.domain_lo = -radius;
  extras.domain_hi = radius;
  problem.set_analytic(std::move(extras));

  WeightedDigraph graph(Eigen::MatrixXd::Constant(2, 2, 0.5));
  const TheoryConstants constants = theory_constants(problem, validate(graph));
  return EnvelopeInstance{std::move(problem), std::move(graph), constants};
}

Outcome criterion_certificates() {
  Rng rng(808);
  bool pass = true;
  int antecedent_all = 0, antecedent_partial = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const bool aim = trial % 2 == 0;
    const TheoryConstants c = random_certificate_constants(rng, aim);
    double alpha, delta;
    if (aim) {
      alpha = rng.uniform(0.0, 1.0) * 0.5 / (2.0 * (c.n + 4) * c.l1);
      delta = 4.0 * alpha * std::sqrt(static_cast<double>(c.n)) /
              std::max(c.mu * alpha * 0.2, 1e-9);
    } else {
      alpha = rng.uniform(0.0, 0.05);
      delta = rng.uniform(1e-3, 1.0);
    }
    if (!(delta > 0.0)) delta = 1e-3;
    const Eigen::MatrixXd m = assemble_M(alpha, delta, c);
    const double rho = spectral_radius(m);
    const EtaEstimates eta = eta_estimates(alpha, delta, c);
    const double row1 = m.row(0).sum();

    if (row1 < 1.0 && std::max(eta.eta2, eta.eta3) < 1.0) {
      ++antecedent_partial;
      if (!(rho < 1.0 + 1e-10)) pass = false;
    }
    if (eta.eta1 < 1.0 && eta.eta2 < 1.0 && eta.eta3 < 1.0) {
      ++antecedent_all;
      if (!(rho <= eta.max() + 1e-10)) pass = false;
    }
    if (!(rho <= eta.max() + 1e-10)) pass = false;  // infinity-norm bound
  }
  if (antecedent_partial < 10) pass = false;

  // geometric envelope on a feasible instance
  EnvelopeInstance inst = make_envelope_instance();
  Certificate cert;
  double alpha_sel = 0.0, delta_sel = 0.0;
  bool found = false;
  for (double alpha : {0.002, 0.005, 0.01, 0.02, 0.04}) {
    const double delta = 0.5 * alpha * std::sqrt(2.0);
    const Certificate c = make_certificate(inst.constants, alpha, delta, 2.0 * inst.constants.n);
    if (c.feasible && c.contractive) {
      cert = c;
      alpha_sel = alpha;
      delta_sel = delta;
      found = true;
    }
  }
  std::ostringstream detail;
  detail << "implication hits " << antecedent_partial << "/" << antecedent_all;
  if (!found) {
    pass = false;
    detail << "; no feasible contractive configuration found";
  } else {
    detail << "; envelope config alpha=" << alpha_sel << " rho(M)=" << fmt(cert.eta_numeric);
    const int runs = 20;
    const long k_max = 400, record = 10;
    SolverConfig sc;
    sc.algorithm = Algorithm::argfree;
    sc.alpha = alpha_sel;
    sc.delta = delta_sel;
    sc.k_max = k_max;
    sc.record_every = record;
    sc.x0_lo = -0.0056;
    sc.x0_hi = 0.0056;
    sc.warn_on_theory_violation = false;

    std::vector<Eigen::VectorXd> mean_theta;
    for (int r = 0; r < runs; ++r) {
      sc.seed = 9000 + r;
      const RunTrace trace = run(inst.problem, inst.graph, sc);
      for (std::size_t row = 0; row < trace.rows.size(); ++row) {
        if (mean_theta.size() <= row) mean_theta.push_back(Eigen::VectorXd::Zero(5));
        mean_theta[row] += trace.rows[row].theta;
      }
    }
    for (auto& v : mean_theta) v /= runs;

    const Eigen::MatrixXd m = assemble_M(alpha_sel, delta_sel, inst.constants);
    const Eigen::VectorXd b = disturbance_bound_vector(
        alpha_sel, delta_sel, inst.constants, std::sqrt(2.0 * inst.constants.n));
    Eigen::VectorXd env = mean_theta.front();
    std::size_t row = 1;
    for (long k = 1; k <= k_max && pass; ++k) {
      env = (m * env + b).eval();
      if (k % record == 0 || k == k_max) {
        for (int t = 0; t < 5; ++t) {
          if (mean_theta[row](t) > 1.5 * env(t) + 1e-12) pass = false;
        }
        ++row;
      }
    }
    detail << (pass ? "; envelope holds" : "; envelope violated");
  }
  Outcome out;
  out.pass = pass;
  out.detail = detail.str();
  return out;
}

// ---------------------------------------------------------------------------
// 9. Stationary covariance of the momentum process
// ---------------------------------------------------------------------------

Outcome criterion_stationary_covariance() {
  // closed form for kappa I
  const double kappa = 0.95, sig2 = 0.3;
  Eigen::MatrixXd id3 = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd closed = stationary_covariance(kappa * id3, sig2 * id3);
  const Eigen::MatrixXd expect = sig2 / (1.0 - kappa * kappa) * id3;
  const double closed_err = (closed - expect).norm() / expect.norm();

  // empirical covariance of a generic symmetric-momentum process
  Rng rng(909);
  const int n = 3;
  const Eigen::MatrixXd b = random_momentum_matrix(n, 0.5, 0.9, rng);
  Eigen::MatrixXd sv = random_momentum_matrix(n, 0.2, 0.8, rng);
  sv = (sv * sv.transpose()).eval();  // SPD
  const Eigen::MatrixXd sigma = stationary_covariance(b, sv);

  ExplorationProcess proc =
      ExplorationProcess::momentum({n}, {b}, {sv}, {Eigen::MatrixXd::Identity(n, n)}, 910);
  for (int k = 0; k < 10000; ++k) proc.advance();  // burn-in
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  const long samples = 100000;
  for (long s = 0; s < samples; ++s) {
    proc.advance();
    acc += proc.sample(0) * proc.sample(0).transpose();
  }
  acc /= static_cast<double>(samples);
  const double frob = (acc - sigma).norm() / sigma.norm();

  Outcome out;
  out.pass = closed_err < 1e-10 && frob < 0.05;
  out.detail = "closed-form error " + fmt(closed_err) + ", empirical Frobenius error " +
               fmt(frob);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Check> checks = {
      {1, "tracking identities along the benchmark", criterion_tracking_identities},
      {2, "single-step randomized-descent contraction", criterion_contraction},
      {3, "gaussian smoothing moment suite", criterion_smoothing_suite},
      {4, "noiseless benchmark comparison", criterion_noiseless_experiment},
      {5, "noisy benchmark comparison", criterion_noisy_experiment},
      {6, "terminal error scales with the smoothing ratio", criterion_delta_scaling},
      {7, "exploration momentum improves accuracy", criterion_momentum_improvement},
      {8, "certificate consistency and error envelope", criterion_certificates},
      {9, "stationary exploration covariance", criterion_stationary_covariance},
  };

  int only = 0;
  for (int a = 1; a < argc; ++a) {
    if (std::strcmp(argv[a], "--only") == 0 && a + 1 < argc) {
      only = std::atoi(argv[a + 1]);
      ++a;
    } else if (std::strcmp(argv[a], "--list") == 0) {
      for (const Check& c : checks) std::cout << c.id << ": " << c.name << "\n";
      return 0;
    }
  }

  bool all_pass = true;
  for (const Check& c : checks) {
    if (only != 0 && c.id != only) continue;
    Outcome outcome;
    try {
      outcome = c.fn();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    std::cout << "criterion " << c.id << " [" << (outcome.pass ? "PASS" : "FAIL") << "] "
              << c.name << " -- " << outcome.detail << std::endl;
    all_pass = all_pass && outcome.pass;
  }
  return all_pass ? 0 : 1;
}
