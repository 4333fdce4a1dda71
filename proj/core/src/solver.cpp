#include "argfree/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "argfree/certify.hpp"
#include "argfree/rng.hpp"

namespace argfree {

namespace {

constexpr double kDivergenceGuard = 1e12;
constexpr std::uint64_t kInitTag = 0x78303030;
constexpr std::uint64_t kExploreTag = 0x6578706c;
constexpr std::uint64_t kMomentumTag = 0x626d6174;

void guard_finite(const Eigen::VectorXd& x, long k) {
  if (!x.allFinite() || x.norm() > kDivergenceGuard) {
    std::ostringstream msg;
    msg << "solver diverged at iteration " << k;
    throw SolverAbort(msg.str(), k);
  }
}

ExplorationProcess build_exploration(const AggregativeProblem& problem,
                                     const SolverConfig& config) {
  const std::vector<int>& dims = problem.local_dims();
  const ExplorationSpec& spec = config.exploration;
  if (spec.script) {
    return ExplorationProcess::scripted(dims, *spec.script);
  }
  if (config.algorithm == Algorithm::argfree &&
      spec.mode == ExplorationProcess::Mode::momentum) {
    throw std::invalid_argument(
        "argfree uses iid exploration; use argfree_em for momentum filtering");
  }
  if (config.algorithm != Algorithm::argfree_em ||
      spec.mode == ExplorationProcess::Mode::iid) {
    return ExplorationProcess::iid(dims, mix64(config.seed ^ kExploreTag));
  }
  std::vector<Eigen::MatrixXd> b, sv, su0;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const int d = dims[i];
    if (spec.kappa) {
      b.push_back(*spec.kappa * Eigen::MatrixXd::Identity(d, d));
    } else {
      Rng rng = Rng::stream(config.seed, i, kMomentumTag);
      b.push_back(random_momentum_matrix(d, spec.b_eig_lo, spec.b_eig_hi, rng));
    }
    sv.push_back(spec.sigma_v_scale * Eigen::MatrixXd::Identity(d, d));
    su0.push_back(spec.sigma_u0_scale * Eigen::MatrixXd::Identity(d, d));
  }
  return ExplorationProcess::momentum(dims, std::move(b), std::move(sv), std::move(su0),
                                      mix64(config.seed ^ kExploreTag));
}

Eigen::VectorXd draw_x0(const AggregativeProblem& problem, const SolverConfig& config) {
  if (config.x0) {
    if (config.x0->size() != problem.total_dim()) {
      throw std::invalid_argument("init: x0 dimension does not match the problem");
    }
    return *config.x0;
  }
  Eigen::VectorXd x(problem.total_dim());
  for (int i = 0; i < problem.n_agents(); ++i) {
    Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(i), kInitTag);
    for (int c = 0; c < problem.local_dims()[i]; ++c) {
      x(problem.offset(i) + c) = rng.uniform(config.x0_lo, config.x0_hi);
    }
  }
  return x;
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::argfree: return "argfree";
    case Algorithm::argfree_em: return "argfree_em";
    case Algorithm::exact_gradient_baseline: return "exact_gradient_baseline";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "argfree") return Algorithm::argfree;
  if (name == "argfree_em") return Algorithm::argfree_em;
  if (name == "exact_gradient_baseline") return Algorithm::exact_gradient_baseline;
  throw std::invalid_argument("unknown algorithm: " + name);
}

void SolverConfig::validate_or_throw() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("SolverConfig: alpha must be > 0");
  if (!(delta > 0.0)) throw std::invalid_argument("SolverConfig: delta must be > 0");
  if (k_max < 0) throw std::invalid_argument("SolverConfig: k_max must be >= 0");
  if (record_every < 1) throw std::invalid_argument("SolverConfig: record_every must be >= 1");
  if (exploration.mode == ExplorationProcess::Mode::momentum && !exploration.script) {
    if (!exploration.kappa && !(exploration.b_eig_lo < exploration.b_eig_hi)) {
      throw std::invalid_argument("SolverConfig: empty momentum eigenvalue range");
    }
    if (exploration.kappa && !(std::abs(*exploration.kappa) < 1.0)) {
      throw std::invalid_argument("SolverConfig: |kappa| must be < 1");
    }
  }
}

Eigen::VectorXd SolverState::stacked_sigma() const {
  Eigen::VectorXd out(sigma.rows() * sigma.cols());
  for (int i = 0; i < sigma.rows(); ++i) out.segment(i * sigma.cols(), sigma.cols()) = sigma.row(i);
  return out;
}

Eigen::VectorXd SolverState::stacked_s() const {
  Eigen::VectorXd out(s.rows() * s.cols());
  for (int i = 0; i < s.rows(); ++i) out.segment(i * s.cols(), s.cols()) = s.row(i);
  return out;
}

SolverState init(const AggregativeProblem& problem, const WeightedDigraph& graph,
                 const SolverConfig& config) {
  config.validate_or_throw();
  if (problem.n_agents() != graph.n_agents()) {
    throw std::invalid_argument("init: problem and graph disagree on the number of agents");
  }
  const GraphReport report = validate(graph);
  if (!report.ok()) {
    throw std::invalid_argument("init: graph fails validation (see validate())");
  }

  const int n_ag = problem.n_agents();
  const int d = problem.agg_dim();

  SolverState st;
  st.algorithm = config.algorithm;
  st.k = 0;
  st.x = draw_x0(problem, config);

  if (config.algorithm == Algorithm::exact_gradient_baseline) {
    if (!problem.has_analytic()) {
      throw std::invalid_argument("baseline requires analytic gradients");
    }
    st.sigma.resize(n_ag, d);
    st.y.resize(n_ag, d);
    for (int i = 0; i < n_ag; ++i) {
      const Eigen::VectorXd xi = problem.agent_block(st.x, i);
      st.sigma.row(i) = problem.agg_map(i, xi);
      st.y.row(i) = problem.grad_sigma(i, xi, st.sigma.row(i));
    }
    return st;
  }

  st.exploration = build_exploration(problem, config);
  st.sigma.resize(n_ag, d);
  st.s.resize(n_ag, d);
  st.fp.resize(n_ag);
  st.p.resize(n_ag);
  st.phi_x.resize(n_ag, d);
  st.phi_xdu.resize(n_ag, d);
  st.loss_x.resize(n_ag);
  st.loss_xdu.resize(n_ag);

  for (int i = 0; i < n_ag; ++i) {
    const Eigen::VectorXd xi = problem.agent_block(st.x, i);
    const Eigen::VectorXd xi_probe = xi + config.delta * st.exploration.sample(i);
    st.phi_x.row(i) = problem.agg_map(i, xi);
    st.phi_xdu.row(i) = problem.agg_map(i, xi_probe);
    st.sigma.row(i) = st.phi_x.row(i);
    st.s.row(i) = st.phi_xdu.row(i);
    st.loss_x(i) = problem.local_loss(i, xi, st.sigma.row(i));
    st.loss_xdu(i) = problem.local_loss(i, xi_probe, st.s.row(i));
    st.fp(i) = st.loss_x(i);
    st.p(i) = st.loss_xdu(i);
  }
  return st;
}

namespace {

void gradient_free_step(SolverState& st, const AggregativeProblem& problem,
                        const WeightedDigraph& graph, const SolverConfig& config) {
  const int n_ag = problem.n_agents();
  const Eigen::MatrixXd& a = graph.weights();
  const double scale = config.alpha / config.delta;
  const bool whiten = st.algorithm == Algorithm::argfree_em;

  // Descent along the probed direction, normalized by the exploration
  // covariance when it is not the identity.
  Eigen::VectorXd x_next = st.x;
  for (int i = 0; i < n_ag; ++i) {
    const Eigen::VectorXd dir = whiten ? st.exploration.whitened(i) : st.exploration.sample(i);
    x_next.segment(problem.offset(i), problem.local_dims()[i]) -=
        scale * (st.p(i) - st.fp(i)) * dir;
  }
  guard_finite(x_next, st.k + 1);

  st.exploration.advance();

  // Fresh oracle values at the new points; the tracking recursions difference
  // them against the cached round-k values.
  Eigen::MatrixXd phi_x_next(n_ag, problem.agg_dim());
  Eigen::MatrixXd phi_xdu_next(n_ag, problem.agg_dim());
  for (int i = 0; i < n_ag; ++i) {
    const Eigen::VectorXd xi = x_next.segment(problem.offset(i), problem.local_dims()[i]);
    phi_x_next.row(i) = problem.agg_map(i, xi);
    phi_xdu_next.row(i) = problem.agg_map(i, xi + config.delta * st.exploration.sample(i));
  }
  const Eigen::MatrixXd sigma_next = a * st.sigma + (phi_x_next - st.phi_x);
  const Eigen::MatrixXd s_next = a * st.s + (phi_xdu_next - st.phi_xdu);

  Eigen::VectorXd loss_x_next(n_ag);
  Eigen::VectorXd loss_xdu_next(n_ag);
  for (int i = 0; i < n_ag; ++i) {
    const Eigen::VectorXd xi = x_next.segment(problem.offset(i), problem.local_dims()[i]);
    loss_x_next(i) = problem.local_loss(i, xi, sigma_next.row(i));
    loss_xdu_next(i) =
        problem.local_loss(i, xi + config.delta * st.exploration.sample(i), s_next.row(i));
  }
  const Eigen::VectorXd fp_next = a * st.fp + (loss_x_next - st.loss_x);
  const Eigen::VectorXd p_next = a * st.p + (loss_xdu_next - st.loss_xdu);

  st.x = std::move(x_next);
  st.sigma = sigma_next;
  st.s = s_next;
  st.fp = fp_next;
  st.p = p_next;
  st.phi_x = phi_x_next;
  st.phi_xdu = phi_xdu_next;
  st.loss_x = loss_x_next;
  st.loss_xdu = loss_xdu_next;
  ++st.k;

  if (!st.sigma.allFinite() || !st.s.allFinite() || !st.fp.allFinite() || !st.p.allFinite()) {
    throw SolverAbort("tracking variables became non-finite", st.k);
  }
}

}  // namespace

// The cited scheme is stated for exact oracles, where re-evaluating and
// reusing a stored value coincide; the recursion is implemented literally,
// querying both difference terms each round. The proposed algorithms
// instead transmit and reuse round-k values by design, which is what keeps
// their tracking identities intact under measurement noise.
void baseline_gradient_tracking_step(SolverState& st, const AggregativeProblem& problem,
                                     const WeightedDigraph& graph, const SolverConfig& config) {
  if (!problem.has_analytic()) {
    throw std::invalid_argument("baseline requires analytic gradients");
  }
  const int n_ag = problem.n_agents();
  const Eigen::MatrixXd& a = graph.weights();

  Eigen::VectorXd x_next = st.x;
  for (int i = 0; i < n_ag; ++i) {
    const Eigen::VectorXd xi = problem.agent_block(st.x, i);
    const Eigen::VectorXd g = problem.grad_x(i, xi, st.sigma.row(i)) +
                              problem.agg_jacobian(i, xi).transpose() *
                                  st.y.row(i).transpose();
    x_next.segment(problem.offset(i), problem.local_dims()[i]) -= config.alpha * g;
  }
  guard_finite(x_next, st.k + 1);

  Eigen::MatrixXd phi_diff(n_ag, problem.agg_dim());
  for (int i = 0; i < n_ag; ++i) {
    const Eigen::VectorXd xi_new = x_next.segment(problem.offset(i), problem.local_dims()[i]);
    phi_diff.row(i) =
        problem.agg_map(i, xi_new) - problem.agg_map(i, problem.agent_block(st.x, i));
  }
  const Eigen::MatrixXd sigma_next = a * st.sigma + phi_diff;

  Eigen::MatrixXd grad_sigma_diff(n_ag, problem.agg_dim());
  for (int i = 0; i < n_ag; ++i) {
    const Eigen::VectorXd xi_new = x_next.segment(problem.offset(i), problem.local_dims()[i]);
    grad_sigma_diff.row(i) =
        problem.grad_sigma(i, xi_new, sigma_next.row(i)) -
        problem.grad_sigma(i, problem.agent_block(st.x, i), st.sigma.row(i));
  }
  const Eigen::MatrixXd y_next = a * st.y + grad_sigma_diff;

  st.x = std::move(x_next);
  st.sigma = sigma_next;
  st.y = y_next;
  ++st.k;
}

void step(SolverState& state, const AggregativeProblem& problem, const WeightedDigraph& graph,
          const SolverConfig& config) {
  if (config.algorithm == Algorithm::exact_gradient_baseline) {
    baseline_gradient_tracking_step(state, problem, graph, config);
  } else {
    gradient_free_step(state, problem, graph, config);
  }
}

Eigen::VectorXd theta(const SolverState& state, const std::optional<Eigen::VectorXd>& x_star) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const int n_ag = static_cast<int>(state.sigma.rows());
  const bool tracking = state.algorithm != Algorithm::exact_gradient_baseline;

  std::vector<double> parts;
  if (x_star) {
    if (x_star->size() != state.x.size()) {
      throw std::invalid_argument("theta: x_star dimension mismatch");
    }
    parts.push_back((state.x - *x_star).norm());
  }
  parts.push_back(n_ag > 0 ? consensus_gap(state.stacked_sigma(), n_ag) : nan);
  parts.push_back(tracking && n_ag > 0 ? consensus_gap(state.stacked_s(), n_ag) : nan);
  parts.push_back(tracking && n_ag > 0 ? consensus_gap(state.fp, n_ag) : nan);
  parts.push_back(tracking && n_ag > 0 ? consensus_gap(state.p, n_ag) : nan);
  return Eigen::Map<const Eigen::VectorXd>(parts.data(), static_cast<long>(parts.size()));
}

namespace {

TraceRow record_row(const SolverState& st, const AggregativeProblem& solver_problem,
                    const AggregativeProblem& diag, double wall_seconds) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  TraceRow row;
  row.k = st.k;
  row.x = st.x;
  row.loss = global_loss(diag, st.x);
  row.grad_norm = diag.has_analytic() && diag.analytic().grad_x
                      ? diag.global_gradient(st.x).norm()
                      : nan;
  const std::optional<Eigen::VectorXd> x_star =
      diag.has_analytic() ? diag.analytic().x_star : std::nullopt;
  const Eigen::VectorXd th = theta(st, x_star);
  row.theta = Eigen::VectorXd::Constant(5, nan);
  row.theta.tail(th.size()) = th;
  row.loss_evals = solver_problem.counters().total_loss();
  row.agg_evals = solver_problem.counters().total_agg();
  row.wall_seconds = wall_seconds;
  return row;
}

}  // namespace

RunTrace run(const AggregativeProblem& problem, const WeightedDigraph& graph,
             const SolverConfig& config, const std::optional<AggregativeProblem>& diagnostic) {
  config.validate_or_throw();
  const AggregativeProblem diag =
      diagnostic ? *diagnostic : problem.with_fresh_counters();

  RunTrace trace;
  trace.k_max = config.k_max;
  trace.record_every = config.record_every;
  trace.local_dims = problem.local_dims();

  if (config.warn_on_theory_violation && problem.has_analytic()) {
    const AnalyticExtras& a = problem.analytic();
    if (a.mu && a.l1 && a.l_phi && a.l0_hat) {
      const TheoryConstants c = theory_constants(problem, validate(graph));
      const StepsizeBounds b = stepsize_bounds(c, config.delta);
      std::ostringstream w;
      if (!b.alpha2_feasible) {
        w.str("");
        w << "theory: L0_hat ||A-I|| >= 1 - rho_A (alpha2* infeasible)";
        trace.warnings.push_back(w.str());
      }
      const double cap =
          std::min({b.alpha_max_centralized, b.alpha1_star,
                    b.alpha2_feasible ? b.alpha2_star : std::numeric_limits<double>::infinity()});
      if (!(config.alpha < cap)) {
        w.str("");
        w << "theory: alpha = " << config.alpha << " exceeds the stepsize bound " << cap;
        trace.warnings.push_back(w.str());
      }
      if (!(config.delta < config.alpha * std::sqrt(static_cast<double>(c.n)))) {
        w.str("");
        w << "theory: delta = " << config.delta << " is not below alpha sqrt(n)";
        trace.warnings.push_back(w.str());
      }
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  SolverState st = init(problem, graph, config);
  trace.rows.push_back(record_row(st, problem, diag, elapsed()));
  for (long k = 0; k < config.k_max; ++k) {
    step(st, problem, graph, config);
    if (st.k % config.record_every == 0 || st.k == config.k_max) {
      trace.rows.push_back(record_row(st, problem, diag, elapsed()));
    }
  }
  return trace;
}

}  // namespace argfree
