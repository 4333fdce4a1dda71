#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "argfree/certify.hpp"
#include "argfree/graph.hpp"
#include "argfree/problem.hpp"
#include "argfree/smoothing.hpp"
#include "argfree/solver.hpp"

namespace {

using namespace argfree;

SolverConfig bench_solver_config(Algorithm alg) {
  SolverConfig cfg;
  cfg.algorithm = alg;
  cfg.alpha = 2e-3;
  cfg.delta = 1e-5;
  cfg.seed = 7;
  cfg.warn_on_theory_violation = false;
  if (alg == Algorithm::argfree_em) {
    cfg.exploration.mode = ExplorationProcess::Mode::momentum;
    cfg.exploration.kappa = 0.95;
    cfg.exploration.sigma_v_scale = 0.0975;
  }
  return cfg;
}

void BM_SolverStep(benchmark::State& state, Algorithm alg) {
  const int n_agents = static_cast<int>(state.range(0));
  const FormationSpec spec = random_formation_spec(n_agents, 2, 2.0, 0.0, 10.0, 11);
  const AggregativeProblem problem = spec.make_problem();
  const WeightedDigraph graph = erdos_renyi(n_agents, 0.6, 11);
  const SolverConfig cfg = bench_solver_config(alg);
  SolverState st = init(problem, graph, cfg);
  for (auto _ : state) {
    step(st, problem, graph, cfg);
    benchmark::DoNotOptimize(st.x.data());
  }
  state.SetItemsProcessed(state.iterations() * n_agents);
}

void BM_GraphValidate(benchmark::State& state) {
  const WeightedDigraph g = erdos_renyi(static_cast<int>(state.range(0)), 0.6, 5);
  for (auto _ : state) {
    const GraphReport report = validate(g);
    benchmark::DoNotOptimize(report.rho_a);
  }
}

void BM_StationaryCovariance(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(3);
  const Eigen::MatrixXd b = random_momentum_matrix(n, 0.9, 0.99, rng);
  const Eigen::MatrixXd sv = 0.16 * Eigen::MatrixXd::Identity(n, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(stationary_covariance(b, sv).data());
  }
}

void BM_SpectralRadius(benchmark::State& state) {
  TheoryConstants c;
  c.mu = 0.4;
  c.l0 = 10.0;
  c.l1 = 0.6;
  c.l_phi = 1.0;
  c.l0_hat = 0.05;
  c.n = 10;
  c.n_agents = 5;
  c.d = 2;
  c.rho_a = 0.6;
  c.norm_a_minus_i = 1.2;
  const Eigen::MatrixXd m = assemble_M(2e-3, 0.5, c);
  for (auto _ : state) {
    benchmark::DoNotOptimize(spectral_radius(m));
  }
}

void BM_ForwardDifference(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(9);
  const Eigen::VectorXd center = rng.normal_vector(n);
  auto f = [&center](const Eigen::VectorXd& x) { return 0.5 * (x - center).squaredNorm(); };
  const Eigen::VectorXd x = rng.normal_vector(n);
  Rng draw(10);
  for (auto _ : state) {
    const Eigen::VectorXd u = draw.normal_vector(n);
    benchmark::DoNotOptimize(forward_difference_oracle(f, x, u, 1e-3, u).data());
  }
}

}  // namespace

BENCHMARK_CAPTURE(BM_SolverStep, argfree, argfree::Algorithm::argfree)->Arg(5)->Arg(20)->Arg(50);
BENCHMARK_CAPTURE(BM_SolverStep, argfree_em, argfree::Algorithm::argfree_em)->Arg(5)->Arg(20);
BENCHMARK_CAPTURE(BM_SolverStep, baseline, argfree::Algorithm::exact_gradient_baseline)->Arg(5);
BENCHMARK(BM_GraphValidate)->Arg(5)->Arg(50);
BENCHMARK(BM_StationaryCovariance)->Arg(2)->Arg(8);
BENCHMARK(BM_SpectralRadius);
BENCHMARK(BM_ForwardDifference)->Arg(2)->Arg(16);

BENCHMARK_MAIN();
