#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "argfree/harness.hpp"

using namespace argfree;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.problem.n_agents = 3;
  cfg.problem.dim = 2;
  cfg.problem.gamma = 2.0;
  cfg.problem.seed = 5;
  cfg.graph.n = 3;
  cfg.graph.p = 0.8;
  cfg.graph.seed = 5;
  cfg.solver.algorithm = Algorithm::argfree;
  cfg.solver.alpha = 0.01;
  cfg.solver.delta = 0.1;
  cfg.solver.k_max = 20;
  cfg.solver.record_every = 5;
  cfg.solver.seed = 11;
  cfg.solver.warn_on_theory_violation = false;
  cfg.n_monte_carlo = 3;
  cfg.output_dir = out_dir;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ARGFREE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("experiment config json round trip") {
  ExperimentConfig cfg = tiny_config("roundtrip_out");
  cfg.solver.algorithm = Algorithm::argfree_em;
  cfg.solver.exploration.mode = ExplorationProcess::Mode::momentum;
  cfg.solver.exploration.kappa = 0.95;
  cfg.solver.exploration.sigma_v_scale = 0.0975;
  cfg.noise_cov_scale = 0.2;
  cfg.output_format = OutputFormat::json;

  const std::string text = cfg.to_json_text();
  const ExperimentConfig back = ExperimentConfig::from_json_text(text);
  CHECK(back.to_json_text() == text);
}

TEST_CASE("malformed configs raise ConfigError") {
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{ nope"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{\"n_monte_carlo\": 0}"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{\"output_format\": \"yaml\"}"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_file("does_not_exist.json"), ConfigError);
}

TEST_CASE("relative loss normalization") {
  RunTrace trace;
  for (int k = 0; k <= 2; ++k) {
    TraceRow row;
    row.k = k;
    row.x = Eigen::VectorXd::Zero(1);
    row.loss = 5.0 - 2.0 * k;  // 5, 3, 1
    row.theta = Eigen::VectorXd::Zero(5);
    trace.rows.push_back(row);
  }
  const std::vector<double> rel = relative_loss(trace, 1.0);
  CHECK(rel[0] == 1.0);
  CHECK(rel[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(rel[2] == 0.0);

  trace.rows[0].loss = 1.0;
  CHECK_THROWS_AS(relative_loss(trace, 1.0), std::invalid_argument);
}

TEST_CASE("trace export and parse round trip") {
  fs::create_directories("harness_tmp");
  const ExperimentConfig cfg = tiny_config("harness_tmp/rt");
  const AggregativeProblem p = cfg.problem.build();
  const WeightedDigraph g = cfg.graph.build();
  const RunTrace trace = run(p, g, cfg.solver);

  const std::string path = "harness_tmp/trace_rt.csv";
  export_trace(trace, path, OutputFormat::csv);
  const RunTrace back = parse_trace(path);
  REQUIRE(back.rows.size() == trace.rows.size());
  CHECK(back.local_dims == trace.local_dims);
  for (std::size_t r = 0; r < trace.rows.size(); ++r) {
    CHECK(back.rows[r].k == trace.rows[r].k);
    CHECK(back.rows[r].x == trace.rows[r].x);  // %.17g round-trips doubles
    CHECK(back.rows[r].loss == trace.rows[r].loss);
    CHECK(back.rows[r].loss_evals == trace.rows[r].loss_evals);
    for (int t = 0; t < 5; ++t) {
      const double a = back.rows[r].theta(t), b = trace.rows[r].theta(t);
      CHECK(((std::isnan(a) && std::isnan(b)) || a == b));
    }
  }

  const std::string jpath = "harness_tmp/trace_rt.json";
  export_trace(trace, jpath, OutputFormat::json);
  const RunTrace jback = parse_trace(jpath);
  REQUIRE(jback.rows.size() == trace.rows.size());
  CHECK(jback.rows.back().x == trace.rows.back().x);
}

TEST_CASE("csv header carries one column per coordinate") {
  const FormationSpec spec = random_formation_spec(5, 2, 2.0, 0.0, 10.0, 9);
  const AggregativeProblem p = spec.make_problem();
  const WeightedDigraph g = erdos_renyi(5, 0.6, 9);
  SolverConfig sc;
  sc.k_max = 0;
  sc.alpha = 0.01;
  sc.delta = 0.1;
  sc.warn_on_theory_violation = false;
  const RunTrace trace = run(p, g, sc);

  fs::create_directories("harness_tmp");
  export_trace(trace, "harness_tmp/h.csv", OutputFormat::csv);
  std::ifstream in("harness_tmp/h.csv");
  std::string header, row, extra;
  REQUIRE(std::getline(in, header));
  REQUIRE(std::getline(in, row));
  CHECK_FALSE(std::getline(in, extra));  // k_max = 0: header + single row

  CHECK(header.find("x_0_0") != std::string::npos);
  CHECK(header.find("x_4_1") != std::string::npos);
  CHECK(header.find("x_5_0") == std::string::npos);
  long commas = std::count(header.begin(), header.end(), ',');
  // k + 10 coords + loss + grad_norm + 5 theta + 2 counters = 20 fields
  CHECK(commas == 20 - 1);
}

TEST_CASE("run_experiment is a pure function of its config") {
  const ExperimentConfig a = tiny_config("harness_tmp/exp_a");
  const ExperimentConfig b = tiny_config("harness_tmp/exp_b");
  const ExperimentResult ra = run_experiment(a);
  const ExperimentResult rb = run_experiment(b);
  REQUIRE(ra.trace_paths.size() == rb.trace_paths.size());
  for (std::size_t i = 0; i < ra.trace_paths.size(); ++i) {
    CHECK(slurp(ra.trace_paths[i]) == slurp(rb.trace_paths[i]));
  }
  CHECK(slurp(ra.stats_path) == slurp(rb.stats_path));
}

TEST_CASE("run_experiment single run, zero iterations") {
  ExperimentConfig cfg = tiny_config("harness_tmp/exp_zero");
  cfg.n_monte_carlo = 1;
  cfg.solver.k_max = 0;
  const ExperimentResult res = run_experiment(cfg);
  REQUIRE(res.traces.size() == 1);
  CHECK(res.traces[0].rows.size() == 1);
  CHECK(res.stats.ks.size() == 1);
  CHECK(res.stats.std_rel_loss[0] == 0.0);  // single run: zero dispersion
  CHECK(res.stats.mean_rel_loss[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("aggregated statistics match an independent recomputation") {
  ExperimentConfig cfg = tiny_config("harness_tmp/exp_stats");
  const ExperimentResult res = run_experiment(cfg);

  const AggregativeProblem p = cfg.problem.build();
  const double f_star = *p.analytic().f_star;

  std::vector<RunTrace> reread;
  for (const std::string& path : res.trace_paths) reread.push_back(parse_trace(path));
  const std::size_t n_rows = reread.front().rows.size();
  for (std::size_t row = 0; row < n_rows; ++row) {
    double mean = 0.0;
    for (const RunTrace& t : reread) {
      mean += (t.rows[row].loss - f_star) / (t.rows[0].loss - f_star);
    }
    mean /= reread.size();
    double var = 0.0;
    for (const RunTrace& t : reread) {
      const double rl = (t.rows[row].loss - f_star) / (t.rows[0].loss - f_star);
      var += (rl - mean) * (rl - mean);
    }
    const double sd = std::sqrt(var / reread.size());
    CHECK(std::abs(res.stats.mean_rel_loss[row] - mean) <= 1e-12 * (1.0 + std::abs(mean)));
    CHECK(std::abs(res.stats.std_rel_loss[row] - sd) <= 1e-12 * (1.0 + sd));
  }
}

TEST_CASE("replica aborts surface the offending seed") {
  ExperimentConfig cfg = tiny_config("harness_tmp/exp_abort");
  cfg.solver.alpha = 1e14;
  bool caught = false;
  try {
    run_experiment(cfg);
  } catch (const SolverAbort& e) {
    caught = true;
    CHECK(std::string(e.what()).find("seed") != std::string::npos);
  }
  CHECK(caught);
}

TEST_CASE("momentum sweep at matched stationary variance favors memory") {
  ExperimentConfig cfg = tiny_config("harness_tmp/exp_kappa");
  cfg.problem.n_agents = 5;
  cfg.problem.seed = 42;
  cfg.graph.n = 5;
  cfg.graph.p = 0.6;
  cfg.graph.seed = 42;
  cfg.solver.algorithm = Algorithm::argfree_em;
  cfg.solver.alpha = 2e-3;
  cfg.solver.delta = 1e-5;
  cfg.solver.k_max = 20000;
  cfg.solver.record_every = 2000;
  cfg.n_monte_carlo = 10;

  const auto rows = sweep(cfg, "momentum_kappa", {0.0, 0.5, 0.9});
  REQUIRE(rows.size() == 3);
  // terminal error non-increasing in kappa, with a little Monte Carlo slack
  CHECK(rows[1].mean_terminal_x_err <= rows[0].mean_terminal_x_err * 1.1);
  CHECK(rows[2].mean_terminal_x_err <= rows[1].mean_terminal_x_err * 1.1);
  CHECK(rows[2].mean_terminal_x_err < rows[0].mean_terminal_x_err);

  ExperimentConfig wrong = cfg;
  wrong.solver.algorithm = Algorithm::argfree;
  CHECK_THROWS_AS(sweep(wrong, "momentum_kappa", {0.5}), ConfigError);
}

TEST_CASE("sweep rows and validation") {
  ExperimentConfig cfg = tiny_config("harness_tmp/exp_sweep");
  cfg.n_monte_carlo = 2;
  cfg.solver.k_max = 10;
  const auto rows = sweep(cfg, "delta", {0.1});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].value == 0.1);
  CHECK(std::isfinite(rows[0].mean_terminal_rel_loss));
  CHECK(fs::exists("harness_tmp/exp_sweep/sweep.csv"));

  CHECK_THROWS_AS(sweep(cfg, "bogus", {0.1}), ConfigError);
  CHECK_THROWS_AS(sweep(cfg, "delta", {}), ConfigError);
}

TEST_CASE("noise wrapping goes to the solver but not the diagnostics") {
  ExperimentConfig cfg = tiny_config("harness_tmp/exp_noise");
  cfg.noise_cov_scale = 0.2;
  cfg.n_monte_carlo = 2;
  cfg.solver.k_max = 30;
  cfg.solver.delta = 0.5;
  const ExperimentResult res = run_experiment(cfg);
  // the recorded loss column comes from the clean problem: finite, and the
  // k = 0 relative loss is exactly one
  CHECK(res.stats.mean_rel_loss[0] == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : res.stats.mean_rel_loss) CHECK(std::isfinite(v));
}

TEST_CASE("cli exit codes: success, config error, numerical abort") {
  fs::create_directories("harness_tmp");

  CHECK(run_cli("graph --n 4 --p 0.9 --seed 3 --out harness_tmp/cli_graph.json") == 0);
  CHECK(fs::exists("harness_tmp/cli_graph.json"));

  // a stored graph overrides generation; n = 4 here vs n = 3 in the config,
  // so the run only works because the 4-node file wins
  ExperimentConfig with_file = tiny_config("harness_tmp/cli_gf");
  with_file.problem.n_agents = 4;
  with_file.n_monte_carlo = 1;
  {
    std::ofstream out("harness_tmp/cli_gf.json");
    out << with_file.to_json_text();
  }
  CHECK(run_cli("run harness_tmp/cli_gf.json --graph-file harness_tmp/cli_graph.json") == 0);

  ExperimentConfig ok = tiny_config("harness_tmp/cli_run");
  ok.n_monte_carlo = 1;
  {
    std::ofstream out("harness_tmp/cli_ok.json");
    out << ok.to_json_text();
  }
  CHECK(run_cli("run harness_tmp/cli_ok.json") == 0);
  CHECK(run_cli("certify harness_tmp/cli_ok.json") == 0);
  CHECK(run_cli("sweep harness_tmp/cli_ok.json --param delta --values 0.1,0.2") == 0);

  CHECK(run_cli("run harness_tmp/missing.json") == 1);
  {
    std::ofstream out("harness_tmp/cli_bad.json");
    out << "{\"output_format\": \"yaml\"}";
  }
  CHECK(run_cli("run harness_tmp/cli_bad.json") == 1);

  ExperimentConfig diverge = tiny_config("harness_tmp/cli_diverge");
  diverge.solver.alpha = 1e14;
  diverge.n_monte_carlo = 1;
  {
    std::ofstream out("harness_tmp/cli_div.json");
    out << diverge.to_json_text();
  }
  CHECK(run_cli("run harness_tmp/cli_div.json") == 2);
}
