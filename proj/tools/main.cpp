// Command-line front end: run experiments, evaluate convergence
// certificates, sweep parameters and generate communication graphs.
//
//   argfree run <config.json>
//   argfree certify <config.json>
//   argfree sweep <config.json> --param delta --values 1e-4,5e-5,2.5e-5
//   argfree graph --n 5 --p 0.6 --seed 42 --out graph.json
//
// Exit codes: 0 success, 1 configuration error, 2 numerical abort.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "argfree/harness.hpp"
#include "argfree/smoothing.hpp"

namespace {

using namespace argfree;

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> values;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  if (values.empty()) throw ConfigError("--values: expected a comma-separated list");
  return values;
}

int cmd_run(const std::string& config_path, const std::string& out_override,
            const std::string& graph_file) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (!graph_file.empty()) cfg.graph.file = graph_file;
  const ExperimentResult result = run_experiment(cfg);
  for (const std::string& w : result.traces.front().warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  std::cout << "algorithm:            " << to_string(cfg.solver.algorithm) << "\n"
            << "runs:                 " << result.stats.n_runs << "\n"
            << "normalization:        " << result.stats.normalization << "\n"
            << "terminal mean loss:   " << result.stats.terminal_mean_rel_loss() << "\n"
            << "terminal mean x err:  " << result.stats.terminal_mean_x_err() << "\n"
            << "stats file:           " << result.stats_path << "\n";
  return 0;
}

int cmd_certify(const std::string& config_path) {
  const ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  const AggregativeProblem problem = cfg.problem.build();
  const WeightedDigraph graph = cfg.graph.build();
  const TheoryConstants constants = theory_constants(problem, validate(graph));

  double e_du_sq = 2.0 * constants.n;  // iid exploration
  const ExplorationSpec& ex = cfg.solver.exploration;
  if (cfg.solver.algorithm == Algorithm::argfree_em &&
      ex.mode == ExplorationProcess::Mode::momentum && ex.kappa) {
    const double kappa = *ex.kappa;
    const Eigen::MatrixXd b = kappa * Eigen::MatrixXd::Identity(constants.n, constants.n);
    const Eigen::MatrixXd sv =
        ex.sigma_v_scale * Eigen::MatrixXd::Identity(constants.n, constants.n);
    const Eigen::MatrixXd sigma = stationary_covariance(b, sv);
    const Eigen::MatrixXd bmi = b - Eigen::MatrixXd::Identity(constants.n, constants.n);
    e_du_sq = (bmi.transpose() * sigma * bmi + sv).trace();
  }
  const Certificate cert = make_certificate(constants, cfg.solver.alpha, cfg.solver.delta, e_du_sq);
  std::cout << cert.to_json() << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& param,
              const std::string& values_csv) {
  const ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  const std::vector<double> values = parse_values(values_csv);
  const auto rows = sweep(cfg, param, values);
  std::printf("%-16s %-22s %-22s\n", param.c_str(), "mean terminal ||x-x*||",
              "mean terminal rel loss");
  for (const SweepRow& row : rows) {
    std::printf("%-16.8g %-22.10g %-22.10g\n", row.value, row.mean_terminal_x_err,
                row.mean_terminal_rel_loss);
  }
  return 0;
}

int cmd_graph(int n, double p, std::uint64_t seed, const std::string& out_path) {
  const WeightedDigraph g = erdos_renyi(n, p, seed);
  const GraphReport report = validate(g);
  if (out_path.empty()) {
    std::cout << g.to_json() << "\n";
  } else {
    g.save(out_path);
  }
  std::cerr << "n=" << g.n_agents() << " rho_a=" << report.rho_a
            << " ||A-I||=" << report.norm_a_minus_i
            << " doubly_stochastic=" << (report.doubly_stochastic ? "yes" : "no")
            << " strongly_connected=" << (report.strongly_connected ? "yes" : "no") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradient-free aggregative optimization simulator"};
  app.require_subcommand(1);

  std::string config_path, out_override, param, values_csv, graph_out, graph_file;
  int graph_n = 5;
  double graph_p = 0.6;
  std::uint64_t graph_seed = 1;

  CLI::App* run_cmd = app.add_subcommand("run", "run an experiment from a config file");
  run_cmd->add_option("config", config_path, "experiment config (json)")->required();
  run_cmd->add_option("--out", out_override, "override the output directory");
  run_cmd->add_option("--graph-file", graph_file,
                      "load the graph from a json file instead of generating it");

  CLI::App* certify_cmd =
      app.add_subcommand("certify", "print the convergence certificate as json");
  certify_cmd->add_option("config", config_path, "experiment config (json)")->required();

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run one experiment per parameter value");
  sweep_cmd->add_option("config", config_path, "experiment config (json)")->required();
  sweep_cmd->add_option("--param", param, "delta | alpha | momentum_kappa")->required();
  sweep_cmd->add_option("--values", values_csv, "comma-separated values")->required();

  CLI::App* graph_cmd = app.add_subcommand("graph", "generate a communication graph");
  graph_cmd->add_option("--n", graph_n, "number of agents");
  graph_cmd->add_option("--p", graph_p, "edge probability");
  graph_cmd->add_option("--seed", graph_seed, "generator seed");
  graph_cmd->add_option("--out", graph_out, "output file (stdout when omitted)");

  try {
    app.parse(argc, argv);
    if (run_cmd->parsed()) return cmd_run(config_path, out_override, graph_file);
    if (certify_cmd->parsed()) return cmd_certify(config_path);
    if (sweep_cmd->parsed()) return cmd_sweep(config_path, param, values_csv);
    if (graph_cmd->parsed()) return cmd_graph(graph_n, graph_p, graph_seed, graph_out);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const SolverAbort& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
