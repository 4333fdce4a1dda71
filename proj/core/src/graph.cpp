#include "argfree/graph.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "argfree/rng.hpp"

namespace argfree {

namespace {

// Largest singular value by power iteration on m^T m. Started from a fixed
// pseudo-random direction so components orthogonal to the ones vector are
// present even when ones lies in the null space (as for A - J).
double operator_norm(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.cols());
  if (n == 0) return 0.0;
  const Eigen::MatrixXd gram = m.transpose() * m;
  Rng rng(0x6772616d);
  Eigen::VectorXd v = rng.normal_vector(n).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double next = v.dot(w);
    v = w / norm;
    if (it > 0 && std::abs(next - lambda) <= 1e-14 * std::max(1.0, std::abs(next))) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

bool reachable_all(const Eigen::MatrixXd& a, bool transpose) {
  const int n = static_cast<int>(a.rows());
  std::vector<char> seen(n, 0);
  std::vector<int> stack = {0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int j = 0; j < n; ++j) {
      const double w = transpose ? a(j, i) : a(i, j);
      if (w > 0.0 && !seen[j]) {
        seen[j] = 1;
        ++count;
        stack.push_back(j);
      }
    }
  }
  return count == n;
}

bool undirected_connected(const Eigen::MatrixXd& adj) { return reachable_all(adj, false); }

}  // namespace

WeightedDigraph::WeightedDigraph(Eigen::MatrixXd weights) : weights_(std::move(weights)) {
  if (weights_.rows() != weights_.cols() || weights_.rows() < 1) {
    throw std::invalid_argument("WeightedDigraph: weight matrix must be square and non-empty");
  }
  if (!weights_.allFinite()) {
    throw std::invalid_argument("WeightedDigraph: weight matrix has non-finite entries");
  }
  if ((weights_.array() < 0.0).any()) {
    throw std::invalid_argument("WeightedDigraph: weights must be non-negative");
  }
}

std::string WeightedDigraph::to_json() const {
  nlohmann::json j;
  j["n"] = n_agents();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(weights_.size()));
  for (int i = 0; i < weights_.rows(); ++i)
    for (int k = 0; k < weights_.cols(); ++k) flat.push_back(weights_(i, k));
  j["weights"] = flat;
  return j.dump(2);
}

WeightedDigraph WeightedDigraph::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const int n = j.at("n").get<int>();
  const auto flat = j.at("weights").get<std::vector<double>>();
  if (n < 1 || flat.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    throw std::invalid_argument("graph json: weights length does not match n*n");
  }
  Eigen::MatrixXd w(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) w(i, k) = flat[static_cast<std::size_t>(i) * n + k];
  return WeightedDigraph(std::move(w));
}

WeightedDigraph WeightedDigraph::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void WeightedDigraph::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write graph file: " + path);
  out << to_json() << "\n";
}

Eigen::MatrixXd metropolis_weights(const Eigen::MatrixXd& adj) {
  const int n = static_cast<int>(adj.rows());
  if (adj.rows() != adj.cols() || n < 1) {
    throw std::invalid_argument("metropolis_weights: adjacency must be square");
  }
  if (!adj.isApprox(adj.transpose(), 0.0)) {
    throw std::invalid_argument("metropolis_weights: adjacency must be symmetric");
  }
  Eigen::VectorXd deg = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && adj(i, j) != 0.0) deg(i) += 1.0;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i != j && adj(i, j) != 0.0) {
        a(i, j) = 1.0 / (1.0 + std::max(deg(i), deg(j)));
        off += a(i, j);
      }
    }
    a(i, i) = 1.0 - off;
  }
  return a;
}

WeightedDigraph erdos_renyi(int n_agents, double edge_prob, std::uint64_t seed) {
  if (n_agents < 2) throw std::invalid_argument("erdos_renyi: need at least 2 agents");
  if (!(edge_prob > 0.0 && edge_prob <= 1.0)) {
    throw std::invalid_argument("erdos_renyi: edge_prob must be in (0, 1]");
  }
  Rng rng = Rng::stream(seed, 0x6772, 0);
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n_agents, n_agents);
    for (int i = 0; i < n_agents; ++i) {
      for (int j = i + 1; j < n_agents; ++j) {
        if (rng.uniform() < edge_prob) {
          adj(i, j) = 1.0;
          adj(j, i) = 1.0;
        }
      }
    }
    if (undirected_connected(adj)) {
      return WeightedDigraph(metropolis_weights(adj));
    }
  }
  throw std::runtime_error(
      "erdos_renyi: no connected sample in 1000 attempts; edge_prob too small");
}

GraphReport validate(const WeightedDigraph& g) {
  const Eigen::MatrixXd& a = g.weights();
  const int n = g.n_agents();
  GraphReport report;

  constexpr double kTol = 1e-12;
  const Eigen::VectorXd row_sums = a.rowwise().sum();
  const Eigen::VectorXd col_sums = a.colwise().sum();
  report.doubly_stochastic = ((row_sums.array() - 1.0).abs() <= kTol).all() &&
                             ((col_sums.array() - 1.0).abs() <= kTol).all();
  report.strongly_connected = reachable_all(a, false) && reachable_all(a, true);

  const Eigen::MatrixXd j = Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  report.rho_a = operator_norm(a - j);
  report.norm_a_minus_i = operator_norm(a - Eigen::MatrixXd::Identity(n, n));
  return report;
}

double consensus_gap(const Eigen::VectorXd& stacked, int n_blocks) {
  if (n_blocks < 1 || stacked.size() % n_blocks != 0) {
    throw std::invalid_argument("consensus_gap: vector length not divisible by block count");
  }
  const int d = static_cast<int>(stacked.size()) / n_blocks;
  Eigen::Map<const Eigen::MatrixXd> blocks(stacked.data(), d, n_blocks);
  const Eigen::VectorXd mean = blocks.rowwise().mean();
  return (blocks.colwise() - mean).norm();
}

}  // namespace argfree
