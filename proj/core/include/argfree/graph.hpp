#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace argfree {

// Validation summary for a communication topology. rho_a is the operator
// norm of A - J with J = (1/N) * ones * ones^T; it measures the averaging
// speed of the network and must be < 1 for the tracking recursions to
// contract. norm_a_minus_i is the operator norm of A - I.
struct GraphReport {
  bool doubly_stochastic = false;
  bool strongly_connected = false;
  double rho_a = 0.0;
  double norm_a_minus_i = 0.0;

  bool ok() const { return doubly_stochastic && strongly_connected && rho_a < 1.0; }
};

// N-agent communication topology with weight matrix A. Entry a_ij > 0 means
// agent i receives values from agent j. Construction enforces only shape,
// finiteness and non-negativity; the doubly stochastic / strong connectivity
// contract that generated graphs satisfy is checked by validate(), so that
// user-supplied matrices can be inspected without being rejected up front.
// Immutable after construction; safe to share across threads.
class WeightedDigraph {
 public:
  explicit WeightedDigraph(Eigen::MatrixXd weights);

  int n_agents() const { return static_cast<int>(weights_.rows()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  bool has_edge(int to, int from) const { return weights_(to, from) > 0.0; }

  // {"n": N, "weights": row-major array}
  std::string to_json() const;
  static WeightedDigraph from_json(const std::string& text);
  static WeightedDigraph load(const std::string& path);
  void save(const std::string& path) const;

 private:
  Eigen::MatrixXd weights_;
};

// Metropolis weights for a symmetric 0/1 adjacency matrix:
//   a_ij = 1 / (1 + max(deg_i, deg_j))   for edges i != j,
//   a_ii = 1 - sum_{j != i} a_ij.
// The result is symmetric doubly stochastic with positive diagonal.
// Diagonal entries of the input are ignored (self-loops are implied).
Eigen::MatrixXd metropolis_weights(const Eigen::MatrixXd& undirected_adjacency);

// Undirected Erdos-Renyi sample with Metropolis weights, resampled until
// connected (at most 1000 attempts before failing, which signals that
// edge_prob is too small for n_agents). Deterministic for a fixed seed.
WeightedDigraph erdos_renyi(int n_agents, double edge_prob, std::uint64_t seed);

GraphReport validate(const WeightedDigraph& g);

// Euclidean norm of the deviation of each block from the block average,
// i.e. ||v - (ones kron I_d) vbar|| for v made of n_blocks stacked blocks.
double consensus_gap(const Eigen::VectorXd& stacked, int n_blocks);

}  // namespace argfree
