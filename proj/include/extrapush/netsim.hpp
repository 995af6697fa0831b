#pragma once

// Synchronous message-passing execution of ExtraPush. Every agent holds only
// its own rows and its in-neighbour weights; mixing happens through messages
// delivered between rounds.

#include "extrapush/graph.hpp"
#include "extrapush/objective.hpp"
#include "extrapush/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace extrapush {

/// One directed payload. The sender pre-multiplies by the receiver's weight
/// A_ij, so receivers only add.
struct RoundMessage {
  std::size_t round = 0;
  std::size_t sender = 0;
  std::size_t receiver = 0;
  double w = 0.0;   ///< A_ij w_j
  Vector z;         ///< A_ij z_(j), length p
};

struct AgentState {
  std::size_t id = 0;
  Vector z;
  double w = 1.0;
  Vector x;
  Vector grad;
  /// Own rows of the running correction sum_k (A_bar - A) z^k, built from z_(i)
  /// and the received sum_j A_ij z_(j); no second broadcast is needed.
  Vector y;
  std::vector<std::size_t> out_neighbors;
  /// (j, A_ij) for j in N_i^in, ascending j, including j = i.
  std::vector<std::pair<std::size_t, double>> in_weights;
};

struct NetsimOptions {
  /// extrapush or normalized-extrapush.
  Algorithm algorithm = Algorithm::extrapush;
  double alpha = 0.1;
  std::size_t rounds = 100;
  /// Optional CSV message log: round,sender,receiver,w,z_hash.
  std::filesystem::path message_log;
};

/// Reads of other agents' data, counted by the simulator. Anything outside
/// "own state" and "current-round message from an in-neighbour" is a violation.
struct LocalityReport {
  std::size_t own_reads = 0;
  std::size_t message_reads = 0;
  std::size_t violations = 0;
};

struct NetsimResult {
  /// x^t for t = 0..rounds, agent i in row i.
  std::vector<Matrix> x_history;
  Matrix z;
  Vector w;
  std::size_t rounds = 0;
  std::size_t messages = 0;
  LocalityReport locality;
};

/// Requires A consistent with g: A_ij > 0 exactly when j in N_i^in.
/// For normalized-extrapush, s supplies D; for extrapush it is ignored.
NetsimResult simulate_extrapush(const DirectedGraph& g, const MixingMatrix& a,
                                const StationaryDistribution* s, const Objective& obj,
                                const NetsimOptions& options, const Matrix& z0);

/// w^0 .. w^rounds of push-sum alone.
std::vector<Vector> simulate_push_sum(const DirectedGraph& g, const MixingMatrix& a,
                                      const Vector& w0, std::size_t rounds);

/// rounds * |E| (self-loops carry no message).
std::size_t message_count(const DirectedGraph& g, std::size_t rounds);

/// FNV-1a over the raw bytes of v.
std::uint64_t fnv1a(const Vector& v);

}  // namespace extrapush
