#pragma once

// Directed networks, column-stochastic mixing matrices and the spectral facts
// the algorithms rely on: A^t -> phi 1^T, A phi = phi, and the positivity of
// the push-sum weights A^t 1.

#include "extrapush/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace extrapush {

/// Directed graph on nodes [0, n). Self-loops are implicit: every node is its
/// own in- and out-neighbour, so edge lists never contain (i, i).
class DirectedGraph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;  // (from, to)

  explicit DirectedGraph(std::size_t n, std::vector<Edge> edges = {});

  std::size_t size() const { return n_; }
  /// Edges sorted by (from, to); no duplicates, no self-loops.
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }

  /// N_i^in, ascending, including i itself.
  const std::vector<std::size_t>& in_neighbors(std::size_t i) const { return in_[i]; }
  /// N_i^out, ascending, including i itself.
  const std::vector<std::size_t>& out_neighbors(std::size_t i) const { return out_[i]; }
  std::size_t out_degree(std::size_t i) const { return out_[i].size(); }

 private:
  std::size_t n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> in_;
  std::vector<std::vector<std::size_t>> out_;
};

/// Column-stochastic A together with A_bar = (I + A) / 2.
struct MixingMatrix {
  Matrix a;
  Matrix a_bar;

  explicit MixingMatrix(Matrix a_in);
  std::size_t size() const { return static_cast<std::size_t>(a.rows()); }
};

/// Perron vector of A and the scaling D = n diag(phi) used by Normalized ExtraPush.
struct StationaryDistribution {
  Vector phi;
  Vector d;      ///< diagonal of D
  Vector d_inv;  ///< diagonal of D^-1
  std::size_t iterations = 0;

  explicit StationaryDistribution(Vector phi_in, std::size_t iterations_used = 0);
  std::size_t size() const { return static_cast<std::size_t>(phi.size()); }
};

struct MatrixViolation {
  enum class Kind { not_square, non_finite, negative_entry, column_sum };
  Kind kind;
  std::size_t row = 0;
  std::size_t column = 0;
  double deviation = 0.0;  ///< signed column sum minus 1, or the offending entry

  std::string describe() const;
};

/// A_ij = 1 / d_j for j in N_i^in, 0 otherwise.
MixingMatrix build_out_degree_mixing(const DirectedGraph& g);

std::vector<MatrixViolation> validate_column_stochastic(const Matrix& m,
                                                        double tol = Tolerances::load);

/// Reads n rows of n whitespace-separated decimals and validates them.
MixingMatrix load_mixing(const std::filesystem::path& path);
MixingMatrix parse_mixing(const std::string& text);
void save_mixing(const MixingMatrix& m, const std::filesystem::path& path);

/// Graph file: first line n, then one "i j" pair per directed edge, 0-indexed.
DirectedGraph load_graph(const std::filesystem::path& path);
DirectedGraph parse_graph(const std::string& text);

/// Graph whose edges are the off-diagonal positive entries of A (A_ij > 0 means j -> i).
DirectedGraph support_graph(const Matrix& a);

bool is_strongly_connected(const DirectedGraph& g);

/// Power iteration of A on the uniform vector (the push-sum limit w^t / n).
StationaryDistribution stationary_distribution(const MixingMatrix& m,
                                               double tol = 1e-15,
                                               std::size_t max_power = 100000);

struct ProfilePoint {
  std::size_t t;
  double deviation;  ///< ||A^t - phi 1^T||_F
};
std::vector<ProfilePoint> power_convergence_profile(const MixingMatrix& m,
                                                    const StationaryDistribution& s,
                                                    std::size_t t_max);

/// min over t in [1, t_max] of min_i (A^t 1)_i.
double xi_diagnostic(const MixingMatrix& m, std::size_t t_max = 200);

struct NullSpaceResiduals {
  double mixing;      ///< ||(I - A) z||
  double stationary;  ///< ||(I - phi 1^T) z||
  double max() const { return mixing > stationary ? mixing : stationary; }
};
NullSpaceResiduals null_space_residuals(const MixingMatrix& m, const Vector& phi, const Matrix& z);
double null_space_check(const MixingMatrix& m, const Vector& phi, const Matrix& z);

/// The five-node example network used in the experiments.
DirectedGraph paper_fig1_graph();
/// Its printed mixing matrix, entered as exact rationals.
Matrix paper_fig1_matrix();

DirectedGraph complete_digraph(std::size_t n);
/// Directed ring over a random permutation plus each other arc with probability
/// extra_edge_probability; strongly connected by construction.
DirectedGraph random_strongly_connected(std::size_t n, double extra_edge_probability,
                                        std::uint64_t seed);

}  // namespace extrapush
