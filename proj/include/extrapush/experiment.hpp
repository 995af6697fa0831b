#pragma once

// Seeded least-squares and Huber instances at the experiment's dimensions,
// with ground truth and a matching starting point, plus a JSON container.

#include "extrapush/objective.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

namespace extrapush {

enum class ProblemKind { least_squares, huber };

std::string to_string(ProblemKind kind);
ProblemKind parse_problem_kind(const std::string& s);

struct GeneratorOptions {
  ProblemKind kind = ProblemKind::least_squares;
  std::size_t n = 5;
  std::size_t p = 256;
  std::size_t m = 100;  ///< rows per agent
  std::uint64_t seed = 1;
  double xi = 2.0;      ///< Huber threshold
  /// Huber only: every residual of x0_(i) is r*_j + depth * xi * sign(r*_j).
  double l1_depth = 100.0;
  /// Least squares only: amplitude of the uniform noise added to B x_true.
  double noise = 0.1;
};

struct ExperimentInstance {
  ProblemKind kind = ProblemKind::least_squares;
  std::uint64_t seed = 0;
  double xi = 2.0;
  double l1_depth = 0.0;
  LeastSquaresData data;
  Vector x_star;   ///< ground-truth minimiser of sum_i f_i
  Matrix x0;       ///< n x p starting point; zero for least squares
  bool rank_deficient = false;

  std::size_t agents() const { return data.agents(); }
  std::size_t dimension() const { return data.dimension(); }
  /// 1 x*^T, the consensual optimum in stacked form.
  Matrix stacked_optimum() const;
};

/// Deterministic in (options): the same options give bit-identical instances.
///
/// Entries of B_(i) are uniform with variance 1/m_i. For Huber, noise is
/// rescaled so every residual at x* lies in [-0.8 xi, 0.8 xi] (x* is then also
/// the least-squares solution), and agent i starts at x* + d_i where d_i is the
/// min-norm solution of B_(i) d_i = depth * xi * sign(r*_(i)), which puts each
/// of its residuals at least depth * xi >= 1.2 xi deep in the linear zone.
ExperimentInstance generate_experiment(const GeneratorOptions& options);

std::unique_ptr<Objective> make_objective(const ExperimentInstance& inst);

/// Residuals B_(i) x - b_(i) of one agent.
Vector agent_residuals(const LeastSquaresData& d, std::size_t agent, const Vector& x);

void save_instance(const ExperimentInstance& inst, const std::filesystem::path& path);
ExperimentInstance load_instance(const std::filesystem::path& path);

}  // namespace extrapush
