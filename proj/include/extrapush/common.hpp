#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace extrapush {

/// Dense row-major storage. Row i of a stacked iterate is agent i's local copy.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Numerical thresholds shared by every module.
struct Tolerances {
  /// Exact algebraic identities (column sums, D * D^-1, row sums of A_phi).
  static constexpr double exact = 1e-12;
  /// Limits reached by iteration (stationary distribution, push-sum weights).
  static constexpr double iterative = 1e-10;
  /// Column-sum slack accepted when loading a matrix from text.
  static constexpr double load = 1e-9;
  /// Symmetry / double stochasticity slack for the Extra baseline.
  static constexpr double doubly_stochastic = 1e-9;
  /// Push-sum weight floor; anything lower means the matrix is broken.
  static constexpr double weight_floor = 1e-14;
  /// Eigenvalues below this fraction of lambda_max count as zero.
  static constexpr double relative_zero_eigenvalue = 1e-10;
};

/// Thrown for contract violations on inputs (bad files, shapes, parameters).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

}  // namespace extrapush
