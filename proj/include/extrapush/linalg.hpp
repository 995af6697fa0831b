#pragma once

#include "extrapush/common.hpp"

namespace extrapush {

/// Eigenvalues of a symmetric matrix, ascending. Only the lower triangle is read.
Vector symmetric_eigenvalues(const Matrix& symmetric);

/// Smallest eigenvalue of a PSD matrix that is not numerically zero, where
/// zero means below Tolerances::relative_zero_eigenvalue * lambda_max.
/// Returns 0 when every eigenvalue is zero.
double smallest_nonzero_eigenvalue(const Matrix& psd);

struct MinNormSolution {
  Matrix x;
  Eigen::Index rank = 0;
  bool rank_deficient = false;
};

/// Minimum-norm least-squares solution of lhs * x = rhs (pseudo-inverse applied to rhs).
MinNormSolution min_norm_solve(const Matrix& lhs, const Matrix& rhs);

}  // namespace extrapush
