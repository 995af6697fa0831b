#include "extrapush/linalg.hpp"

#include <algorithm>

namespace extrapush {

Vector symmetric_eigenvalues(const Matrix& symmetric) {
  require(symmetric.rows() == symmetric.cols(), "symmetric_eigenvalues: matrix must be square");
  if (symmetric.rows() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd(symmetric),
                                                        Eigen::EigenvaluesOnly);
  require(solver.info() == Eigen::Success, "symmetric eigensolver failed to converge");
  return solver.eigenvalues();
}

double smallest_nonzero_eigenvalue(const Matrix& psd) {
  const Vector ev = symmetric_eigenvalues(psd);
  if (ev.size() == 0) return 0.0;
  const double top = ev.maxCoeff();
  if (top <= 0.0) return 0.0;
  const double cut = Tolerances::relative_zero_eigenvalue * top;
  for (Eigen::Index k = 0; k < ev.size(); ++k)
    if (ev[k] > cut) return ev[k];
  return 0.0;
}

MinNormSolution min_norm_solve(const Matrix& lhs, const Matrix& rhs) {
  require(lhs.rows() == rhs.rows(), "min_norm_solve: row mismatch");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(lhs);
  cod.setThreshold(Tolerances::relative_zero_eigenvalue);
  MinNormSolution out;
  out.x = cod.solve(Eigen::MatrixXd(rhs));
  out.rank = cod.rank();
  out.rank_deficient = out.rank < std::min(lhs.rows(), lhs.cols());
  return out;
}

}  // namespace extrapush
