#pragma once

// Per-round data-parallel kernels. Each has an OpenMP version used by the
// engines and a plain serial version in `reference` kept for testing and
// benchmarking. Every output entry is produced by the same sequence of
// floating-point operations in both, so results are bitwise identical
// regardless of thread count.

#include "extrapush/common.hpp"

namespace extrapush {

class Objective;

namespace kernels {

/// out = A * z, each entry accumulated over ascending column index.
void mix(const Matrix& a, const Matrix& z, Matrix& out);
/// out = A * w for a weight vector, ascending column index.
void mix(const Matrix& a, const Vector& w, Vector& out);

/// Step of Extra, ExtraPush and Normalized ExtraPush written with the running
/// correction y^t = sum_{k<=t} (A_bar - A) z^k:
///   out = (z + az) / 2 - alpha g - y
/// where az = A z^t, g = grad f(x^t), y = y^t. The two-step recursion is the
/// difference of two consecutive steps of this one. With A = [1] the
/// correction is exactly zero and the step is plain gradient descent.
void extra_step(const Matrix& z, const Matrix& az, const Matrix& y, const Matrix& g, double alpha,
                Matrix& out);

/// y += (z - az) / 2, i.e. y^t = y^{t-1} + (A_bar - A) z^t.
void update_correction(const Matrix& z, const Matrix& az, Matrix& y);

/// out = az - alpha * g (first round of the two-step methods and every subgradient-push round).
void gradient_step(const Matrix& az, const Matrix& g, double alpha, Matrix& out);

/// out_(i) = z_(i) / weights_i.
void normalize_rows(const Matrix& z, const Vector& weights, Matrix& out);

/// Row i = grad f_i(x_(i)).
void grad_stack(const Objective& obj, const Matrix& x, Matrix& out);

/// Scalar bodies of extra_step and update_correction, shared with the agent simulator.
inline double extra_step_entry(double z, double az, double y, double g, double alpha) {
  return 0.5 * (z + az) - alpha * g - y;
}
inline double correction_entry(double y, double z, double az) { return y + 0.5 * (z - az); }

}  // namespace kernels

namespace reference {

void mix(const Matrix& a, const Matrix& z, Matrix& out);
void mix(const Matrix& a, const Vector& w, Vector& out);
void extra_step(const Matrix& z, const Matrix& az, const Matrix& y, const Matrix& g, double alpha,
                Matrix& out);
void update_correction(const Matrix& z, const Matrix& az, Matrix& y);
void gradient_step(const Matrix& az, const Matrix& g, double alpha, Matrix& out);
void normalize_rows(const Matrix& z, const Vector& weights, Matrix& out);
void grad_stack(const Objective& obj, const Matrix& x, Matrix& out);

}  // namespace reference
}  // namespace extrapush
