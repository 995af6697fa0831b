#include "extrapush/kernels.hpp"

#include "extrapush/objective.hpp"

#include <span>

namespace extrapush {

namespace {

// Below this many entries the fork/join overhead dominates.
constexpr Eigen::Index kParallelThreshold = 2048;

std::span<const double> row_span(const Matrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}
std::span<double> row_span(Matrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline void mix_row(const Matrix& a, const Matrix& z, Matrix& out, Eigen::Index i) {
  const Eigen::Index n = a.cols(), p = z.cols();
  double* dst = out.data() + i * p;
  for (Eigen::Index c = 0; c < p; ++c) dst[c] = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double aij = a(i, j);
    if (aij == 0.0) continue;
    const double* src = z.data() + j * p;
    for (Eigen::Index c = 0; c < p; ++c) dst[c] += aij * src[c];
  }
}

inline double mix_entry(const Matrix& a, const Vector& w, Eigen::Index i) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double aij = a(i, j);
    if (aij == 0.0) continue;
    acc += aij * w[j];
  }
  return acc;
}

void check_mix_shapes(const Matrix& a, const Matrix& z) {
  require(a.rows() == a.cols() && a.cols() == z.rows(), "mix: shape mismatch");
}

}  // namespace

namespace kernels {

void mix(const Matrix& a, const Matrix& z, Matrix& out) {
  check_mix_shapes(a, z);
  out.resize(a.rows(), z.cols());
  const Eigen::Index n = a.rows();
#pragma omp parallel for schedule(static) if (n * z.cols() >= kParallelThreshold)
  for (Eigen::Index i = 0; i < n; ++i) mix_row(a, z, out, i);
}

void mix(const Matrix& a, const Vector& w, Vector& out) {
  require(a.cols() == w.size(), "mix: shape mismatch");
  Vector result(a.rows());
  const Eigen::Index n = a.rows();
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (Eigen::Index i = 0; i < n; ++i) result[i] = mix_entry(a, w, i);
  out = std::move(result);
}

void extra_step(const Matrix& z, const Matrix& az, const Matrix& y, const Matrix& g, double alpha,
                Matrix& out) {
  out.resize(z.rows(), z.cols());
  const Eigen::Index total = z.size();
  const double *pz = z.data(), *paz = az.data(), *py = y.data(), *pg = g.data();
  double* dst = out.data();
#pragma omp parallel for schedule(static) if (total >= kParallelThreshold)
  for (Eigen::Index k = 0; k < total; ++k) dst[k] = extra_step_entry(pz[k], paz[k], py[k], pg[k], alpha);
}

void update_correction(const Matrix& z, const Matrix& az, Matrix& y) {
  const Eigen::Index total = z.size();
  const double *pz = z.data(), *paz = az.data();
  double* py = y.data();
#pragma omp parallel for schedule(static) if (total >= kParallelThreshold)
  for (Eigen::Index k = 0; k < total; ++k) py[k] = correction_entry(py[k], pz[k], paz[k]);
}

void gradient_step(const Matrix& az, const Matrix& g, double alpha, Matrix& out) {
  out.resize(az.rows(), az.cols());
  const Eigen::Index total = az.size();
  const double *paz = az.data(), *pg = g.data();
  double* dst = out.data();
#pragma omp parallel for schedule(static) if (total >= kParallelThreshold)
  for (Eigen::Index k = 0; k < total; ++k) dst[k] = paz[k] - alpha * pg[k];
}

void normalize_rows(const Matrix& z, const Vector& weights, Matrix& out) {
  require(weights.size() == z.rows(), "normalize_rows: shape mismatch");
  out.resize(z.rows(), z.cols());
  const Eigen::Index n = z.rows(), p = z.cols();
#pragma omp parallel for schedule(static) if (n * p >= kParallelThreshold)
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < p; ++c) out(i, c) = z(i, c) / weights[i];
}

void grad_stack(const Objective& obj, const Matrix& x, Matrix& out) {
  require(static_cast<std::size_t>(x.rows()) == obj.agents() &&
              static_cast<std::size_t>(x.cols()) == obj.dimension(),
          "grad_stack: iterate must be agents x dimension");
  out.resize(x.rows(), x.cols());
  const Eigen::Index n = x.rows();
  // One agent per iteration: each row is independent and costs m_i * p.
#pragma omp parallel for schedule(static) if (n > 1 && x.size() >= 256)
  for (Eigen::Index i = 0; i < n; ++i)
    obj.gradient(static_cast<std::size_t>(i), row_span(x, i), row_span(out, i));
}

}  // namespace kernels

namespace reference {

void mix(const Matrix& a, const Matrix& z, Matrix& out) {
  check_mix_shapes(a, z);
  out.resize(a.rows(), z.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) mix_row(a, z, out, i);
}

void mix(const Matrix& a, const Vector& w, Vector& out) {
  require(a.cols() == w.size(), "mix: shape mismatch");
  Vector result(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) result[i] = mix_entry(a, w, i);
  out = std::move(result);
}

void extra_step(const Matrix& z, const Matrix& az, const Matrix& y, const Matrix& g, double alpha,
                Matrix& out) {
  out.resize(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      out(i, c) = kernels::extra_step_entry(z(i, c), az(i, c), y(i, c), g(i, c), alpha);
}

void update_correction(const Matrix& z, const Matrix& az, Matrix& y) {
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index c = 0; c < z.cols(); ++c) y(i, c) = kernels::correction_entry(y(i, c), z(i, c), az(i, c));
}

void gradient_step(const Matrix& az, const Matrix& g, double alpha, Matrix& out) {
  out.resize(az.rows(), az.cols());
  for (Eigen::Index i = 0; i < az.rows(); ++i)
    for (Eigen::Index c = 0; c < az.cols(); ++c) out(i, c) = az(i, c) - alpha * g(i, c);
}

void normalize_rows(const Matrix& z, const Vector& weights, Matrix& out) {
  require(weights.size() == z.rows(), "normalize_rows: shape mismatch");
  out.resize(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index c = 0; c < z.cols(); ++c) out(i, c) = z(i, c) / weights[i];
}

void grad_stack(const Objective& obj, const Matrix& x, Matrix& out) {
  require(static_cast<std::size_t>(x.rows()) == obj.agents() &&
              static_cast<std::size_t>(x.cols()) == obj.dimension(),
          "grad_stack: iterate must be agents x dimension");
  out.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    obj.gradient(static_cast<std::size_t>(i), row_span(x, i), row_span(out, i));
}

}  // namespace reference
}  // namespace extrapush
