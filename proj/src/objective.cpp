#include "extrapush/objective.hpp"

#include "extrapush/kernels.hpp"
#include "extrapush/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace extrapush {

namespace {

using ConstMap = Eigen::Map<const Vector>;
using MutMap = Eigen::Map<Vector>;

ConstMap as_vector(std::span<const double> x) {
  return ConstMap(x.data(), static_cast<Eigen::Index>(x.size()));
}
MutMap as_vector(std::span<double> x) { return MutMap(x.data(), static_cast<Eigen::Index>(x.size())); }

void check_agent(std::size_t agent, std::size_t n) {
  require(agent < n, "agent index " + std::to_string(agent) + " out of range");
}

}  // namespace

void LeastSquaresData::validate() const {
  require(!blocks.empty(), "least-squares data needs at least one agent");
  require(blocks.size() == targets.size(), "one target vector per block required");
  const auto p = blocks[0].cols();
  require(p >= 1, "variable dimension must be >= 1");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    require(blocks[i].cols() == p, "block " + std::to_string(i) + " has inconsistent width");
    require(blocks[i].rows() == targets[i].size(),
            "block " + std::to_string(i) + " and its target disagree in length");
  }
}

double huber_loss(double a, double xi) {
  const double m = std::abs(a);
  return m <= xi ? 0.5 * a * a : xi * (m - 0.5 * xi);
}

double huber_slope(double a, double xi) {
  if (std::abs(a) <= xi) return a;
  return a > 0 ? xi : -xi;
}

std::pair<double, Vector> huber_value_grad(const HuberData& h, std::size_t agent, const Vector& x) {
  check_agent(agent, h.data.agents());
  const Matrix& b = h.data.blocks[agent];
  const Vector residual = b * x - h.data.targets[agent];
  double value = 0.0;
  Vector slope(residual.size());
  for (Eigen::Index j = 0; j < residual.size(); ++j) {
    value += huber_loss(residual[j], h.xi);
    slope[j] = huber_slope(residual[j], h.xi);
  }
  return {value, b.transpose() * slope};
}

SmoothnessConstants ls_constants(const LeastSquaresData& d) {
  d.validate();
  SmoothnessConstants c;
  for (const auto& b : d.blocks) {
    const Matrix gram = b.transpose() * b;
    const Vector ev = symmetric_eigenvalues(gram);
    const double top = ev.maxCoeff();
    double bottom = ev.minCoeff();
    if (bottom <= Tolerances::relative_zero_eigenvalue * top) bottom = 0.0;
    c.lipschitz.push_back(top);
    c.strong_convexity.push_back(bottom);
  }
  c.l_f = *std::max_element(c.lipschitz.begin(), c.lipschitz.end());
  c.s_f = *std::min_element(c.strong_convexity.begin(), c.strong_convexity.end());
  return c;
}

LsSolution ls_exact_solution(const LeastSquaresData& d) {
  d.validate();
  const auto p = static_cast<Eigen::Index>(d.dimension());
  Matrix gram = Matrix::Zero(p, p);
  Vector rhs = Vector::Zero(p);
  for (std::size_t i = 0; i < d.agents(); ++i) {
    gram.noalias() += d.blocks[i].transpose() * d.blocks[i];
    rhs.noalias() += d.blocks[i].transpose() * d.targets[i];
  }
  const auto sol = min_norm_solve(gram, rhs);
  LsSolution out;
  out.x = sol.x.col(0);
  out.rank = sol.rank;
  out.rank_deficient = sol.rank_deficient;
  out.normal_residual = (gram * out.x - rhs).norm();
  return out;
}

LeastSquaresObjective::LeastSquaresObjective(LeastSquaresData d)
    : data_(std::move(d)), constants_(ls_constants(data_)) {}

double LeastSquaresObjective::value(std::size_t agent, std::span<const double> x) const {
  check_agent(agent, agents());
  return 0.5 * (data_.blocks[agent] * as_vector(x) - data_.targets[agent]).squaredNorm();
}

void LeastSquaresObjective::gradient(std::size_t agent, std::span<const double> x,
                                     std::span<double> out) const {
  check_agent(agent, agents());
  const Matrix& b = data_.blocks[agent];
  const Vector residual = b * as_vector(x) - data_.targets[agent];
  as_vector(out).noalias() = b.transpose() * residual;
}

HuberObjective::HuberObjective(HuberData h) : h_(std::move(h)) {
  h_.data.validate();
  require(h_.xi > 0.0, "Huber threshold xi must be positive");
  // H'' <= 1, so L_i = lambda_max(B_i^T B_i) as for least squares.
  l_f_ = ls_constants(h_.data).l_f;
}

double HuberObjective::value(std::size_t agent, std::span<const double> x) const {
  check_agent(agent, agents());
  const Vector residual = h_.data.blocks[agent] * as_vector(x) - h_.data.targets[agent];
  double v = 0.0;
  for (Eigen::Index j = 0; j < residual.size(); ++j) v += huber_loss(residual[j], h_.xi);
  return v;
}

void HuberObjective::gradient(std::size_t agent, std::span<const double> x,
                              std::span<double> out) const {
  check_agent(agent, agents());
  const Matrix& b = h_.data.blocks[agent];
  Vector slope = b * as_vector(x) - h_.data.targets[agent];
  for (Eigen::Index j = 0; j < slope.size(); ++j) slope[j] = huber_slope(slope[j], h_.xi);
  as_vector(out).noalias() = b.transpose() * slope;
}

ConsensusObjective::ConsensusObjective(Matrix targets) : targets_(std::move(targets)) {
  require(targets_.rows() >= 1 && targets_.cols() >= 1, "consensus targets must be nonempty");
}

double ConsensusObjective::value(std::size_t agent, std::span<const double> x) const {
  check_agent(agent, agents());
  return 0.5 * (as_vector(x) - targets_.row(static_cast<Eigen::Index>(agent)).transpose()).squaredNorm();
}

void ConsensusObjective::gradient(std::size_t agent, std::span<const double> x,
                                  std::span<double> out) const {
  check_agent(agent, agents());
  for (std::size_t c = 0; c < x.size(); ++c)
    out[c] = x[c] - targets_(static_cast<Eigen::Index>(agent), static_cast<Eigen::Index>(c));
}

void ZeroObjective::gradient(std::size_t, std::span<const double>, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
}

Matrix grad_stack(const Objective& obj, const Matrix& x) {
  Matrix out;
  kernels::grad_stack(obj, x, out);
  return out;
}

void grad_stack(const Objective& obj, const Matrix& x, Matrix& out) { kernels::grad_stack(obj, x, out); }

double stacked_value(const Objective& obj, const Matrix& x) {
  require(static_cast<std::size_t>(x.rows()) == obj.agents(), "stacked_value: shape mismatch");
  double v = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    v += obj.value(static_cast<std::size_t>(i),
                   {x.data() + i * x.cols(), static_cast<std::size_t>(x.cols())});
  return v;
}

}  // namespace extrapush
