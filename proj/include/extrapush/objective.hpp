#pragma once

// f(x) = sum_i f_i(x) with f_i known only to agent i. Algorithms see the
// stacked form: an n x p iterate whose row i is agent i's copy, and the
// stacked gradient whose row i is grad f_i(x_(i)).

#include "extrapush/common.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace extrapush {

class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t agents() const = 0;
  virtual std::size_t dimension() const = 0;

  virtual double value(std::size_t agent, std::span<const double> x) const = 0;
  /// Writes grad f_agent(x) into out (length p). Must not depend on other agents.
  virtual void gradient(std::size_t agent, std::span<const double> x,
                        std::span<double> out) const = 0;

  /// L_f = max_i L_i.
  virtual double lipschitz() const = 0;
  /// S_f = min_i S_i, or nullopt when no global (quasi-)strong convexity constant is known.
  virtual std::optional<double> strong_convexity() const = 0;
  virtual std::string name() const = 0;
};

/// Per-agent blocks B_(i) (m_i x p) and right-hand sides b_(i).
struct LeastSquaresData {
  std::vector<Matrix> blocks;
  std::vector<Vector> targets;

  std::size_t agents() const { return blocks.size(); }
  std::size_t dimension() const { return blocks.empty() ? 0 : static_cast<std::size_t>(blocks[0].cols()); }
  void validate() const;
};

struct HuberData {
  LeastSquaresData data;
  double xi = 2.0;
};

/// H_xi(a): a^2/2 on |a| <= xi, xi(|a| - xi/2) outside.
double huber_loss(double a, double xi);
/// H'_xi(a): a on |a| <= xi, xi sign(a) outside.
double huber_slope(double a, double xi);

/// Value and gradient of f_i(x) = sum_j H_xi(B_(i)j x - b_(i)j).
std::pair<double, Vector> huber_value_grad(const HuberData& h, std::size_t agent, const Vector& x);

struct SmoothnessConstants {
  std::vector<double> lipschitz;          ///< L_i = lambda_max(B_(i)^T B_(i))
  std::vector<double> strong_convexity;   ///< S_i = lambda_min(B_(i)^T B_(i)), clamped at 0
  double l_f = 0.0;
  double s_f = 0.0;
};
SmoothnessConstants ls_constants(const LeastSquaresData& d);

struct LsSolution {
  Vector x;
  bool rank_deficient = false;
  Eigen::Index rank = 0;
  double normal_residual = 0.0;  ///< ||B x - b|| with B = sum B_i^T B_i, b = sum B_i^T b_i
};
/// x* = B^+ b; min-norm when B is singular.
LsSolution ls_exact_solution(const LeastSquaresData& d);

class LeastSquaresObjective final : public Objective {
 public:
  explicit LeastSquaresObjective(LeastSquaresData d);

  std::size_t agents() const override { return data_.agents(); }
  std::size_t dimension() const override { return data_.dimension(); }
  double value(std::size_t agent, std::span<const double> x) const override;
  void gradient(std::size_t agent, std::span<const double> x, std::span<double> out) const override;
  double lipschitz() const override { return constants_.l_f; }
  std::optional<double> strong_convexity() const override { return constants_.s_f; }
  std::string name() const override { return "least-squares"; }

  const LeastSquaresData& data() const { return data_; }
  const SmoothnessConstants& constants() const { return constants_; }

 private:
  LeastSquaresData data_;
  SmoothnessConstants constants_;
};

/// Huber regression. Not globally strongly convex: strong_convexity() is nullopt.
class HuberObjective final : public Objective {
 public:
  explicit HuberObjective(HuberData h);

  std::size_t agents() const override { return h_.data.agents(); }
  std::size_t dimension() const override { return h_.data.dimension(); }
  double value(std::size_t agent, std::span<const double> x) const override;
  void gradient(std::size_t agent, std::span<const double> x, std::span<double> out) const override;
  double lipschitz() const override { return l_f_; }
  std::optional<double> strong_convexity() const override { return std::nullopt; }
  std::string name() const override { return "huber"; }

  const HuberData& data() const { return h_; }

 private:
  HuberData h_;
  double l_f_;
};

/// Average consensus: f_i(x) = ||x - target_i||^2 / 2, minimised by the mean target.
class ConsensusObjective final : public Objective {
 public:
  explicit ConsensusObjective(Matrix targets);

  std::size_t agents() const override { return static_cast<std::size_t>(targets_.rows()); }
  std::size_t dimension() const override { return static_cast<std::size_t>(targets_.cols()); }
  double value(std::size_t agent, std::span<const double> x) const override;
  void gradient(std::size_t agent, std::span<const double> x, std::span<double> out) const override;
  double lipschitz() const override { return 1.0; }
  std::optional<double> strong_convexity() const override { return 1.0; }
  std::string name() const override { return "consensus"; }

  const Matrix& targets() const { return targets_; }
  Vector average() const { return targets_.colwise().mean().transpose(); }

 private:
  Matrix targets_;
};

/// f == 0; used to isolate the mixing dynamics.
class ZeroObjective final : public Objective {
 public:
  ZeroObjective(std::size_t n, std::size_t p) : n_(n), p_(p) {}

  std::size_t agents() const override { return n_; }
  std::size_t dimension() const override { return p_; }
  double value(std::size_t, std::span<const double>) const override { return 0.0; }
  void gradient(std::size_t, std::span<const double>, std::span<double> out) const override;
  double lipschitz() const override { return 0.0; }
  std::optional<double> strong_convexity() const override { return 0.0; }
  std::string name() const override { return "zero"; }

 private:
  std::size_t n_, p_;
};

/// Stacked gradient: row i = grad f_i(x_(i))^T. Agents are evaluated in parallel.
Matrix grad_stack(const Objective& obj, const Matrix& x);
void grad_stack(const Objective& obj, const Matrix& x, Matrix& out);

/// sum_i f_i(x_(i)).
double stacked_value(const Objective& obj, const Matrix& x);

}  // namespace extrapush
