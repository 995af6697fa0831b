#pragma once

// Matrix-form engines for Extra, subgradient-push, ExtraPush and Normalized
// ExtraPush (plus the two algebraically equivalent Normalized forms), all
// sharing one trajectory format and stopping rule.

#include "extrapush/graph.hpp"
#include "extrapush/objective.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace extrapush {

enum class Algorithm {
  extra,
  subgradient_push,
  extrapush,
  normalized_extrapush,
  normalized_extrapush_z,
  normalized_extrapush_x,
};

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& s);
/// True for the methods that run with a constant step size.
bool is_fixed_step(Algorithm a);

/// alpha_t for subgradient-push, t >= 1.
struct StepSchedule {
  enum class Kind { constant, power, custom };

  Kind kind = Kind::power;
  double scale = 1.0;     ///< c
  double shift = 0.0;     ///< t0
  double exponent = 0.5;  ///< q in c / (t + t0)^q
  std::function<double(std::size_t)> custom;

  /// c / sqrt(t + t0).
  static StepSchedule inverse_sqrt(double c, double t0 = 0.0);
  static StepSchedule constant_step(double c);
  static StepSchedule from_function(std::function<double(std::size_t)> f);

  double operator()(std::size_t t) const;
  /// Rejects non-positive or increasing built-in schedules and summable ones
  /// (exponent > 1). Custom schedules are accepted unchecked; see validated().
  void validate() const;
  bool validated() const { return kind != Kind::custom; }
  /// sum_t alpha_t diverges.
  bool divergent_sum() const;
  /// sum_t alpha_t^2 converges.
  bool square_summable() const;
  std::string describe() const;
};

struct AlgorithmConfig {
  Algorithm algorithm = Algorithm::normalized_extrapush;
  double alpha = 0.1;
  StepSchedule schedule = StepSchedule::inverse_sqrt(1.0);
  std::size_t max_iters = 1000;
  /// 0 disables both tolerance tests.
  double tol = 0.0;
  std::size_t record_every = 1;
  /// Maintain u^t = sum_k z^k, and y^t = sum_k (A_bar - A) z^k in the
  /// alternative Normalized forms (the main engines always carry y).
  bool track_auxiliary = false;

  void validate() const;
};

/// Everything known about round t.
struct IterateState {
  std::size_t t = 0;
  Matrix z;
  Matrix x;
  Matrix grad;  ///< grad f(x^t), computed once and reused in round t + 1
  Vector w;     ///< push-sum weights; empty for fixed normalisations
  Matrix y;     ///< y^t; always kept by the two-step engines, otherwise only when tracked
  Matrix u;     ///< empty unless tracked
  double alpha_t = 0.0;
};

struct ResidualTriple {
  double r_null = 0.0;  ///< ||(I - A) z||
  double r_grad = 0.0;  ///< ||y + alpha grad f(x)||
  double r_link = 0.0;  ///< ||x - D^-1 z||
  double sum_y = 0.0;   ///< ||1^T y||
  double max() const;
};

using ResidualProbe = std::function<ResidualTriple(const IterateState&)>;
using Observer = std::function<void(const IterateState&)>;

struct RunHooks {
  std::optional<Vector> x_star;  ///< enables err_opt
  ResidualProbe probe;           ///< supplied by the analysis module
  Observer observer;             ///< called at every round, including t = 0
};

struct TrajectoryRow {
  std::size_t t = 0;
  double err_opt = 0.0;     ///< ||x^t - 1 x*^T||, NaN without ground truth
  double consensus = 0.0;   ///< ||x^t - 1 mean(x^t)||
  double r_null = 0.0;      ///< NaN without a probe
  double r_grad = 0.0;
  double r_link = 0.0;
  double alpha_t = 0.0;
  double step_change = 0.0; ///< ||x^t - x^{t-1}|| / (1 + ||x^t||)
};

enum class StopReason { running, max_iters, step_tolerance, residual_tolerance, diverged };
std::string to_string(StopReason r);

struct TrajectoryRecord {
  Algorithm algorithm = Algorithm::extrapush;
  std::vector<TrajectoryRow> rows;
  StopReason reason = StopReason::running;
  IterateState final_state;
};

struct StopInputs {
  std::size_t t = 0;
  double step_change = 0.0;
  std::optional<double> residual;
  bool finite = true;
};

struct StopDecision {
  bool stop = false;
  StopReason reason = StopReason::running;
};

/// Divergence first, then max_iters, then (from t >= 2 and tol > 0) the step
/// and residual tests.
StopDecision stop_rule(const StopInputs& in, const AlgorithmConfig& cfg);

/// Extra on a symmetric doubly stochastic W. x0 is the starting iterate.
TrajectoryRecord run_extra(const Matrix& w, const Objective& obj, const AlgorithmConfig& cfg,
                           const Matrix& x0, const RunHooks& hooks = {});

TrajectoryRecord run_subgradient_push(const MixingMatrix& a, const Objective& obj,
                                      const AlgorithmConfig& cfg, const Matrix& z0,
                                      const RunHooks& hooks = {});

TrajectoryRecord run_extrapush(const MixingMatrix& a, const Objective& obj,
                               const AlgorithmConfig& cfg, const Matrix& z0,
                               const RunHooks& hooks = {});

TrajectoryRecord run_normalized_extrapush(const MixingMatrix& a, const StationaryDistribution& s,
                                          const Objective& obj, const AlgorithmConfig& cfg,
                                          const Matrix& z0, const RunHooks& hooks = {});

/// Single-variable recursion in z with grad f_phi(z) = grad f(D^-1 z).
TrajectoryRecord run_normalized_z_form(const MixingMatrix& a, const StationaryDistribution& s,
                                       const Objective& obj, const AlgorithmConfig& cfg,
                                       const Matrix& z0, const RunHooks& hooks = {});

/// Row-stochastic recursion in x with A_phi = D^-1 A D.
TrajectoryRecord run_normalized_x_form(const MixingMatrix& a, const StationaryDistribution& s,
                                       const Objective& obj, const AlgorithmConfig& cfg,
                                       const Matrix& z0, const RunHooks& hooks = {});

/// Dispatches on cfg.algorithm. For extra, `a` must be symmetric doubly stochastic.
TrajectoryRecord run_algorithm(const MixingMatrix& a, const StationaryDistribution& s,
                               const Objective& obj, const AlgorithmConfig& cfg, const Matrix& z0,
                               const RunHooks& hooks = {});

/// z0 that corresponds to the stacked starting point x0 for the given method:
/// x0 itself when x0 = z0 (w0 = 1), D x0 for the Normalized family.
Matrix initial_z(Algorithm algorithm, const Matrix& x0, const StationaryDistribution& s);

/// D^-1 A D, row stochastic.
Matrix row_stochastic_form(const MixingMatrix& a, const StationaryDistribution& s);

/// Resume point for the two-step methods. Round t + 1 needs only z^t, w^t and
/// the running correction y^t.
struct Checkpoint {
  Algorithm algorithm = Algorithm::extrapush;
  double alpha = 0.0;
  std::size_t t = 0;  ///< last completed round
  Matrix z;           ///< z^t
  Vector w;           ///< w^t (ExtraPush) or empty
  Matrix y;           ///< y^t
  Matrix u;           ///< u^t, empty unless tracked
};

/// Runs to cfg.max_iters like the run_* functions, but stops early after
/// round `at` and returns its checkpoint. Two-step methods only.
Checkpoint checkpoint_at(const MixingMatrix& a, const StationaryDistribution& s,
                         const Objective& obj, const AlgorithmConfig& cfg, const Matrix& z0,
                         std::size_t at);
/// Continues a run from a checkpoint; rows start at checkpoint.t + 1.
TrajectoryRecord resume_run(const Checkpoint& cp, const MixingMatrix& a,
                            const StationaryDistribution& s, const Objective& obj,
                            const AlgorithmConfig& cfg, const RunHooks& hooks = {});

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Header t,err_opt,consensus,residual_opt,residual_feas,alpha_t; 17 significant digits.
/// residual_opt is r_grad, residual_feas is max(r_null, r_link).
void write_trajectory_csv(const TrajectoryRecord& rec, std::ostream& out);
void write_trajectory_csv(const TrajectoryRecord& rec, const std::filesystem::path& path);

}  // namespace extrapush
