#include "extrapush/solver.hpp"

#include "extrapush/kernels.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace extrapush {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool all_finite(const Matrix& m) { return m.allFinite(); }

double consensus_violation(const Matrix& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  return (x.rowwise() - mean).norm();
}

/// Turns a stream of states into rows and stop decisions.
class Recorder {
 public:
  Recorder(Algorithm alg, const AlgorithmConfig& cfg, const RunHooks& hooks, bool skip_first)
      : cfg_(cfg), hooks_(hooks), skip_first_(skip_first) {
    rec_.algorithm = alg;
    if (hooks_.x_star)
      require(static_cast<std::size_t>(hooks_.x_star->size()) > 0, "ground truth must be nonempty");
  }

  /// Returns true when the run must stop after this state.
  bool observe(const IterateState& s, const Matrix* x_prev) {
    if (hooks_.observer) hooks_.observer(s);

    TrajectoryRow row;
    row.t = s.t;
    row.alpha_t = s.alpha_t;
    const bool finite = all_finite(s.x) && all_finite(s.z);
    const double xnorm = s.x.norm();
    row.step_change = x_prev ? (s.x - *x_prev).norm() / (1.0 + xnorm) : kNaN;
    row.consensus = consensus_violation(s.x);
    row.err_opt = hooks_.x_star ? (s.x.rowwise() - hooks_.x_star->transpose()).norm() : kNaN;
    std::optional<double> residual;
    if (hooks_.probe && finite) {
      const auto r = hooks_.probe(s);
      row.r_null = r.r_null;
      row.r_grad = r.r_grad;
      row.r_link = r.r_link;
      residual = r.max();
    } else {
      row.r_null = row.r_grad = row.r_link = kNaN;
    }

    StopInputs in;
    in.t = s.t;
    in.step_change = row.step_change;
    in.residual = residual;
    in.finite = finite;
    const auto decision = stop_rule(in, cfg_);

    const bool first = skip_first_ && !seen_;
    seen_ = true;
    if (!first && (decision.stop || s.t % cfg_.record_every == 0)) rec_.rows.push_back(row);
    if (decision.stop) rec_.reason = decision.reason;
    return decision.stop;
  }

  TrajectoryRecord finish(const IterateState& last) {
    rec_.final_state = last;
    return std::move(rec_);
  }

 private:
  const AlgorithmConfig& cfg_;
  const RunHooks& hooks_;
  bool skip_first_;
  bool seen_ = false;
  TrajectoryRecord rec_;
};

template <class Engine>
TrajectoryRecord drive(Engine& engine, Algorithm alg, const AlgorithmConfig& cfg,
                       const RunHooks& hooks, bool resumed = false) {
  Recorder rec(alg, cfg, hooks, resumed);
  if (rec.observe(engine.state(), nullptr))
    return rec.finish(engine.state());
  for (;;) {
    engine.step();
    if (rec.observe(engine.state(), &engine.x_prev())) break;
  }
  return rec.finish(engine.state());
}

void check_start(const Matrix& a, const Objective& obj, const Matrix& z0) {
  require(static_cast<std::size_t>(a.rows()) == obj.agents(),
          "mixing matrix size does not match the number of agents");
  require(static_cast<std::size_t>(z0.rows()) == obj.agents() &&
              static_cast<std::size_t>(z0.cols()) == obj.dimension(),
          "starting point must be agents x dimension");
}

/// Extra / ExtraPush / Normalized ExtraPush as z^{t+1} = A_bar z^t - alpha g^t - y^t with the
/// running correction y^t = y^{t-1} + (z^t - A z^t) / 2, and x = z / w or x = D^-1 z.
class TwoStepEngine {
 public:
  enum class Normalization { push_sum, fixed };

  TwoStepEngine(const Matrix& a, Normalization norm, Vector weights, const Objective& obj,
                double alpha, bool track)
      : a_(a), norm_(norm), weights_(std::move(weights)), obj_(obj), alpha_(alpha), track_(track) {}

  void start(const Matrix& z0) {
    check_start(a_, obj_, z0);
    cur_ = IterateState{};
    cur_.t = 0;
    cur_.z = z0;
    if (norm_ == Normalization::push_sum) cur_.w = Vector::Ones(z0.rows());
    cur_.y = Matrix::Zero(z0.rows(), z0.cols());
    complete_round(true);
    if (track_) cur_.u = cur_.z;
    x_prev_ = cur_.x;
  }

  void step() {
    std::swap(x_prev_, cur_.x);
    Matrix next;
    kernels::extra_step(cur_.z, az_, cur_.y, cur_.grad, alpha_, next);
    cur_.z = std::move(next);
    cur_.t += 1;
    cur_.alpha_t = alpha_;
    if (norm_ == Normalization::push_sum) {
      kernels::mix(a_, cur_.w, cur_.w);
      require(cur_.w.minCoeff() >= Tolerances::weight_floor,
              "push-sum weight fell below the positivity floor; the mixing matrix is invalid");
    }
    complete_round(true);
    if (track_) cur_.u += cur_.z;
  }

  void resume(const Checkpoint& cp) {
    check_start(a_, obj_, cp.z);
    require(cp.y.rows() == cp.z.rows() && cp.y.cols() == cp.z.cols(), "checkpoint lacks the correction y");
    require((norm_ == Normalization::push_sum) == (cp.w.size() > 0), "checkpoint weights do not fit the method");
    cur_ = IterateState{};
    cur_.t = cp.t;
    cur_.z = cp.z;
    cur_.w = cp.w;
    cur_.y = cp.y;
    cur_.alpha_t = cp.t == 0 ? 0.0 : alpha_;
    complete_round(false);
    if (track_) {
      require(cp.u.rows() == cp.z.rows() && cp.u.cols() == cp.z.cols(), "checkpoint lacks the u accumulator");
      cur_.u = cp.u;
    }
    x_prev_ = cur_.x;
  }

  Checkpoint checkpoint(Algorithm alg) const {
    Checkpoint cp;
    cp.algorithm = alg;
    cp.alpha = alpha_;
    cp.t = cur_.t;
    cp.z = cur_.z;
    cp.w = cur_.w;
    cp.y = cur_.y;
    cp.u = cur_.u;
    return cp;
  }

  const IterateState& state() const { return cur_; }
  const Matrix& x_prev() const { return x_prev_; }

 private:
  /// x^t, A z^t and grad f(x^t) for the z^t just formed; y^{t-1} -> y^t when asked.
  void complete_round(bool advance_y) {
    kernels::normalize_rows(cur_.z, norm_ == Normalization::push_sum ? cur_.w : weights_, cur_.x);
    kernels::mix(a_, cur_.z, az_);
    kernels::grad_stack(obj_, cur_.x, cur_.grad);
    if (advance_y) kernels::update_correction(cur_.z, az_, cur_.y);
  }

  const Matrix& a_;
  Normalization norm_;
  Vector weights_;
  const Objective& obj_;
  double alpha_;
  bool track_;
  IterateState cur_;
  Matrix x_prev_, az_;
};

class SubgradientPushEngine {
 public:
  SubgradientPushEngine(const Matrix& a, const Objective& obj, const StepSchedule& schedule)
      : a_(a), obj_(obj), schedule_(schedule) {}

  void start(const Matrix& z0) {
    check_start(a_, obj_, z0);
    cur_ = IterateState{};
    cur_.z = z0;
    cur_.w = Vector::Ones(z0.rows());
    kernels::normalize_rows(cur_.z, cur_.w, cur_.x);
    kernels::grad_stack(obj_, cur_.x, cur_.grad);
    x_prev_ = cur_.x;
  }

  void step() {
    const std::size_t t = cur_.t + 1;
    const double alpha_t = schedule_(t);
    Matrix az;
    kernels::mix(a_, cur_.z, az);
    x_prev_ = cur_.x;
    kernels::gradient_step(az, cur_.grad, alpha_t, cur_.z);
    Vector w;
    kernels::mix(a_, cur_.w, w);
    cur_.w = std::move(w);
    require(cur_.w.minCoeff() >= Tolerances::weight_floor,
            "push-sum weight fell below the positivity floor; the mixing matrix is invalid");
    kernels::normalize_rows(cur_.z, cur_.w, cur_.x);
    kernels::grad_stack(obj_, cur_.x, cur_.grad);
    cur_.t = t;
    cur_.alpha_t = alpha_t;
  }

  const IterateState& state() const { return cur_; }
  const Matrix& x_prev() const { return x_prev_; }

 private:
  const Matrix& a_;
  const Objective& obj_;
  const StepSchedule& schedule_;
  IterateState cur_;
  Matrix x_prev_;
};

/// Single-variable z recursion written with dense products, independent of the
/// kernels used by TwoStepEngine.
class ZFormEngine {
 public:
  ZFormEngine(const MixingMatrix& m, const StationaryDistribution& s, const Objective& obj,
              double alpha, bool track)
      : m_(m), s_(s), obj_(obj), alpha_(alpha), track_(track) {
    const auto n = m.a.rows();
    a_plus_i_ = m.a + Matrix::Identity(n, n);
  }

  void start(const Matrix& z0) {
    check_start(m_.a, obj_, z0);
    cur_ = IterateState{};
    cur_.z = z0;
    finish();
    if (track_) {
      cur_.y = 0.5 * (cur_.z - m_.a * cur_.z);
      cur_.u = cur_.z;
    }
    prev_ = cur_;
  }

  void step() {
    Matrix next;
    if (cur_.t == 0)
      next = m_.a * cur_.z - alpha_ * cur_.grad;
    else
      next = a_plus_i_ * cur_.z - m_.a_bar * prev_.z - alpha_ * (cur_.grad - prev_.grad);
    prev_ = cur_;
    cur_.t += 1;
    cur_.z = std::move(next);
    cur_.alpha_t = alpha_;
    finish();
    if (track_) {
      cur_.y = prev_.y + 0.5 * (cur_.z - m_.a * cur_.z);
      cur_.u = prev_.u + cur_.z;
    }
  }

  const IterateState& state() const { return cur_; }
  const Matrix& x_prev() const { return prev_.x; }

 private:
  void finish() {
    // grad f_phi(z) = grad f(D^-1 z); the returned x is the same D^-1 z.
    cur_.x = s_.d_inv.asDiagonal() * cur_.z;
    cur_.grad = grad_stack(obj_, cur_.x);
  }

  const MixingMatrix& m_;
  const StationaryDistribution& s_;
  const Objective& obj_;
  double alpha_;
  bool track_;
  Matrix a_plus_i_;
  IterateState cur_, prev_;
};

/// Row-stochastic x recursion with A_phi = D^-1 A D and gradient scaled by D^-1.
class XFormEngine {
 public:
  XFormEngine(const MixingMatrix& m, const StationaryDistribution& s, const Objective& obj,
              double alpha, bool track)
      : m_(m), s_(s), obj_(obj), alpha_(alpha), track_(track) {
    const auto n = m.a.rows();
    a_phi_ = row_stochastic_form(m, s);
    a_phi_plus_i_ = a_phi_ + Matrix::Identity(n, n);
    a_phi_bar_ = 0.5 * (Matrix::Identity(n, n) + a_phi_);
  }

  void start(const Matrix& z0) {
    check_start(m_.a, obj_, z0);
    cur_ = IterateState{};
    cur_.x = s_.d_inv.asDiagonal() * z0;
    finish();
    if (track_) {
      cur_.y = 0.5 * (cur_.z - m_.a * cur_.z);
      cur_.u = cur_.z;
    }
    prev_ = cur_;
  }

  void step() {
    Matrix next;
    const auto dinv = s_.d_inv.asDiagonal();
    if (cur_.t == 0)
      next = a_phi_ * cur_.x - alpha_ * (dinv * cur_.grad);
    else
      next = a_phi_plus_i_ * cur_.x - a_phi_bar_ * prev_.x - alpha_ * (dinv * (cur_.grad - prev_.grad));
    prev_ = cur_;
    cur_.t += 1;
    cur_.x = std::move(next);
    cur_.alpha_t = alpha_;
    finish();
    if (track_) {
      cur_.y = prev_.y + 0.5 * (cur_.z - m_.a * cur_.z);
      cur_.u = prev_.u + cur_.z;
    }
  }

  const IterateState& state() const { return cur_; }
  const Matrix& x_prev() const { return prev_.x; }

 private:
  void finish() {
    cur_.z = s_.d.asDiagonal() * cur_.x;
    cur_.grad = grad_stack(obj_, cur_.x);
  }

  const MixingMatrix& m_;
  const StationaryDistribution& s_;
  const Objective& obj_;
  double alpha_;
  bool track_;
  Matrix a_phi_, a_phi_plus_i_, a_phi_bar_;
  IterateState cur_, prev_;
};

void check_stationary(const MixingMatrix& a, const StationaryDistribution& s) {
  require(s.size() == a.size(), "stationary distribution has the wrong length");
  require(s.phi.minCoeff() > 0.0, "stationary distribution must be strictly positive");
}

void validate_extra_matrix(const Matrix& w) {
  require(w.rows() == w.cols(), "Extra: W must be square");
  const double asym = (w - w.transpose()).cwiseAbs().maxCoeff();
  require(asym <= Tolerances::doubly_stochastic,
          "Extra: W must be symmetric (max asymmetry " + std::to_string(asym) + ")");
  const double rows = (w.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double cols = (w.colwise().sum().array() - 1.0).abs().maxCoeff();
  require(std::max(rows, cols) <= Tolerances::doubly_stochastic,
          "Extra: W must be doubly stochastic");
  require(w.minCoeff() >= 0.0, "Extra: W must be nonnegative");
}

std::unique_ptr<TwoStepEngine> make_two_step(const MixingMatrix& a, const StationaryDistribution* s,
                                             const Objective& obj, const AlgorithmConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::extrapush:
      return std::make_unique<TwoStepEngine>(a.a, TwoStepEngine::Normalization::push_sum, Vector(),
                                             obj, cfg.alpha, cfg.track_auxiliary);
    case Algorithm::normalized_extrapush:
      require(s != nullptr, "Normalized ExtraPush needs the stationary distribution");
      check_stationary(a, *s);
      return std::make_unique<TwoStepEngine>(a.a, TwoStepEngine::Normalization::fixed, s->d, obj,
                                             cfg.alpha, cfg.track_auxiliary);
    case Algorithm::extra:
      validate_extra_matrix(a.a);
      return std::make_unique<TwoStepEngine>(a.a, TwoStepEngine::Normalization::fixed,
                                             Vector::Ones(a.a.rows()), obj, cfg.alpha,
                                             cfg.track_auxiliary);
    default:
      throw Error("checkpoints are supported for extra, extrapush and normalized-extrapush only");
  }
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::extra: return "extra";
    case Algorithm::subgradient_push: return "subgradient-push";
    case Algorithm::extrapush: return "extrapush";
    case Algorithm::normalized_extrapush: return "normalized-extrapush";
    case Algorithm::normalized_extrapush_z: return "normalized-extrapush-z";
    case Algorithm::normalized_extrapush_x: return "normalized-extrapush-x";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& s) {
  for (auto a : {Algorithm::extra, Algorithm::subgradient_push, Algorithm::extrapush,
                 Algorithm::normalized_extrapush, Algorithm::normalized_extrapush_z,
                 Algorithm::normalized_extrapush_x})
    if (to_string(a) == s) return a;
  throw Error("unknown algorithm '" + s + "'");
}

bool is_fixed_step(Algorithm a) { return a != Algorithm::subgradient_push; }

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::running: return "running";
    case StopReason::max_iters: return "max_iters";
    case StopReason::step_tolerance: return "step_tolerance";
    case StopReason::residual_tolerance: return "residual_tolerance";
    case StopReason::diverged: return "diverged";
  }
  return "?";
}

StepSchedule StepSchedule::inverse_sqrt(double c, double t0) {
  StepSchedule s;
  s.kind = Kind::power;
  s.scale = c;
  s.shift = t0;
  s.exponent = 0.5;
  return s;
}

StepSchedule StepSchedule::constant_step(double c) {
  StepSchedule s;
  s.kind = Kind::constant;
  s.scale = c;
  return s;
}

StepSchedule StepSchedule::from_function(std::function<double(std::size_t)> f) {
  StepSchedule s;
  s.kind = Kind::custom;
  s.custom = std::move(f);
  return s;
}

double StepSchedule::operator()(std::size_t t) const {
  switch (kind) {
    case Kind::constant: return scale;
    case Kind::power: return scale / std::pow(static_cast<double>(t) + shift, exponent);
    case Kind::custom: return custom(t);
  }
  return 0.0;
}

void StepSchedule::validate() const {
  switch (kind) {
    case Kind::constant:
      require(scale > 0.0, "step schedule: constant step must be positive");
      return;
    case Kind::power:
      require(scale > 0.0, "step schedule: scale c must be positive");
      require(shift >= 0.0, "step schedule: shift t0 must be >= 0");
      require(exponent > 0.0, "step schedule: exponent must be positive (non-increasing steps)");
      require(exponent <= 1.0, "step schedule: exponent > 1 makes sum alpha_t finite");
      require(1.0 + shift > 0.0, "step schedule: alpha_1 undefined");
      return;
    case Kind::custom:
      require(static_cast<bool>(custom), "step schedule: custom function missing");
      return;
  }
}

bool StepSchedule::divergent_sum() const {
  return kind == Kind::constant || (kind == Kind::power && exponent <= 1.0);
}

bool StepSchedule::square_summable() const { return kind == Kind::power && exponent > 0.5; }

std::string StepSchedule::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::constant: os << "constant " << scale; break;
    case Kind::power:
      os << scale << "/(t";
      if (shift != 0.0) os << "+" << shift;
      os << ")^" << exponent;
      break;
    case Kind::custom: os << "custom (unvalidated)"; break;
  }
  return os.str();
}

void AlgorithmConfig::validate() const {
  if (is_fixed_step(algorithm))
    require(alpha > 0.0 && std::isfinite(alpha), "step size alpha must be positive");
  else
    schedule.validate();
  require(max_iters >= 1, "max_iters must be >= 1");
  require(tol >= 0.0, "tol must be >= 0");
  require(record_every >= 1, "record_every must be >= 1");
}

double ResidualTriple::max() const { return std::max({r_null, r_grad, r_link}); }

StopDecision stop_rule(const StopInputs& in, const AlgorithmConfig& cfg) {
  if (!in.finite) return {true, StopReason::diverged};
  if (in.t >= cfg.max_iters) return {true, StopReason::max_iters};
  if (cfg.tol > 0.0 && in.t >= 2) {
    if (in.step_change <= cfg.tol) return {true, StopReason::step_tolerance};
    if (in.residual && *in.residual <= cfg.tol) return {true, StopReason::residual_tolerance};
  }
  return {false, StopReason::running};
}

TrajectoryRecord run_extra(const Matrix& w, const Objective& obj, const AlgorithmConfig& cfg,
                           const Matrix& x0, const RunHooks& hooks) {
  cfg.validate();
  validate_extra_matrix(w);
  TwoStepEngine engine(w, TwoStepEngine::Normalization::fixed, Vector::Ones(w.rows()), obj,
                       cfg.alpha, cfg.track_auxiliary);
  engine.start(x0);
  return drive(engine, Algorithm::extra, cfg, hooks);
}

TrajectoryRecord run_subgradient_push(const MixingMatrix& a, const Objective& obj,
                                      const AlgorithmConfig& cfg, const Matrix& z0,
                                      const RunHooks& hooks) {
  cfg.validate();
  SubgradientPushEngine engine(a.a, obj, cfg.schedule);
  engine.start(z0);
  return drive(engine, Algorithm::subgradient_push, cfg, hooks);
}

TrajectoryRecord run_extrapush(const MixingMatrix& a, const Objective& obj,
                               const AlgorithmConfig& cfg, const Matrix& z0,
                               const RunHooks& hooks) {
  cfg.validate();
  TwoStepEngine engine(a.a, TwoStepEngine::Normalization::push_sum, Vector(), obj, cfg.alpha,
                       cfg.track_auxiliary);
  engine.start(z0);
  return drive(engine, Algorithm::extrapush, cfg, hooks);
}

TrajectoryRecord run_normalized_extrapush(const MixingMatrix& a, const StationaryDistribution& s,
                                          const Objective& obj, const AlgorithmConfig& cfg,
                                          const Matrix& z0, const RunHooks& hooks) {
  cfg.validate();
  check_stationary(a, s);
  TwoStepEngine engine(a.a, TwoStepEngine::Normalization::fixed, s.d, obj, cfg.alpha,
                       cfg.track_auxiliary);
  engine.start(z0);
  return drive(engine, Algorithm::normalized_extrapush, cfg, hooks);
}

TrajectoryRecord run_normalized_z_form(const MixingMatrix& a, const StationaryDistribution& s,
                                       const Objective& obj, const AlgorithmConfig& cfg,
                                       const Matrix& z0, const RunHooks& hooks) {
  cfg.validate();
  check_stationary(a, s);
  ZFormEngine engine(a, s, obj, cfg.alpha, cfg.track_auxiliary);
  engine.start(z0);
  return drive(engine, Algorithm::normalized_extrapush_z, cfg, hooks);
}

TrajectoryRecord run_normalized_x_form(const MixingMatrix& a, const StationaryDistribution& s,
                                       const Objective& obj, const AlgorithmConfig& cfg,
                                       const Matrix& z0, const RunHooks& hooks) {
  cfg.validate();
  check_stationary(a, s);
  XFormEngine engine(a, s, obj, cfg.alpha, cfg.track_auxiliary);
  engine.start(z0);
  return drive(engine, Algorithm::normalized_extrapush_x, cfg, hooks);
}

TrajectoryRecord run_algorithm(const MixingMatrix& a, const StationaryDistribution& s,
                               const Objective& obj, const AlgorithmConfig& cfg, const Matrix& z0,
                               const RunHooks& hooks) {
  switch (cfg.algorithm) {
    case Algorithm::extra: return run_extra(a.a, obj, cfg, z0, hooks);
    case Algorithm::subgradient_push: return run_subgradient_push(a, obj, cfg, z0, hooks);
    case Algorithm::extrapush: return run_extrapush(a, obj, cfg, z0, hooks);
    case Algorithm::normalized_extrapush: return run_normalized_extrapush(a, s, obj, cfg, z0, hooks);
    case Algorithm::normalized_extrapush_z: return run_normalized_z_form(a, s, obj, cfg, z0, hooks);
    case Algorithm::normalized_extrapush_x: return run_normalized_x_form(a, s, obj, cfg, z0, hooks);
  }
  throw Error("unknown algorithm");
}

Matrix initial_z(Algorithm algorithm, const Matrix& x0, const StationaryDistribution& s) {
  switch (algorithm) {
    case Algorithm::normalized_extrapush:
    case Algorithm::normalized_extrapush_z:
    case Algorithm::normalized_extrapush_x:
      require(x0.rows() == s.phi.size(), "initial_z: shape mismatch");
      return s.d.asDiagonal() * x0;
    default: return x0;
  }
}

Matrix row_stochastic_form(const MixingMatrix& a, const StationaryDistribution& s) {
  return s.d_inv.asDiagonal() * a.a * s.d.asDiagonal();
}

Checkpoint checkpoint_at(const MixingMatrix& a, const StationaryDistribution& s,
                         const Objective& obj, const AlgorithmConfig& cfg, const Matrix& z0,
                         std::size_t at) {
  cfg.validate();
  auto engine = make_two_step(a, &s, obj, cfg);
  engine->start(z0);
  while (engine->state().t < at) engine->step();
  return engine->checkpoint(cfg.algorithm);
}

TrajectoryRecord resume_run(const Checkpoint& cp, const MixingMatrix& a,
                            const StationaryDistribution& s, const Objective& obj,
                            const AlgorithmConfig& cfg, const RunHooks& hooks) {
  cfg.validate();
  require(cp.algorithm == cfg.algorithm, "checkpoint was written by " + to_string(cp.algorithm));
  require(cp.alpha == cfg.alpha, "checkpoint step size differs from the configured alpha");
  auto engine = make_two_step(a, &s, obj, cfg);
  engine->resume(cp);
  return drive(*engine, cfg.algorithm, cfg, hooks, /*resumed=*/cp.t > 0);
}

namespace {

nlohmann::json rows_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) r[static_cast<std::size_t>(c)] = m(i, c);
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix rows_matrix(const nlohmann::json& j) {
  if (j.empty()) return Matrix();
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto r = j.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
    require(static_cast<Eigen::Index>(r.size()) == cols, "checkpoint: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = r[static_cast<std::size_t>(c)];
  }
  return m;
}

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "extrapush-checkpoint";
  j["version"] = 2;
  j["algorithm"] = to_string(cp.algorithm);
  j["alpha"] = cp.alpha;
  j["t"] = cp.t;
  j["z"] = rows_json(cp.z);
  j["w"] = vec_json(cp.w);
  j["y"] = rows_json(cp.y);
  j["u"] = rows_json(cp.u);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    require(static_cast<bool>(out), "cannot write " + tmp);
    out << j.dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    require(j.value("format", "") == "extrapush-checkpoint", "not a checkpoint: " + path.string());
    Checkpoint cp;
    cp.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    cp.alpha = j.at("alpha").get<double>();
    cp.t = j.at("t").get<std::size_t>();
    require(j.value("version", 0) == 2, "unsupported checkpoint version in " + path.string());
    cp.z = rows_matrix(j.at("z"));
    cp.w = json_vec(j.at("w"));
    cp.y = rows_matrix(j.at("y"));
    cp.u = rows_matrix(j.at("u"));
    return cp;
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint " + path.string() + ": " + e.what());
  }
}

void write_trajectory_csv(const TrajectoryRecord& rec, std::ostream& out) {
  out << "t,err_opt,consensus,residual_opt,residual_feas,alpha_t\n";
  std::ostringstream line;
  line << std::setprecision(17);
  for (const auto& r : rec.rows) {
    line.str("");
    const double feas = std::isnan(r.r_null) ? r.r_null : std::max(r.r_null, r.r_link);
    line << r.t << ',' << r.err_opt << ',' << r.consensus << ',' << r.r_grad << ',' << feas << ','
         << r.alpha_t << '\n';
    out << line.str();
  }
}

void write_trajectory_csv(const TrajectoryRecord& rec, const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    require(static_cast<bool>(out), "cannot write " + tmp);
    write_trajectory_csv(rec, out);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace extrapush
