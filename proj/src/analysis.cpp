#include "extrapush/analysis.hpp"

#include "extrapush/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace extrapush {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double lmin(const Matrix& sym) { return symmetric_eigenvalues(sym).minCoeff(); }
double lmax(const Matrix& sym) { return symmetric_eigenvalues(sym).maxCoeff(); }

/// sqrt that yields NaN for negative input instead of a domain error.
double root(double x) { return x >= 0.0 ? std::sqrt(x) : kNaN; }

bool is_doubly_stochastic(const Matrix& a) {
  return (a.rowwise().sum().array() - 1.0).abs().maxCoeff() <= Tolerances::exact &&
         (a.colwise().sum().array() - 1.0).abs().maxCoeff() <= Tolerances::exact;
}

struct Scaling {
  Vector d, d_inv;
};

MetricObjects assemble(const MixingMatrix& a, const Scaling& sc) {
  const auto n = a.a.rows();
  MetricObjects mo;
  mo.n = sc.d_inv.asDiagonal() * a.a_bar;
  mo.m = sc.d_inv.asDiagonal() * (a.a_bar - a.a);
  mo.g = Matrix::Zero(2 * n, 2 * n);
  mo.g.topLeftCorner(n, n) = mo.n.transpose();
  mo.g.bottomRightCorner(n, n) = mo.m;
  mo.s = Matrix::Zero(2 * n, 2 * n);
  mo.s.topRightCorner(n, n) = mo.m;
  mo.s.bottomLeftCorner(n, n) = -mo.m.transpose();
  const Vector sq = sc.d.cwiseSqrt(), isq = sc.d_inv.cwiseSqrt();
  const Matrix conj = sq.asDiagonal() * a.a.transpose() * isq.asDiagonal();
  mo.lambda = Matrix::Identity(n, n) - 0.5 * (conj + conj.transpose());
  mo.min_eig_m_sym = lmin(mo.m + mo.m.transpose());
  mo.min_eig_g_sym = lmin(mo.g + mo.g.transpose());
  mo.m_sym_psd = mo.min_eig_m_sym >= -Tolerances::iterative;
  mo.g_sym_psd = mo.min_eig_g_sym >= -Tolerances::iterative;
  return mo;
}

Scaling scaling_of(const StationaryDistribution& s) { return {s.d, s.d_inv}; }

}  // namespace

// ---------------------------------------------------------------- residuals

OptimalityTriple optimal_triple(const StationaryDistribution& s, const Objective& obj,
                                const Vector& x_star, double alpha) {
  const auto n = static_cast<Eigen::Index>(obj.agents());
  require(s.phi.size() == n, "optimal_triple: phi has the wrong length");
  OptimalityTriple t;
  t.x = Vector::Ones(n) * x_star.transpose();
  t.z = s.d.asDiagonal() * t.x;
  t.y = -alpha * grad_stack(obj, t.x);
  return t;
}

ResidualTriple residual_opt(const Matrix& z, const Matrix& y, const Matrix& x, const MixingMatrix& a,
                            const StationaryDistribution& s, double alpha, const Objective& obj) {
  ResidualTriple r;
  r.r_null = (z - a.a * z).norm();
  r.r_link = (x - s.d_inv.asDiagonal() * z).norm();
  if (y.size() == 0) {
    r.r_grad = r.sum_y = kNaN;
  } else {
    r.r_grad = (y + alpha * grad_stack(obj, x)).norm();
    r.sum_y = y.colwise().sum().norm();
  }
  return r;
}

ResidualTriple residual_opt(const IterateState& state, const MixingMatrix& a,
                            const StationaryDistribution& s, double alpha, const Objective& obj) {
  return residual_opt(state.z, state.y, state.x, a, s, alpha, obj);
}

ResidualProbe make_residual_probe(const MixingMatrix& a, const StationaryDistribution& s,
                                  double alpha) {
  return [&a, &s, alpha](const IterateState& st) {
    ResidualTriple r;
    r.r_null = (st.z - a.a * st.z).norm();
    r.r_link = (st.x - s.d_inv.asDiagonal() * st.z).norm();
    if (st.y.size() == 0) {
      r.r_grad = r.sum_y = kNaN;
    } else {
      // st.grad already holds grad f(x^t).
      r.r_grad = (st.y + alpha * st.grad).norm();
      r.sum_y = st.y.colwise().sum().norm();
    }
    return r;
  };
}

namespace {
void check_full_history(const std::vector<IterateState>& h) {
  for (std::size_t k = 0; k < h.size(); ++k)
    require(h[k].t == k, "accumulate: history must hold every round from t = 0 (record_every = 1)");
}
}  // namespace

std::vector<Matrix> accumulate_y(const std::vector<IterateState>& history, const MixingMatrix& a) {
  check_full_history(history);
  std::vector<Matrix> ys;
  ys.reserve(history.size());
  for (const auto& st : history) {
    Matrix step = 0.5 * (st.z - a.a * st.z);
    ys.push_back(ys.empty() ? step : Matrix(ys.back() + step));
  }
  return ys;
}

std::vector<Matrix> accumulate_u(const std::vector<IterateState>& history) {
  check_full_history(history);
  std::vector<Matrix> us;
  us.reserve(history.size());
  for (const auto& st : history) us.push_back(us.empty() ? st.z : Matrix(us.back() + st.z));
  return us;
}

// ------------------------------------------------------------------ metric

MetricObjects build_metric_objects(const MixingMatrix& a, const StationaryDistribution& s) {
  require(s.size() == a.size(), "metric: phi has the wrong length");
  return assemble(a, scaling_of(s));
}

Assumption4Check check_assumption4(const MixingMatrix& a, const StationaryDistribution& s) {
  require(s.size() == a.size(), "assumption check: phi has the wrong length");
  const Matrix n = s.d_inv.asDiagonal() * a.a_bar;
  Assumption4Check c;
  c.margin = lmin(n + n.transpose());
  c.holds = c.margin > 0.0;
  c.diagonally_dominant = true;
  for (Eigen::Index j = 0; j < a.a_bar.cols(); ++j) {
    const double off = a.a_bar.col(j).cwiseAbs().sum() - std::abs(a.a_bar(j, j));
    c.diagonally_dominant = c.diagonally_dominant && std::abs(a.a_bar(j, j)) > off;
  }
  return c;
}

Matrix stack_v(const Matrix& z, const Matrix& u) {
  require(z.rows() == u.rows() && z.cols() == u.cols(), "stack_v: z and u differ in shape");
  Matrix v(2 * z.rows(), z.cols());
  v.topRows(z.rows()) = z;
  v.bottomRows(z.rows()) = u;
  return v;
}

double g_norm(const Matrix& v, const MetricObjects& metric) {
  require(v.rows() == metric.g.rows(), "g_norm: v must have 2n rows");
  const Matrix sym = metric.g + metric.g.transpose();
  const double val = 0.5 * (v.array() * (sym * v).array()).sum();
  require(val >= -Tolerances::iterative, "g_norm: negative value " + std::to_string(val) +
                                             " means G + G^T is not positive semidefinite");
  return val;
}

Matrix optimal_v(const OptimalityTriple& triple, const MixingMatrix& a) {
  const Matrix diff = a.a_bar - a.a;
  const Matrix u = min_norm_solve(diff, triple.y).x;
  return stack_v(triple.z, u);
}

Matrix grad_f_bar(const Matrix& v, const StationaryDistribution& s, const Objective& obj) {
  const auto n = s.phi.size();
  require(v.rows() == 2 * n, "grad_f_bar: v must have 2n rows");
  const Matrix x = s.d_inv.asDiagonal() * v.topRows(n);
  Matrix out = Matrix::Zero(v.rows(), v.cols());
  out.topRows(n) = s.d_inv.asDiagonal() * grad_stack(obj, x);
  return out;
}

ContractionCheck g_norm_contraction_check(const std::vector<Matrix>& v_history,
                                          const MetricObjects& metric, const Matrix& v_star,
                                          double delta, std::size_t from_round, double floor) {
  ContractionCheck c;
  c.worst_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t t = from_round; t + 1 < v_history.size(); ++t) {
    const double now = g_norm(v_history[t] - v_star, metric);
    const double next = g_norm(v_history[t + 1] - v_star, metric);
    if (now <= floor && next <= floor) continue;
    ++c.rounds_checked;
    const double ratio = next > 0.0 ? now / next : std::numeric_limits<double>::infinity();
    c.worst_ratio = std::min(c.worst_ratio, ratio);
    if (now < (1.0 + delta) * next && !c.first_failure) {
      c.holds = false;
      c.first_failure = t;
    }
  }
  return c;
}

// ------------------------------------------------------------- certificate

std::string to_string(ConvergenceCertificate::Status s) {
  switch (s) {
    case ConvergenceCertificate::Status::feasible: return "feasible";
    case ConvergenceCertificate::Status::infeasible: return "infeasible";
    case ConvergenceCertificate::Status::not_applicable: return "not applicable";
  }
  return "?";
}

double ConvergenceCertificate::delta_at(double alpha) const {
  const double lb2 = l_bar * l_bar;
  const double first = (-1.0 / sigma + (mu_bar - eta / 2.0) * alpha - 1.5 * c1 * lb2 * sigma * alpha * alpha) /
                       (lmax_n_sym_half + 3.0 * c2 * alpha * alpha * lb2);
  const double second = (lmin_n_sym / 2.0 - c3 * sigma / 2.0 - lb2 * alpha / (2.0 * eta) -
                         1.5 * c1 * lb2 * sigma * alpha * alpha) /
                        (3.0 * c2 * (lmax_ntn + alpha * alpha * lb2));
  return std::min(first, second);
}

namespace {

/// The chain for one choice of a, with eta and sigma defaulted when unset.
ConvergenceCertificate evaluate_chain(ConvergenceCertificate c, double a, std::optional<double> eta_in,
                                      std::optional<double> sigma_in, bool assumption4) {
  const double lb = c.l_bar, mu = c.mu_bar, lb2 = lb * lb;
  c.a = a;
  c.c7 = c.lmin_n_sym * c.lmin_n_sym / (4.0 * c.c3);
  c.a_lower = (2.0 - c.c7) / (2.0 + c.c7);
  c.c8 = a * (c.c7 + 2.0) - (2.0 - c.c7);
  const double one_minus_a2 = 1.0 - a * a;
  const double k = std::sqrt(6.0 * c.c1 / one_minus_a2);
  c.ratio_required = k + (1.0 / c.c8) * std::sqrt(one_minus_a2 / (6.0 * c.c1));

  const double disc = mu > 0.0 ? 1.0 - 4.0 * lb2 / (c.c8 * mu * mu) : kNaN;
  c.eta_lower = mu * (1.0 - root(disc));
  c.eta_upper = std::min(mu * (1.0 + root(disc)), 2.0 * (mu - k * lb));
  if (std::isnan(disc)) c.eta_upper = kNaN;
  const bool eta_window = std::isfinite(c.eta_lower) && std::isfinite(c.eta_upper) && c.eta_lower < c.eta_upper;
  c.eta = eta_in ? *eta_in : eta_window ? 0.5 * (c.eta_lower + c.eta_upper) : (mu > 0.0 ? mu : lb);

  c.delta1 = (mu - c.eta / 2.0) * (mu - c.eta / 2.0) - 6.0 * c.c1 * lb2;
  c.c4 = (mu - c.eta / 2.0) + root(c.delta1);
  c.c5 = lb2 / c.eta;
  c.c6 = (2.0 * c.c4 * c.c5 + 12.0 * c.c1 * lb2) / (c.c4 * c.c4);
  c.delta3 = c.lmin_n_sym * c.lmin_n_sym - 4.0 * c.c3 * c.c6;
  c.sigma_lower = (c.lmin_n_sym - root(c.delta3)) / (2.0 * c.c3);
  c.sigma_upper = (c.lmin_n_sym + root(c.delta3)) / (2.0 * c.c3);
  const bool sigma_window = std::isfinite(c.sigma_lower) && std::isfinite(c.sigma_upper) &&
                            c.sigma_lower < c.sigma_upper;
  c.sigma = sigma_in ? *sigma_in
                     : sigma_window ? 0.5 * (c.sigma_lower + c.sigma_upper) : c.lmin_n_sym / (2.0 * c.c3);

  c.delta2 = lb2 * lb2 / (4.0 * c.eta * c.eta) - 3.0 * c.c1 * lb2 * c.sigma * (c.c3 * c.sigma - c.lmin_n_sym);
  const double denom = 3.0 * c.c1 * lb2 * c.sigma;
  c.alpha_lower = (mu - c.eta / 2.0 - root(c.delta1)) / denom;
  c.alpha_upper = std::min((mu - c.eta / 2.0 + root(c.delta1)) / denom,
                           (-lb2 / (2.0 * c.eta) + root(c.delta2)) / denom);
  if (std::isnan(c.delta1) || c.delta1 < 0.0 || std::isnan(c.delta2) || c.delta2 < 0.0) c.alpha_upper = kNaN;
  const bool alpha_window = std::isfinite(c.alpha_lower) && std::isfinite(c.alpha_upper) &&
                            c.alpha_lower < c.alpha_upper;
  c.delta_bound = alpha_window ? c.delta_at(0.5 * (c.alpha_lower + c.alpha_upper)) : kNaN;

  auto fmt = [](double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
  };
  c.chain = {
      {"positive definiteness of D^-1 A_bar + A_bar^T D^-1", assumption4,
       "lambda_min = " + fmt(c.lmin_n_sym)},
      {"a window", c.a_lower < a && a < 1.0, fmt(c.a_lower) + " < a = " + fmt(a) + " < 1"},
      {"mu_bar / L_bar ratio", mu > c.ratio_required * lb,
       "mu_bar / L_bar = " + fmt(mu / lb) + ", required > " + fmt(c.ratio_required)},
      {"eta window", eta_window && c.eta_lower < c.eta && c.eta < c.eta_upper,
       fmt(c.eta_lower) + " < eta = " + fmt(c.eta) + " < " + fmt(c.eta_upper)},
      {"Delta1 >= 0", c.delta1 >= 0.0, "Delta1 = " + fmt(c.delta1)},
      {"sigma window", c.delta3 >= 0.0 && c.sigma_lower < c.sigma && c.sigma < c.sigma_upper,
       "Delta3 = " + fmt(c.delta3) + ", " + fmt(c.sigma_lower) + " < sigma = " + fmt(c.sigma) + " < " +
           fmt(c.sigma_upper)},
      {"Delta2 >= 0", c.delta2 >= 0.0, "Delta2 = " + fmt(c.delta2)},
      {"alpha window", alpha_window, fmt(c.alpha_lower) + " < alpha < " + fmt(c.alpha_upper)},
      {"delta > 0", c.delta_bound > 0.0, "delta bound at midpoint = " + fmt(c.delta_bound)},
  };
  c.status = ConvergenceCertificate::Status::feasible;
  c.reason.clear();
  for (const auto& cond : c.chain)
    if (!cond.holds) {
      c.status = ConvergenceCertificate::Status::infeasible;
      c.reason = cond.name;
      break;
    }
  return c;
}

std::size_t conditions_passed(const ConvergenceCertificate& c) {
  std::size_t k = 0;
  while (k < c.chain.size() && c.chain[k].holds) ++k;
  return k;
}

}  // namespace

ConvergenceCertificate certificate(const MixingMatrix& a, const StationaryDistribution& s,
                                   double l_f, std::optional<double> s_f, const CertificateParams& params) {
  require(s.size() == a.size(), "certificate: phi has the wrong length");
  require(l_f >= 0.0, "certificate: L_f must be nonnegative");
  const auto n = static_cast<Eigen::Index>(a.size());
  ConvergenceCertificate c;
  c.l_f = l_f;
  c.s_f = s_f.value_or(kNaN);

  Scaling sc = scaling_of(s);
  if (is_doubly_stochastic(a.a)) {
    c.doubly_stochastic_shortcut = true;
    sc.d = sc.d_inv = Vector::Ones(n);
  }
  c.sigma_min_d = sc.d.minCoeff();
  c.sigma_max_d = sc.d.maxCoeff();
  c.l_bar = l_f / (c.sigma_min_d * c.sigma_min_d);
  c.mu_bar = s_f ? *s_f / (c.sigma_max_d * c.sigma_max_d) : kNaN;

  const MetricObjects mo = assemble(a, sc);
  const Matrix& m = mo.m;
  const Matrix& nn = mo.n;
  c.lmax_mmt = lmax(m * m.transpose());
  c.ltilde_min_mtm = smallest_nonzero_eigenvalue(m.transpose() * m);
  c.lmax_m_sym_half = lmax(0.5 * (m + m.transpose()));
  c.lmax_nnt = lmax(nn * nn.transpose());
  c.lmax_ntn = lmax(nn.transpose() * nn);
  c.lmin_n_sym = lmin(nn.transpose() + nn);
  c.lmax_n_sym_half = lmax(0.5 * (nn + nn.transpose()));

  if (n == 1 || c.ltilde_min_mtm == 0.0) {
    c.status = ConvergenceCertificate::Status::not_applicable;
    c.reason = "M = 0";
    return c;
  }
  c.c1 = c.lmax_mmt / c.ltilde_min_mtm;
  c.c2 = c.lmax_m_sym_half / c.ltilde_min_mtm;
  c.c3 = c.lmax_nnt + 3.0 * c.c1 * c.lmax_ntn;

  if (!s_f) {
    c.status = ConvergenceCertificate::Status::not_applicable;
    c.reason = "S_f unknown/zero";
    return c;
  }
  if (*s_f <= 0.0) {
    c.status = ConvergenceCertificate::Status::infeasible;
    c.reason = "no strong convexity";
    return c;
  }

  const bool assumption4 = c.lmin_n_sym > 0.0;
  std::vector<double> candidates;
  if (params.a) {
    candidates.push_back(*params.a);
  } else {
    const double c7 = c.lmin_n_sym * c.lmin_n_sym / (4.0 * c.c3);
    const double lower = (2.0 - c7) / (2.0 + c7);
    for (double a_try : {0.5, 0.7, 0.9})
      if (a_try > lower) candidates.push_back(a_try);
    if (candidates.empty()) candidates.push_back(0.9);
  }

  std::optional<ConvergenceCertificate> best;
  for (double a_try : candidates) {
    auto trial = evaluate_chain(c, a_try, params.eta, params.sigma, assumption4);
    if (!best) {
      best = std::move(trial);
      continue;
    }
    const bool better =
        trial.feasible()
            ? !best->feasible() || trial.alpha_upper - trial.alpha_lower > best->alpha_upper - best->alpha_lower
            : !best->feasible() && conditions_passed(trial) > conditions_passed(*best);
    if (better) best = std::move(trial);
  }
  return *best;
}

std::string certificate_report(const ConvergenceCertificate& c) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "status = " << to_string(c.status) << '\n';
  if (!c.reason.empty())
    os << (c.status == ConvergenceCertificate::Status::not_applicable ? "not applicable: " : "first violated: ")
       << c.reason << '\n';
  if (c.doubly_stochastic_shortcut) os << "note = A is doubly stochastic, D = I\n";
  os << "sigma_min(D) = " << c.sigma_min_d << '\n'
     << "sigma_max(D) = " << c.sigma_max_d << '\n'
     << "L_f = " << c.l_f << '\n'
     << "S_f = " << c.s_f << '\n'
     << "L_bar = " << c.l_bar << '\n'
     << "mu_bar = " << c.mu_bar << '\n'
     << "lambda_max(M M^T) = " << c.lmax_mmt << '\n'
     << "lambda~_min(M^T M) = " << c.ltilde_min_mtm << '\n'
     << "lambda_max((M + M^T)/2) = " << c.lmax_m_sym_half << '\n'
     << "lambda_max(N N^T) = " << c.lmax_nnt << '\n'
     << "lambda_max(N^T N) = " << c.lmax_ntn << '\n'
     << "lambda_min(N^T + N) = " << c.lmin_n_sym << '\n'
     << "lambda_max((N + N^T)/2) = " << c.lmax_n_sym_half << '\n';
  if (c.status == ConvergenceCertificate::Status::not_applicable || c.chain.empty()) return os.str();
  os << "c1 = " << c.c1 << '\n' << "c2 = " << c.c2 << '\n' << "c3 = " << c.c3 << '\n'
     << "c4 = " << c.c4 << '\n' << "c5 = " << c.c5 << '\n' << "c6 = " << c.c6 << '\n'
     << "c7 = " << c.c7 << '\n' << "c8 = " << c.c8 << '\n'
     << "Delta1 = " << c.delta1 << '\n' << "Delta2 = " << c.delta2 << '\n'
     << "Delta3 = " << c.delta3 << '\n'
     << "a = " << c.a << "  (window " << c.a_lower << " < a < 1)\n"
     << "required mu_bar/L_bar > " << c.ratio_required << '\n'
     << "eta = " << c.eta << "  (window " << c.eta_lower << " .. " << c.eta_upper << ")\n"
     << "sigma = " << c.sigma << "  (window " << c.sigma_lower << " .. " << c.sigma_upper << ")\n"
     << "alpha interval = (" << c.alpha_lower << ", " << c.alpha_upper << ")\n"
     << "delta bound = " << c.delta_bound << '\n'
     << "chain:\n";
  for (const auto& cond : c.chain)
    os << "  [" << (cond.holds ? "ok  " : "FAIL") << "] " << cond.name << ": " << cond.detail << '\n';
  return os.str();
}

// ------------------------------------------------------------------ rates

RateFit fit_linear_rate(std::span<const double> t, std::span<const double> values) {
  require(t.size() == values.size(), "fit_linear_rate: t and values differ in length");
  require(values.size() >= 10, "fit_linear_rate: need at least 10 samples, got " + std::to_string(values.size()));
  const std::size_t k = values.size();
  double mt = 0.0, ml = 0.0;
  std::vector<double> logs(k);
  for (std::size_t i = 0; i < k; ++i) {
    require(values[i] > 0.0 && std::isfinite(values[i]), "fit_linear_rate: values must be positive and finite");
    logs[i] = std::log(values[i]);
    mt += t[i];
    ml += logs[i];
  }
  mt /= static_cast<double>(k);
  ml /= static_cast<double>(k);
  double stt = 0.0, stl = 0.0, sll = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    stt += (t[i] - mt) * (t[i] - mt);
    stl += (t[i] - mt) * (logs[i] - ml);
    sll += (logs[i] - ml) * (logs[i] - ml);
  }
  require(stt > 0.0, "fit_linear_rate: t values must not all be equal");
  const double slope = stl / stt;
  RateFit fit;
  fit.samples = k;
  fit.rate = std::exp(slope);
  double ssr = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double e = logs[i] - (ml + slope * (t[i] - mt));
    ssr += e * e;
  }
  fit.r2 = sll > 0.0 ? 1.0 - ssr / sll : 1.0;
  return fit;
}

RateFit fit_linear_rate(const TrajectoryRecord& rec, std::size_t t_begin, std::size_t t_end) {
  std::vector<double> t, v;
  for (const auto& row : rec.rows)
    if (row.t >= t_begin && row.t <= t_end) {
      t.push_back(static_cast<double>(row.t));
      v.push_back(row.err_opt);
    }
  return fit_linear_rate(t, v);
}

}  // namespace extrapush
