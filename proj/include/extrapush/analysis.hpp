#pragma once

// Optimality residuals, the y/u sequences, the (G, S, N, M) metric, the
// positive-definiteness assumption on D^-1 A_bar, the linear-rate step-size
// certificate, and log-linear rate fitting.

#include "extrapush/graph.hpp"
#include "extrapush/objective.hpp"
#include "extrapush/solver.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace extrapush {

// ---------------------------------------------------------------- residuals

/// A point of the optimality set in stacked form.
struct OptimalityTriple {
  Matrix z;  ///< D 1 x*^T
  Matrix y;  ///< -alpha grad f(1 x*^T)
  Matrix x;  ///< 1 x*^T
};

OptimalityTriple optimal_triple(const StationaryDistribution& s, const Objective& obj,
                                const Vector& x_star, double alpha);

/// r_null = ||(I - A) z||, r_grad = ||y + alpha grad f(x)||, r_link = ||x - D^-1 z||,
/// sum_y = ||1^T y||. r_grad and sum_y are NaN when the state carries no y.
ResidualTriple residual_opt(const IterateState& state, const MixingMatrix& a,
                            const StationaryDistribution& s, double alpha, const Objective& obj);

/// Same as residual_opt with z, y, x given directly.
ResidualTriple residual_opt(const Matrix& z, const Matrix& y, const Matrix& x, const MixingMatrix& a,
                            const StationaryDistribution& s, double alpha, const Objective& obj);

/// Probe for RunHooks; reuses the gradient cached in the state. The
/// referenced objects must outlive the run.
ResidualProbe make_residual_probe(const MixingMatrix& a, const StationaryDistribution& s,
                                  double alpha);

/// y^t = sum_{k<=t} (A_bar - A) z^k over a full history (t = 0, 1, 2, ...).
/// Throws on a gap in the round numbers.
std::vector<Matrix> accumulate_y(const std::vector<IterateState>& history, const MixingMatrix& a);
/// u^t = sum_{k<=t} z^k.
std::vector<Matrix> accumulate_u(const std::vector<IterateState>& history);

// ------------------------------------------------------------------ metric

struct MetricObjects {
  Matrix n;       ///< D^-1 A_bar
  Matrix m;       ///< D^-1 (A_bar - A)
  Matrix g;       ///< blkdiag(N^T, M), 2n x 2n
  Matrix s;       ///< [[0, M], [-M^T, 0]]
  Matrix lambda;  ///< I - (D^1/2 A^T D^-1/2 + D^-1/2 A D^1/2) / 2; M + M^T = D^-1/2 Lambda D^-1/2
  double min_eig_m_sym = 0.0;  ///< lambda_min(M + M^T)
  double min_eig_g_sym = 0.0;  ///< lambda_min(G + G^T)
  bool m_sym_psd = false;
  bool g_sym_psd = false;
};

/// PSD checks use Tolerances::iterative as the negative slack.
MetricObjects build_metric_objects(const MixingMatrix& a, const StationaryDistribution& s);

struct Assumption4Check {
  bool holds = false;
  double margin = 0.0;  ///< lambda_min(D^-1 A_bar + A_bar^T D^-1)
  /// A_bar strictly column-diagonally dominant (a sufficient condition).
  bool diagonally_dominant = false;
};
Assumption4Check check_assumption4(const MixingMatrix& a, const StationaryDistribution& s);

/// v = (z; u), 2n x p.
Matrix stack_v(const Matrix& z, const Matrix& u);
/// <v, G v> summed over columns, evaluated as (1/2) <v, (G + G^T) v>.
/// Throws if the result is below -Tolerances::iterative.
double g_norm(const Matrix& v, const MetricObjects& metric);

/// v* = (z*; u*) with u* the min-norm solution of (A_bar - A) u* = y*.
Matrix optimal_v(const OptimalityTriple& triple, const MixingMatrix& a);

/// Stacked gradient of f_bar at v: (D^-1 grad f(D^-1 z); 0).
Matrix grad_f_bar(const Matrix& v, const StationaryDistribution& s, const Objective& obj);

struct ContractionCheck {
  bool holds = true;
  std::size_t rounds_checked = 0;
  std::optional<std::size_t> first_failure;
  /// min over checked t of ||v^t - v*||_G^2 / ||v^{t+1} - v*||_G^2.
  double worst_ratio = 0.0;
};

/// Checks ||v^t - v*||_G^2 >= (1 + delta) ||v^{t+1} - v*||_G^2 for every t >= from_round.
/// Pairs where both sides are below `floor` are skipped (converged to rounding).
ContractionCheck g_norm_contraction_check(const std::vector<Matrix>& v_history,
                                          const MetricObjects& metric, const Matrix& v_star,
                                          double delta, std::size_t from_round = 2,
                                          double floor = 1e-24);

// ------------------------------------------------------------- certificate

struct CertificateParams {
  std::optional<double> a;
  std::optional<double> eta;
  std::optional<double> sigma;
};

struct ChainCondition {
  std::string name;
  bool holds = false;
  std::string detail;
};

struct ConvergenceCertificate {
  enum class Status { feasible, infeasible, not_applicable };
  Status status = Status::not_applicable;
  /// First violated condition, or the not-applicable reason.
  std::string reason;

  bool doubly_stochastic_shortcut = false;  ///< D = I
  double sigma_min_d = 0.0, sigma_max_d = 0.0;
  double l_f = 0.0, s_f = 0.0;
  double l_bar = 0.0, mu_bar = 0.0;

  // Spectral inputs.
  double lmax_mmt = 0.0;          ///< lambda_max(M M^T)
  double ltilde_min_mtm = 0.0;    ///< smallest nonzero eigenvalue of M^T M
  double lmax_m_sym_half = 0.0;   ///< lambda_max((M + M^T) / 2)
  double lmax_nnt = 0.0;          ///< lambda_max(N N^T)
  double lmax_ntn = 0.0;          ///< lambda_max(N^T N)
  double lmin_n_sym = 0.0;        ///< lambda_min(N^T + N)
  double lmax_n_sym_half = 0.0;   ///< lambda_max((N + N^T) / 2)

  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0, c6 = 0.0, c7 = 0.0, c8 = 0.0;
  double delta1 = 0.0, delta2 = 0.0, delta3 = 0.0;

  double a = 0.0, eta = 0.0, sigma = 0.0;
  double a_lower = 0.0;  ///< (2 - c7) / (2 + c7)
  double eta_lower = 0.0, eta_upper = 0.0;
  double sigma_lower = 0.0, sigma_upper = 0.0;
  double alpha_lower = 0.0, alpha_upper = 0.0;
  /// Required mu_bar / L_bar ratio for the chosen a.
  double ratio_required = 0.0;
  /// delta bound at the interval midpoint.
  double delta_bound = 0.0;

  std::vector<ChainCondition> chain;

  bool feasible() const { return status == Status::feasible; }
  bool certifies(double alpha) const {
    return feasible() && alpha > alpha_lower && alpha < alpha_upper;
  }
  /// The delta bound at a given alpha (same min expression).
  double delta_at(double alpha) const;
};

std::string to_string(ConvergenceCertificate::Status s);

/// s_f = nullopt means no strong convexity constant is known (Huber).
/// Parameters left unset are chosen automatically: a is scanned over {0.5, 0.7, 0.9}
/// within its window, eta and sigma sit at the midpoints of their windows
/// (eta = mu_bar and sigma = lambda_min(N^T + N) / (2 c3) when a window is empty).
ConvergenceCertificate certificate(const MixingMatrix& a, const StationaryDistribution& s,
                                   double l_f, std::optional<double> s_f,
                                   const CertificateParams& params = {});

/// Multi-line listing of constants, windows and the condition chain.
std::string certificate_report(const ConvergenceCertificate& c);

// ------------------------------------------------------------------ rates

struct RateFit {
  double rate = 1.0;  ///< exp(slope of log value vs t)
  double r2 = 1.0;
  std::size_t samples = 0;
};

/// Least-squares fit of log(values) against t. Needs >= 10 samples, all positive.
RateFit fit_linear_rate(std::span<const double> t, std::span<const double> values);
/// Fit of err_opt over recorded rows with t in [t_begin, t_end].
RateFit fit_linear_rate(const TrajectoryRecord& rec, std::size_t t_begin, std::size_t t_end);

}  // namespace extrapush
