#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

std::vector<double> jacobi_eigenvalues(Matrix a, double tol, int max_sweeps) {
  const auto n = a.rows();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0, scale = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) off += a(i, j) * a(i, j);
        scale += a(i, j) * a(i, j);
      }
    if (off <= tol * tol * std::max(scale, 1e-300)) break;
    for (Eigen::Index p = 0; p < n - 1; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

Vector stationary_direct(const Matrix& a) {
  const auto n = a.rows();
  Matrix lhs = a - Matrix::Identity(n, n);
  Vector rhs = Vector::Zero(n);
  lhs.row(n - 1).setOnes();
  rhs(n - 1) = 1.0;
  return lhs.fullPivLu().solve(rhs);
}

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector hi = x, lo = x;
    hi(k) += h;
    lo(k) -= h;
    g(k) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

namespace {

Matrix gradients(const extrapush::Objective& obj, const Matrix& x) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<double> xi(x.row(i).data(), x.row(i).data() + x.cols());
    std::vector<double> gi(static_cast<std::size_t>(x.cols()));
    obj.gradient(static_cast<std::size_t>(i), xi, gi);
    for (Eigen::Index c = 0; c < x.cols(); ++c) g(i, c) = gi[static_cast<std::size_t>(c)];
  }
  return g;
}

Matrix times(const Matrix& a, const Matrix& z) {
  Matrix out = Matrix::Zero(a.rows(), z.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index c = 0; c < z.cols(); ++c) out(i, c) += a(i, j) * z(j, c);
  return out;
}

Vector times(const Matrix& a, const Vector& w) {
  Vector out = Vector::Zero(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(i) += a(i, j) * w(j);
  return out;
}

Matrix divide_rows(const Matrix& z, const Vector& w) {
  Matrix x = z;
  for (Eigen::Index i = 0; i < z.rows(); ++i) x.row(i) /= w(i);
  return x;
}

}  // namespace

std::vector<Matrix> extrapush_loops(const Matrix& a, const extrapush::Objective& obj, double alpha,
                                    const Matrix& z0, std::size_t rounds) {
  const auto n = a.rows();
  const Matrix a_bar = 0.5 * (Matrix::Identity(n, n) + a);
  const Matrix two = Matrix::Identity(n, n) + a;
  Vector w = Vector::Ones(n);
  Matrix z_prev = z0, x_prev = z0;
  Matrix g_prev = gradients(obj, x_prev);
  std::vector<Matrix> xs{x_prev};
  if (rounds == 0) return xs;
  Matrix z = times(a, z_prev) - alpha * g_prev;
  w = times(a, w);
  Matrix x = divide_rows(z, w);
  xs.push_back(x);
  for (std::size_t t = 1; t < rounds; ++t) {
    const Matrix g = gradients(obj, x);
    const Matrix z_next = times(two, z) - times(a_bar, z_prev) - alpha * (g - g_prev);
    w = times(a, w);
    z_prev = z;
    z = z_next;
    g_prev = g;
    x = divide_rows(z, w);
    xs.push_back(x);
  }
  return xs;
}

std::vector<Matrix> extra_loops(const Matrix& w, const extrapush::Objective& obj, double alpha,
                                const Matrix& x0, std::size_t rounds) {
  const auto n = w.rows();
  const Matrix w_tilde = 0.5 * (Matrix::Identity(n, n) + w);
  std::vector<Matrix> xs{x0};
  if (rounds == 0) return xs;
  Matrix x_prev = x0;
  Matrix g_prev = gradients(obj, x0);
  Matrix x = times(w, x0) - alpha * g_prev;
  xs.push_back(x);
  for (std::size_t t = 1; t < rounds; ++t) {
    const Matrix g = gradients(obj, x);
    const Matrix next = x + times(w, x) - times(w_tilde, x_prev) - alpha * (g - g_prev);
    x_prev = x;
    x = next;
    g_prev = g;
    xs.push_back(x);
  }
  return xs;
}

namespace {

double lmax(const Matrix& sym) { return jacobi_eigenvalues(sym).back(); }
double lmin(const Matrix& sym) { return jacobi_eigenvalues(sym).front(); }

double smallest_positive(const Matrix& psd) {
  const auto ev = jacobi_eigenvalues(psd);
  const double cut = 1e-10 * std::max(ev.back(), 0.0);
  for (double v : ev)
    if (v > cut) return v;
  return 0.0;
}

double sqrt_or_nan(double v) { return v >= 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

ChainConstants chain_constants(const Matrix& a_mix, double l_f, double s_f, double a, double eta, double sigma) {
  const auto n = a_mix.rows();
  const Vector phi = stationary_direct(a_mix);
  bool doubly = true;
  for (Eigen::Index i = 0; i < n; ++i) doubly = doubly && std::abs(a_mix.row(i).sum() - 1.0) <= 1e-12;
  Vector d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = doubly ? 1.0 : static_cast<double>(n) * phi(i);

  Matrix d_inv = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) d_inv(i, i) = 1.0 / d(i);
  const Matrix eye = Matrix::Identity(n, n);
  const Matrix a_bar = 0.5 * (eye + a_mix);
  const Matrix big_n = d_inv * a_bar;
  const Matrix big_m = d_inv * (a_bar - a_mix);

  ChainConstants k{};
  k.sigma_min_d = d.minCoeff();
  k.sigma_max_d = d.maxCoeff();
  k.l_bar = l_f / (k.sigma_min_d * k.sigma_min_d);
  k.mu_bar = s_f / (k.sigma_max_d * k.sigma_max_d);
  k.lmax_mmt = lmax(big_m * big_m.transpose());
  k.ltilde_min_mtm = smallest_positive(big_m.transpose() * big_m);
  k.lmax_m_sym_half = lmax(0.5 * (big_m + big_m.transpose()));
  k.lmax_nnt = lmax(big_n * big_n.transpose());
  k.lmax_ntn = lmax(big_n.transpose() * big_n);
  k.lmin_n_sym = lmin(big_n.transpose() + big_n);
  k.lmax_n_sym_half = lmax(0.5 * (big_n + big_n.transpose()));

  const double lb = k.l_bar, mu = k.mu_bar, lam = k.lmin_n_sym;
  k.c1 = k.lmax_mmt / k.ltilde_min_mtm;
  k.c2 = k.lmax_m_sym_half / k.ltilde_min_mtm;
  k.c3 = k.lmax_nnt + 3.0 * k.c1 * k.lmax_ntn;
  k.c7 = lam * lam / (4.0 * k.c3);
  k.c8 = a * (k.c7 + 2.0) - (2.0 - k.c7);
  k.a_lower = (2.0 - k.c7) / (2.0 + k.c7);
  k.ratio_required = std::sqrt(6.0 * k.c1 / (1.0 - a * a)) + std::sqrt((1.0 - a * a) / (6.0 * k.c1)) / k.c8;

  const double inner = 1.0 - 4.0 * lb * lb / (k.c8 * mu * mu);
  k.eta_lower = mu * (1.0 - sqrt_or_nan(inner));
  k.eta_upper = std::min(mu * (1.0 + sqrt_or_nan(inner)), 2.0 * (mu - std::sqrt(6.0 * k.c1 / (1.0 - a * a)) * lb));
  if (std::isnan(inner)) k.eta_upper = std::numeric_limits<double>::quiet_NaN();

  k.delta1 = std::pow(mu - eta / 2.0, 2) - 6.0 * k.c1 * lb * lb;
  k.c4 = (mu - eta / 2.0) + sqrt_or_nan(k.delta1);
  k.c5 = lb * lb / eta;
  k.c6 = (2.0 * k.c4 * k.c5 + 12.0 * k.c1 * lb * lb) / (k.c4 * k.c4);
  k.delta3 = lam * lam - 4.0 * k.c3 * k.c6;
  k.sigma_lower = (lam - sqrt_or_nan(k.delta3)) / (2.0 * k.c3);
  k.sigma_upper = (lam + sqrt_or_nan(k.delta3)) / (2.0 * k.c3);
  k.delta2 = std::pow(lb, 4) / (4.0 * eta * eta) - 3.0 * k.c1 * lb * lb * sigma * (k.c3 * sigma - lam);
  const double den = 3.0 * k.c1 * lb * lb * sigma;
  k.alpha_lower = (mu - eta / 2.0 - sqrt_or_nan(k.delta1)) / den;
  k.alpha_upper = std::min((mu - eta / 2.0 + sqrt_or_nan(k.delta1)) / den,
                           (-lb * lb / (2.0 * eta) + sqrt_or_nan(k.delta2)) / den);
  if (std::isnan(k.delta1) || k.delta1 < 0.0 || std::isnan(k.delta2) || k.delta2 < 0.0)
    k.alpha_upper = std::numeric_limits<double>::quiet_NaN();
  return k;
}

double rel(double x, double y) {
  if (std::isnan(x) && std::isnan(y)) return 0.0;
  if (x == y) return 0.0;
  return std::abs(x - y) / std::max(std::abs(x), std::abs(y));
}

}  // namespace oracle
