#include "extrapush/graph.hpp"

#include "extrapush/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace extrapush {

DirectedGraph::DirectedGraph(std::size_t n, std::vector<Edge> edges)
    : n_(n), edges_(std::move(edges)), in_(n), out_(n) {
  require(n >= 1, "graph needs at least one node");
  for (const auto& [from, to] : edges_) {
    require(from < n && to < n, "edge (" + std::to_string(from) + ", " + std::to_string(to) +
                                    ") has a node index outside [0, " + std::to_string(n) + ")");
    require(from != to, "self-loops are implicit; edge (" + std::to_string(from) + ", " +
                            std::to_string(to) + ") must not be listed");
  }
  std::sort(edges_.begin(), edges_.end());
  const auto dup = std::adjacent_find(edges_.begin(), edges_.end());
  if (dup != edges_.end())
    throw Error("duplicate edge (" + std::to_string(dup->first) + ", " + std::to_string(dup->second) + ")");

  for (std::size_t i = 0; i < n; ++i) {
    in_[i].push_back(i);
    out_[i].push_back(i);
  }
  for (const auto& [from, to] : edges_) {
    out_[from].push_back(to);
    in_[to].push_back(from);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(in_[i].begin(), in_[i].end());
    std::sort(out_[i].begin(), out_[i].end());
  }
}

MixingMatrix::MixingMatrix(Matrix a_in) : a(std::move(a_in)) {
  require(a.rows() == a.cols() && a.rows() >= 1, "mixing matrix must be square and nonempty");
  const auto n = a.rows();
  a_bar = 0.5 * (Matrix::Identity(n, n) + a);
}

StationaryDistribution::StationaryDistribution(Vector phi_in, std::size_t iterations_used)
    : phi(std::move(phi_in)), iterations(iterations_used) {
  const double n = static_cast<double>(phi.size());
  d = n * phi;
  d_inv = d.cwiseInverse();
}

std::string MatrixViolation::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::not_square: os << "matrix is not square"; break;
    case Kind::non_finite: os << "entry (" << row << ", " << column << ") is not finite"; break;
    case Kind::negative_entry:
      os << "entry (" << row << ", " << column << ") is negative: " << deviation;
      break;
    case Kind::column_sum:
      os << "column " << column << " sums to 1 " << (deviation >= 0 ? "+ " : "- ")
         << std::abs(deviation);
      break;
  }
  return os.str();
}

MixingMatrix build_out_degree_mixing(const DirectedGraph& g) {
  const std::size_t n = g.size();
  Matrix a = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : g.in_neighbors(i)) a(i, j) = 1.0 / static_cast<double>(g.out_degree(j));
  }
  return MixingMatrix(std::move(a));
}

std::vector<MatrixViolation> validate_column_stochastic(const Matrix& m, double tol) {
  using Kind = MatrixViolation::Kind;
  std::vector<MatrixViolation> out;
  if (m.rows() != m.cols() || m.rows() == 0) {
    out.push_back({Kind::not_square, 0, 0, 0.0});
    return out;
  }
  const auto n = static_cast<std::size_t>(m.rows());
  for (std::size_t j = 0; j < n; ++j) {
    double sum = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = m(i, j);
      if (!std::isfinite(v)) {
        out.push_back({Kind::non_finite, i, j, v});
        finite = false;
        continue;
      }
      if (v < 0.0) out.push_back({Kind::negative_entry, i, j, v});
      sum += v;
    }
    if (finite && std::abs(sum - 1.0) > tol) out.push_back({Kind::column_sum, 0, j, sum - 1.0});
  }
  return out;
}

MixingMatrix parse_mixing(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      // strtod accepts "nan"/"inf", which the validator then rejects by name.
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      require(end != tok.c_str() && *end == '\0', "not a number in matrix file: '" + tok + "'");
      row.push_back(v);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  require(!rows.empty(), "matrix file is empty");
  const std::size_t n = rows.size();
  for (std::size_t i = 0; i < n; ++i) {
    require(rows[i].size() == n, "matrix is not square: row " + std::to_string(i) + " has " +
                                     std::to_string(rows[i].size()) + " entries, expected " +
                                     std::to_string(n));
  }
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = rows[i][j];

  const auto violations = validate_column_stochastic(a);
  if (!violations.empty()) {
    std::string msg = "invalid mixing matrix:";
    for (const auto& v : violations) msg += "\n  " + v.describe();
    throw Error(msg);
  }
  return MixingMatrix(std::move(a));
}

namespace {
std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}
}  // namespace

MixingMatrix load_mixing(const std::filesystem::path& path) { return parse_mixing(slurp(path)); }

void save_mixing(const MixingMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), "cannot write " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.a.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.a.cols(); ++j) out << (j ? " " : "") << m.a(i, j);
    out << '\n';
  }
}

DirectedGraph parse_graph(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  long long n = -1;
  std::vector<DirectedGraph::Edge> edges;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    if (n < 0) {
      if (!(ls >> n)) continue;
      require(n >= 1, "graph file: node count must be >= 1");
      continue;
    }
    long long i = 0, j = 0;
    if (!(ls >> i)) continue;
    require(static_cast<bool>(ls >> j), "graph file line " + std::to_string(lineno) +
                                            ": expected 'i j'");
    require(i >= 0 && j >= 0, "graph file line " + std::to_string(lineno) + ": negative index");
    edges.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  }
  require(n >= 1, "graph file has no node count");
  return DirectedGraph(static_cast<std::size_t>(n), std::move(edges));
}

DirectedGraph load_graph(const std::filesystem::path& path) { return parse_graph(slurp(path)); }

DirectedGraph support_graph(const Matrix& a) {
  std::vector<DirectedGraph::Edge> edges;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (i != j && a(i, j) > 0.0)
        edges.emplace_back(static_cast<std::size_t>(j), static_cast<std::size_t>(i));
  return DirectedGraph(static_cast<std::size_t>(a.rows()), std::move(edges));
}

namespace {
std::size_t reach_count(std::size_t n, std::size_t start,
                        const std::vector<std::vector<std::size_t>>& adj) {
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{start};
  seen[start] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (auto u : adj[v]) {
      if (!seen[u]) {
        seen[u] = 1;
        ++count;
        stack.push_back(u);
      }
    }
  }
  return count;
}
}  // namespace

bool is_strongly_connected(const DirectedGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::vector<std::size_t>> fwd(n), bwd(n);
  for (const auto& [from, to] : g.edges()) {
    fwd[from].push_back(to);
    bwd[to].push_back(from);
  }
  return reach_count(n, 0, fwd) == n && reach_count(n, 0, bwd) == n;
}

StationaryDistribution stationary_distribution(const MixingMatrix& m, double tol,
                                               std::size_t max_power) {
  const auto n = static_cast<Eigen::Index>(m.size());
  Vector v = Vector::Constant(n, 1.0 / static_cast<double>(n));
  for (std::size_t k = 1; k <= max_power; ++k) {
    Vector next = m.a * v;
    const double change = (next - v).lpNorm<Eigen::Infinity>();
    v = std::move(next);
    if (change <= tol) {
      v /= v.sum();
      return StationaryDistribution(std::move(v), k);
    }
  }
  throw Error("stationary distribution: power iteration did not converge within " +
              std::to_string(max_power) + " products");
}

std::vector<ProfilePoint> power_convergence_profile(const MixingMatrix& m,
                                                    const StationaryDistribution& s,
                                                    std::size_t t_max) {
  const auto n = static_cast<Eigen::Index>(m.size());
  const Matrix limit = s.phi * Vector::Ones(n).transpose();
  Matrix power = Matrix::Identity(n, n);
  std::vector<ProfilePoint> out;
  out.reserve(t_max + 1);
  for (std::size_t t = 0; t <= t_max; ++t) {
    if (t > 0) power = m.a * power;
    out.push_back({t, (power - limit).norm()});
  }
  return out;
}

double xi_diagnostic(const MixingMatrix& m, std::size_t t_max) {
  Vector w = Vector::Ones(static_cast<Eigen::Index>(m.size()));
  double xi = 1.0;
  for (std::size_t t = 1; t <= t_max; ++t) {
    w = m.a * w;
    xi = std::min(xi, w.minCoeff());
  }
  return xi;
}

NullSpaceResiduals null_space_residuals(const MixingMatrix& m, const Vector& phi,
                                        const Matrix& z) {
  require(z.rows() == m.a.rows() && phi.size() == m.a.rows(), "null_space_check: shape mismatch");
  const Matrix mixing = z - m.a * z;
  const Matrix stationary = z - phi * z.colwise().sum();
  return {mixing.norm(), stationary.norm()};
}

double null_space_check(const MixingMatrix& m, const Vector& phi, const Matrix& z) {
  return null_space_residuals(m, phi, z).max();
}

DirectedGraph paper_fig1_graph() {
  // Read off the columns of the printed matrix: column j is nonzero on N_j^out.
  return DirectedGraph(5, {{0, 1}, {0, 2}, {0, 4}, {1, 0}, {1, 3}, {1, 4}, {2, 4}, {3, 0},
                           {4, 1}, {4, 2}});
}

Matrix paper_fig1_matrix() {
  Matrix a(5, 5);
  const double q = 1.0 / 4.0, h = 1.0 / 2.0, r = 1.0 / 3.0;
  // clang-format off
  a << q, q, 0, h, 0,
       q, q, 0, 0, r,
       q, 0, h, 0, r,
       0, q, 0, h, 0,
       q, q, h, 0, r;
  // clang-format on
  return a;
}

DirectedGraph complete_digraph(std::size_t n) {
  std::vector<DirectedGraph::Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) edges.emplace_back(i, j);
  return DirectedGraph(n, std::move(edges));
}

DirectedGraph random_strongly_connected(std::size_t n, double extra_edge_probability,
                                        std::uint64_t seed) {
  require(n >= 1, "random graph needs n >= 1");
  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<char> present(n * n, 0);
  std::vector<DirectedGraph::Edge> edges;
  auto add = [&](std::size_t from, std::size_t to) {
    if (from == to || present[from * n + to]) return;
    present[from * n + to] = 1;
    edges.emplace_back(from, to);
  };
  for (std::size_t k = 0; n > 1 && k < n; ++k) add(order[k], order[(k + 1) % n]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && rng.uniform() < extra_edge_probability) add(i, j);
  return DirectedGraph(n, std::move(edges));
}

}  // namespace extrapush
