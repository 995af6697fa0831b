#include "extrapush/experiment.hpp"

#include "extrapush/linalg.hpp"
#include "extrapush/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace extrapush {

namespace {

constexpr int kFormatVersion = 1;
constexpr int kPlacementRetries = 60;

nlohmann::json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Vector r = m.row(i).transpose();
    rows.push_back(to_json(r));
  }
  return rows;
}

Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index cols) {
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Vector r = vector_from_json(j.at(static_cast<std::size_t>(i)));
    require(r.size() == cols, "instance file: ragged matrix row");
    m.row(i) = r.transpose();
  }
  return m;
}

}  // namespace

std::string to_string(ProblemKind kind) {
  return kind == ProblemKind::least_squares ? "ls" : "huber";
}

ProblemKind parse_problem_kind(const std::string& s) {
  if (s == "ls" || s == "least-squares") return ProblemKind::least_squares;
  if (s == "huber") return ProblemKind::huber;
  throw Error("unknown problem kind '" + s + "' (expected ls or huber)");
}

Matrix ExperimentInstance::stacked_optimum() const {
  return Vector::Ones(static_cast<Eigen::Index>(agents())) * x_star.transpose();
}

Vector agent_residuals(const LeastSquaresData& d, std::size_t agent, const Vector& x) {
  return d.blocks.at(agent) * x - d.targets.at(agent);
}

ExperimentInstance generate_experiment(const GeneratorOptions& o) {
  require(o.n >= 1 && o.p >= 1 && o.m >= 1, "experiment dimensions must be positive");
  require(o.xi > 0.0, "Huber threshold must be positive");
  Rng rng(o.seed);
  const auto n = static_cast<Eigen::Index>(o.n), p = static_cast<Eigen::Index>(o.p),
             m = static_cast<Eigen::Index>(o.m);
  const double scale = 1.0 / std::sqrt(static_cast<double>(o.m));

  ExperimentInstance inst;
  inst.kind = o.kind;
  inst.seed = o.seed;
  inst.xi = o.xi;
  inst.l1_depth = o.kind == ProblemKind::huber ? o.l1_depth : 0.0;

  // Draw order is part of the format: blocks, x_true, noise.
  for (Eigen::Index i = 0; i < n; ++i) {
    Matrix b(m, p);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < p; ++c) b(r, c) = scale * rng.unit_variance();
    inst.data.blocks.push_back(std::move(b));
  }
  Vector x_true(p);
  for (Eigen::Index c = 0; c < p; ++c) x_true[c] = rng.unit_variance();
  std::vector<Vector> noise;
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector e(m);
    for (Eigen::Index r = 0; r < m; ++r) e[r] = rng.uniform(-1.0, 1.0);
    noise.push_back(std::move(e));
  }

  if (o.kind == ProblemKind::least_squares) {
    for (Eigen::Index i = 0; i < n; ++i)
      inst.data.targets.push_back(inst.data.blocks[i] * x_true + o.noise * noise[i]);
    const auto sol = ls_exact_solution(inst.data);
    inst.x_star = sol.x;
    inst.rank_deficient = sol.rank_deficient;
    inst.x0 = Matrix::Zero(n, p);
    return inst;
  }

  // Huber: residuals at the least-squares solution are linear in the noise, so
  // measure them for the raw noise and rescale once.
  LeastSquaresData probe = inst.data;
  probe.targets = noise;
  const Vector xn = ls_exact_solution(probe).x;
  double worst = 0.0;
  for (std::size_t i = 0; i < o.n; ++i)
    worst = std::max(worst, agent_residuals(probe, i, xn).lpNorm<Eigen::Infinity>());
  const double noise_scale = worst > 0.8 * o.xi ? 0.8 * o.xi / worst : 1.0;
  for (Eigen::Index i = 0; i < n; ++i)
    inst.data.targets.push_back(inst.data.blocks[i] * x_true + noise_scale * noise[i]);
  const auto sol = ls_exact_solution(inst.data);
  inst.x_star = sol.x;
  inst.rank_deficient = sol.rank_deficient;

  for (std::size_t i = 0; i < o.n; ++i) {
    const Vector r = agent_residuals(inst.data, i, inst.x_star);
    require(r.lpNorm<Eigen::Infinity>() < o.xi, "Huber placement: optimum left the quadratic zone");
  }

  inst.x0.resize(n, p);
  for (std::size_t i = 0; i < o.n; ++i) {
    const Matrix& b = inst.data.blocks[i];
    const Vector r = agent_residuals(inst.data, i, inst.x_star);
    Vector push(r.size());
    for (Eigen::Index j = 0; j < r.size(); ++j) push[j] = (r[j] < 0 ? -1.0 : 1.0) * o.l1_depth * o.xi;
    Vector d = min_norm_solve(b, push).x.col(0);
    // Exact when B_(i) is wide with full row rank; otherwise grow the offset.
    int tries = 0;
    while ((r + b * d).cwiseAbs().minCoeff() < 1.2 * o.xi) {
      require(++tries <= kPlacementRetries,
              "Huber placement infeasible: cannot push agent " + std::to_string(i) +
                  " into the linear zone; choose m_i < p");
      d *= 2.0;
    }
    inst.x0.row(static_cast<Eigen::Index>(i)) = (inst.x_star + d).transpose();
  }
  return inst;
}

std::unique_ptr<Objective> make_objective(const ExperimentInstance& inst) {
  if (inst.kind == ProblemKind::least_squares) return std::make_unique<LeastSquaresObjective>(inst.data);
  return std::make_unique<HuberObjective>(HuberData{inst.data, inst.xi});
}

void save_instance(const ExperimentInstance& inst, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "extrapush-instance";
  j["version"] = kFormatVersion;
  j["kind"] = to_string(inst.kind);
  j["n"] = inst.agents();
  j["p"] = inst.dimension();
  j["seed"] = inst.seed;
  j["xi"] = inst.xi;
  j["l1_depth"] = inst.l1_depth;
  j["rank_deficient"] = inst.rank_deficient;
  j["x_star"] = to_json(inst.x_star);
  j["x0"] = to_json(inst.x0);
  nlohmann::json agents = nlohmann::json::array();
  for (std::size_t i = 0; i < inst.agents(); ++i)
    agents.push_back({{"B", to_json(inst.data.blocks[i])}, {"b", to_json(inst.data.targets[i])}});
  j["agents"] = std::move(agents);

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    require(static_cast<bool>(out), "cannot write " + tmp);
    out << j.dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

ExperimentInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("instance file " + path.string() + ": " + e.what());
  }
  require(j.value("format", "") == "extrapush-instance", "not an instance file: " + path.string());
  require(j.value("version", 0) == kFormatVersion, "unsupported instance format version");
  try {
    ExperimentInstance inst;
    inst.kind = parse_problem_kind(j.at("kind").get<std::string>());
    inst.seed = j.at("seed").get<std::uint64_t>();
    inst.xi = j.at("xi").get<double>();
    inst.l1_depth = j.at("l1_depth").get<double>();
    inst.rank_deficient = j.at("rank_deficient").get<bool>();
    const auto p = j.at("p").get<Eigen::Index>();
    inst.x_star = vector_from_json(j.at("x_star"));
    inst.x0 = matrix_from_json(j.at("x0"), p);
    for (const auto& a : j.at("agents")) {
      inst.data.blocks.push_back(matrix_from_json(a.at("B"), p));
      inst.data.targets.push_back(vector_from_json(a.at("b")));
    }
    inst.data.validate();
    require(inst.agents() == j.at("n").get<std::size_t>(), "instance file: agent count mismatch");
    require(inst.x_star.size() == p && inst.x0.rows() == static_cast<Eigen::Index>(inst.agents()),
            "instance file: ground truth has the wrong shape");
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw Error("instance file " + path.string() + ": " + e.what());
  }
}

}  // namespace extrapush
