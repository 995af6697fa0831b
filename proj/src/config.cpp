#include "extrapush/config.hpp"

#include "extrapush/rng.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace extrapush {

namespace pt = boost::property_tree;

namespace {

const std::set<std::string> kProblemKeys = {"kind", "n", "p", "m", "seed", "xi", "l1_depth", "noise", "file"};
const std::set<std::string> kGraphKeys = {"preset", "nodes", "edges", "matrix"};
const std::set<std::string> kRunKeys = {"out", "max_iters", "tol", "record_every", "engine"};
const std::set<std::string> kAlgorithmKeys = {"method", "alpha", "c", "t0", "exponent", "max_iters",
                                              "tol", "record_every"};

void check_keys(const pt::ptree& section, const std::string& name, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : section) {
    require(value.empty(), "[" + name + "] must not contain nested sections");
    require(allowed.count(key) == 1, "[" + name + "]: unknown key '" + key + "'");
  }
}

template <class T>
T get(const pt::ptree& section, const std::string& section_name, const std::string& key, T fallback) {
  const auto raw = section.get_optional<std::string>(key);
  if (!raw) return fallback;
  std::istringstream in(*raw);
  T value{};
  in >> value;
  require(!in.fail() && (in >> std::ws).eof(),
          "[" + section_name + "] " + key + " = '" + *raw + "' is not a valid value");
  return value;
}

std::string get_string(const pt::ptree& section, const std::string& key, const std::string& fallback) {
  return section.get<std::string>(key, fallback);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

std::string to_string(Engine e) { return e == Engine::matrix ? "matrix" : "agents"; }

Engine parse_engine(const std::string& s) {
  if (s == "matrix") return Engine::matrix;
  if (s == "agents") return Engine::agents;
  throw Error("unknown engine '" + s + "' (expected matrix or agents)");
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(std::string("config: ") + e.what());
  }

  ExperimentConfig cfg;
  std::size_t run_max_iters = 1000, run_record_every = 1;
  double run_tol = 0.0;

  for (const auto& [name, section] : tree) {
    require(!section.empty() || section.data().empty(), "config: key '" + name + "' outside a section");
    if (name == "problem") {
      check_keys(section, name, kProblemKeys);
      auto& p = cfg.problem;
      p.kind = get_string(section, "kind", p.kind);
      require(p.kind == "ls" || p.kind == "huber" || p.kind == "consensus" || p.kind == "file",
              "[problem] kind must be ls, huber, consensus or file");
      p.gen.n = get(section, name, "n", p.gen.n);
      p.gen.p = get(section, name, "p", p.gen.p);
      p.gen.m = get(section, name, "m", p.gen.m);
      p.gen.seed = get(section, name, "seed", p.gen.seed);
      p.gen.xi = get(section, name, "xi", p.gen.xi);
      p.gen.l1_depth = get(section, name, "l1_depth", p.gen.l1_depth);
      p.gen.noise = get(section, name, "noise", p.gen.noise);
      p.file = resolve(base_dir, get_string(section, "file", ""));
      if (p.kind == "file") {
        require(!p.file.empty(), "[problem] kind = file needs file = PATH");
        require(std::filesystem::exists(p.file), "[problem] file not found: " + p.file.string());
      } else if (p.kind != "consensus") {
        p.gen.kind = parse_problem_kind(p.kind);
      }
    } else if (name == "graph") {
      check_keys(section, name, kGraphKeys);
      auto& g = cfg.graph;
      g.preset = get_string(section, "preset", g.preset);
      g.nodes = get(section, name, "nodes", g.nodes);
      g.edges = resolve(base_dir, get_string(section, "edges", ""));
      g.matrix = resolve(base_dir, get_string(section, "matrix", ""));
      require(g.edges.empty() || g.matrix.empty(), "[graph] give edges or matrix, not both");
      for (const auto& f : {g.edges, g.matrix})
        require(f.empty() || std::filesystem::exists(f), "[graph] file not found: " + f.string());
    } else if (name == "run") {
      check_keys(section, name, kRunKeys);
      cfg.out = resolve(base_dir, get_string(section, "out", cfg.out.string()));
      run_max_iters = get(section, name, "max_iters", run_max_iters);
      run_tol = get(section, name, "tol", run_tol);
      run_record_every = get(section, name, "record_every", run_record_every);
      cfg.engine = parse_engine(get_string(section, "engine", "matrix"));
    } else if (name.rfind("algorithm:", 0) == 0) {
      // handled below so [run] defaults apply regardless of section order
    } else {
      throw Error("config: unknown section [" + name + "]");
    }
  }

  for (const auto& [name, section] : tree) {
    if (name.rfind("algorithm:", 0) != 0) continue;
    check_keys(section, name, kAlgorithmKeys);
    RunSpec run;
    run.name = name.substr(std::string("algorithm:").size());
    require(!run.name.empty(), "config: [algorithm:] needs a name");
    require(run.name.find_first_of("/\\ ") == std::string::npos,
            "config: run name '" + run.name + "' must not contain spaces or slashes");
    auto& c = run.cfg;
    c.algorithm = parse_algorithm(get_string(section, "method", ""));
    c.alpha = get(section, name, "alpha", c.alpha);
    c.schedule = StepSchedule::inverse_sqrt(get(section, name, "c", 1.0), get(section, name, "t0", 0.0));
    c.schedule.exponent = get(section, name, "exponent", 0.5);
    c.max_iters = get(section, name, "max_iters", run_max_iters);
    c.tol = get(section, name, "tol", run_tol);
    c.record_every = get(section, name, "record_every", run_record_every);
    try {
      c.validate();
    } catch (const Error& e) {
      throw Error("[" + name + "] " + e.what());
    }
    for (const auto& other : cfg.runs)
      require(other.name != run.name, "config: duplicate run name '" + run.name + "'");
    cfg.runs.push_back(std::move(run));
  }
  require(!cfg.runs.empty(), "config: at least one [algorithm:NAME] section is required");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

void apply_overrides(ExperimentConfig& cfg, const ConfigOverrides& o) {
  if (o.seed) cfg.problem.gen.seed = *o.seed;
  if (o.out) cfg.out = *o.out;
  if (o.engine) cfg.engine = *o.engine;
  for (auto& run : cfg.runs) {
    if (o.max_iters) run.cfg.max_iters = *o.max_iters;
    if (o.tol) run.cfg.tol = *o.tol;
    run.cfg.validate();
  }
}

Network build_network(const GraphSpec& spec, std::size_t default_nodes) {
  if (!spec.matrix.empty()) {
    MixingMatrix m = load_mixing(spec.matrix);
    DirectedGraph g = support_graph(m.a);
    return {std::move(g), std::move(m), spec.matrix.filename().string()};
  }
  if (!spec.edges.empty()) {
    DirectedGraph g = load_graph(spec.edges);
    MixingMatrix m = build_out_degree_mixing(g);
    return {std::move(g), std::move(m), spec.edges.filename().string()};
  }
  const std::size_t nodes = spec.nodes > 0 ? spec.nodes : default_nodes;
  if (spec.preset == "paper-fig1") return {paper_fig1_graph(), MixingMatrix(paper_fig1_matrix()), "paper-fig1"};
  if (spec.preset == "complete" || spec.preset == "single") {
    const std::size_t k = spec.preset == "single" ? 1 : nodes;
    DirectedGraph g = complete_digraph(k);
    MixingMatrix m = build_out_degree_mixing(g);
    return {std::move(g), std::move(m), spec.preset};
  }
  if (spec.preset == "bidirectional-ring") {
    require(nodes >= 3, "bidirectional-ring needs at least 3 nodes");
    std::vector<DirectedGraph::Edge> edges;
    for (std::size_t i = 0; i < nodes; ++i) {
      edges.emplace_back(i, (i + 1) % nodes);
      edges.emplace_back((i + 1) % nodes, i);
    }
    DirectedGraph g(nodes, std::move(edges));
    MixingMatrix m = build_out_degree_mixing(g);
    return {std::move(g), std::move(m), spec.preset};
  }
  throw Error("unknown graph preset '" + spec.preset +
              "' (expected paper-fig1, complete, bidirectional-ring or single)");
}

Problem build_problem(const ProblemSpec& spec) {
  Problem p;
  if (spec.kind == "consensus") {
    require(spec.gen.n >= 1 && spec.gen.p >= 1, "consensus problem needs n, p >= 1");
    Rng rng(spec.gen.seed);
    Matrix targets(static_cast<Eigen::Index>(spec.gen.n), static_cast<Eigen::Index>(spec.gen.p));
    for (Eigen::Index i = 0; i < targets.rows(); ++i)
      for (Eigen::Index c = 0; c < targets.cols(); ++c) targets(i, c) = rng.unit_variance();
    auto obj = std::make_unique<ConsensusObjective>(targets);
    p.x_star = obj->average();
    p.x0 = Matrix::Zero(targets.rows(), targets.cols());
    p.objective = std::move(obj);
    p.label = "consensus";
    return p;
  }
  ExperimentInstance inst = spec.kind == "file" ? load_instance(spec.file) : generate_experiment(spec.gen);
  p.objective = make_objective(inst);
  p.x_star = inst.x_star;
  p.x0 = inst.x0;
  p.label = to_string(inst.kind);
  p.instance = std::move(inst);
  return p;
}

}  // namespace extrapush
