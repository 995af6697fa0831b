// Command-line front end: run, certify, graph-info, gen.

#include "extrapush/analysis.hpp"
#include "extrapush/config.hpp"
#include "extrapush/report.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace extrapush;

namespace {

constexpr int kConfigError = 2;
constexpr int kRunFailed = 1;

struct GraphFlags {
  std::string preset;
  std::string edges;
  std::string matrix;
  std::size_t nodes = 0;
};

void add_graph_flags(CLI::App* cmd, GraphFlags& f) {
  cmd->add_option("--preset", f.preset, "paper-fig1 | complete | bidirectional-ring | single");
  cmd->add_option("--edges", f.edges, "edge-list file")->check(CLI::ExistingFile);
  cmd->add_option("--matrix", f.matrix, "mixing-matrix file")->check(CLI::ExistingFile);
  cmd->add_option("--nodes", f.nodes, "node count for complete / bidirectional-ring");
}

/// Flags override the config's [graph] section when given.
GraphSpec graph_spec(GraphSpec base, const GraphFlags& f) {
  if (!f.preset.empty() || !f.edges.empty() || !f.matrix.empty()) base = GraphSpec{};
  if (!f.preset.empty()) base.preset = f.preset;
  if (!f.edges.empty()) base.edges = f.edges;
  if (!f.matrix.empty()) base.matrix = f.matrix;
  if (f.nodes > 0) base.nodes = f.nodes;
  require(base.edges.empty() || base.matrix.empty(), "give --edges or --matrix, not both");
  return base;
}

struct ProblemFlags {
  std::string kind;
  std::size_t n = 0, p = 0, m = 0;
  double xi = 0.0;
  std::string file;
};

void add_problem_flags(CLI::App* cmd, ProblemFlags& f) {
  cmd->add_option("--problem", f.kind, "ls | huber | consensus | file");
  cmd->add_option("--n", f.n, "agents");
  cmd->add_option("--p", f.p, "variable dimension");
  cmd->add_option("--m", f.m, "rows per agent");
  cmd->add_option("--xi", f.xi, "Huber threshold");
  cmd->add_option("--instance", f.file, "instance JSON (implies --problem file)")->check(CLI::ExistingFile);
}

ProblemSpec problem_spec(ProblemSpec base, const ProblemFlags& f) {
  if (!f.kind.empty()) base.kind = f.kind;
  if (!f.file.empty()) {
    base.kind = "file";
    base.file = f.file;
  }
  if (f.n > 0) base.gen.n = f.n;
  if (f.p > 0) base.gen.p = f.p;
  if (f.m > 0) base.gen.m = f.m;
  if (f.xi > 0.0) base.gen.xi = f.xi;
  if (base.kind == "ls" || base.kind == "huber") base.gen.kind = parse_problem_kind(base.kind);
  return base;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized optimization over directed graphs"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir, engine;
  std::size_t max_iters = 0;
  double tol = -1.0;
  bool quiet = false;
  auto* seed_opt = app.add_option("--seed", seed, "problem seed");
  app.add_option("--config", config_path, "INI experiment config")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--max-iters", max_iters, "iteration cap for every run");
  app.add_option("--tol", tol, "stopping tolerance (0 disables)");
  app.add_option("--engine", engine, "matrix | agents (ExtraPush family)");
  app.add_flag("--quiet", quiet, "print only errors");

  auto* run_cmd = app.add_subcommand("run", "run every [algorithm:NAME] of a config");

  auto* certify_cmd = app.add_subcommand("certify", "step-size certificate report");
  GraphFlags certify_graph;
  ProblemFlags certify_problem;
  CertificateParams params;
  double a = 0.0, eta = 0.0, sigma = 0.0;
  add_graph_flags(certify_cmd, certify_graph);
  add_problem_flags(certify_cmd, certify_problem);
  auto* a_opt = certify_cmd->add_option("--a", a, "fix a in (0, 1)");
  auto* eta_opt = certify_cmd->add_option("--eta", eta, "fix eta");
  auto* sigma_opt = certify_cmd->add_option("--sigma", sigma, "fix sigma");

  auto* info_cmd = app.add_subcommand("graph-info", "network diagnostics");
  GraphFlags info_graph;
  std::size_t t_max = 200;
  add_graph_flags(info_cmd, info_graph);
  info_cmd->add_option("--t-max", t_max, "horizon for the weight and mixing diagnostics");

  auto* gen_cmd = app.add_subcommand("gen", "write a generated instance to JSON");
  ProblemFlags gen_problem;
  std::string gen_output;
  double l1_depth = 0.0;
  add_problem_flags(gen_cmd, gen_problem);
  gen_cmd->add_option("--l1-depth", l1_depth, "Huber start depth in units of xi");
  gen_cmd->add_option("-o,--output", gen_output, "instance file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = load_config(config_path);
    } else if (*run_cmd) {
      throw Error("run needs --config");
    }
    ConfigOverrides o;
    if (*seed_opt) o.seed = seed;
    if (!out_dir.empty()) o.out = out_dir;
    if (max_iters > 0) o.max_iters = max_iters;
    if (tol >= 0.0) o.tol = tol;
    if (!engine.empty()) o.engine = parse_engine(engine);
    apply_overrides(cfg, o);

    if (*run_cmd) {
      const Network net = build_network(cfg.graph, cfg.problem.gen.n);
      const Problem problem = build_problem(cfg.problem);
      validate_experiment(cfg, net, problem);
      const auto s = stationary_distribution(net.mixing);
      const auto outcomes = execute_all(cfg, net, s, problem);
      write_summary(outcomes, cfg.out / "summary.csv");
      bool failed = false;
      for (const auto& r : outcomes) {
        failed = failed || !r.error.empty();
        if (!r.error.empty())
          std::cerr << r.name << ": " << r.error << '\n';
        else if (!quiet)
          std::cout << r.name << ": " << to_string(r.reason) << " after " << r.iterations
                    << " iterations, relative error " << r.relative_err << ", " << r.csv.string() << '\n';
      }
      if (!quiet) std::cout << "summary: " << (cfg.out / "summary.csv").string() << '\n';
      return failed ? kRunFailed : 0;
    }

    if (*certify_cmd) {
      const ProblemSpec ps = problem_spec(cfg.problem, certify_problem);
      const Network net = build_network(graph_spec(cfg.graph, certify_graph), ps.gen.n);
      require(is_strongly_connected(net.graph), "network '" + net.label + "' is not strongly connected");
      const Problem problem = build_problem(ps);
      require(problem.objective->agents() == net.mixing.size(), "problem and network disagree on n");
      if (*a_opt) params.a = a;
      if (*eta_opt) params.eta = eta;
      if (*sigma_opt) params.sigma = sigma;
      const auto s = stationary_distribution(net.mixing);
      const auto cert = certificate(net.mixing, s, problem.objective->lipschitz(),
                                    problem.objective->strong_convexity(), params);
      std::cout << "graph = " << net.label << "\nproblem = " << problem.label << '\n' << certificate_report(cert);
      return 0;
    }

    if (*info_cmd) {
      const Network net = build_network(graph_spec(cfg.graph, info_graph), cfg.problem.gen.n);
      std::cout << graph_info_report(net, t_max);
      return 0;
    }

    if (*gen_cmd) {
      ProblemSpec ps = problem_spec(cfg.problem, gen_problem);
      require(ps.kind == "ls" || ps.kind == "huber", "gen writes ls or huber instances");
      if (l1_depth > 0.0) ps.gen.l1_depth = l1_depth;
      const auto inst = generate_experiment(ps.gen);
      save_instance(inst, gen_output);
      if (!quiet) std::cout << "wrote " << gen_output << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRunFailed;
  }
  return 0;
}
