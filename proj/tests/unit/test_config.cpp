#include "extrapush/config.hpp"
#include "extrapush/report.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace extrapush;

namespace {

const char* kBase = R"(
[problem]
kind = ls
n = 5
p = 8
m = 20
seed = 4

[graph]
preset = paper-fig1

[run]
max_iters = 200
record_every = 1

[algorithm:ep]
method = extrapush
alpha = 0.1

[algorithm:sgp]
method = subgradient-push
c = 0.8
t0 = 10
max_iters = 50
)";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("config sections map onto the experiment") {
  const auto cfg = parse_config(kBase);
  CHECK(cfg.problem.kind == "ls");
  CHECK(cfg.problem.gen.p == 8);
  CHECK(cfg.problem.gen.seed == 4);
  CHECK(cfg.graph.preset == "paper-fig1");
  REQUIRE(cfg.runs.size() == 2);
  CHECK(cfg.runs[0].name == "ep");
  CHECK(cfg.runs[0].cfg.algorithm == Algorithm::extrapush);
  CHECK(cfg.runs[0].cfg.max_iters == 200);
  CHECK(cfg.runs[1].cfg.max_iters == 50);
  CHECK(cfg.runs[1].cfg.schedule(1) == doctest::Approx(0.8 / std::sqrt(11.0)));
}

TEST_CASE("config errors are reported") {
  auto with = [](const std::string& extra) { return std::string(kBase) + extra; };
  CHECK_THROWS_AS(parse_config(with("[bogus]\nx = 1\n")), Error);
  CHECK_THROWS_AS(parse_config(with("[algorithm:bad]\nmethod = extrapush\nalpha = fast\n")), Error);
  CHECK_THROWS_AS(parse_config(with("[algorithm:bad]\nmethod = gossip\n")), Error);
  CHECK_THROWS_AS(parse_config(with("[algorithm:bad]\nmethod = extrapush\nalpha = -1\n")), Error);
  CHECK_THROWS_AS(parse_config(with("[algorithm:ep]\nmethod = extrapush\n")), Error);
  CHECK_THROWS_AS(parse_config(with("[algorithm:bad]\nmethod = extrapush\ncolour = red\n")), Error);
  CHECK_THROWS_AS(parse_config("[problem]\nkind = ls\n"), Error);
  CHECK_THROWS_AS(parse_config("[problem]\nkind = lasso\n[algorithm:a]\nmethod = extrapush\n"), Error);
  CHECK_THROWS_AS(parse_config("[graph]\nmatrix = /no/such/file\n[algorithm:a]\nmethod = extrapush\n"), Error);
}

TEST_CASE("overrides replace config values") {
  auto cfg = parse_config(kBase);
  ConfigOverrides o;
  o.seed = 77;
  o.max_iters = 9;
  o.tol = 1e-3;
  o.engine = Engine::agents;
  apply_overrides(cfg, o);
  CHECK(cfg.problem.gen.seed == 77);
  CHECK(cfg.engine == Engine::agents);
  for (const auto& r : cfg.runs) {
    CHECK(r.cfg.max_iters == 9);
    CHECK(r.cfg.tol == 1e-3);
  }
}

TEST_CASE("networks and problems are built from specs") {
  GraphSpec g;
  g.preset = "bidirectional-ring";
  g.nodes = 6;
  const auto ring = build_network(g, 5);
  CHECK(ring.graph.size() == 6);
  CHECK(ring.graph.edge_count() == 12);
  g.preset = "bidirectional-ring";
  g.nodes = 2;
  CHECK_THROWS_AS(build_network(g, 5), Error);
  g.preset = "star";
  CHECK_THROWS_AS(build_network(g, 5), Error);
  g.preset = "complete";
  g.nodes = 0;
  CHECK(build_network(g, 4).graph.edge_count() == 12);

  ProblemSpec p;
  p.kind = "consensus";
  p.gen.n = 3;
  p.gen.p = 2;
  const auto prob = build_problem(p);
  CHECK(prob.objective->agents() == 3);
  REQUIRE(prob.x_star);
  const auto* cons = dynamic_cast<const ConsensusObjective*>(prob.objective.get());
  REQUIRE(cons != nullptr);
  CHECK(*prob.x_star == cons->average());
}

TEST_CASE("validation rejects incompatible experiments") {
  auto cfg = parse_config(std::string(kBase) + "[algorithm:ex]\nmethod = extra\nalpha = 0.1\n");
  const auto net = build_network(cfg.graph, 5);
  const auto prob = build_problem(cfg.problem);
  CHECK_THROWS_AS(validate_experiment(cfg, net, prob), Error);

  cfg.problem.gen.n = 4;
  const auto prob4 = build_problem(cfg.problem);
  cfg.runs.pop_back();
  CHECK_THROWS_AS(validate_experiment(cfg, net, prob4), Error);
}

TEST_CASE("runs are reproducible and both engines agree") {
  auto cfg = parse_config(kBase);
  const auto dir = std::filesystem::temp_directory_path() / "extrapush_config_runs";
  std::filesystem::remove_all(dir);
  cfg.out = dir / "a";
  const auto net = build_network(cfg.graph, cfg.problem.gen.n);
  const auto prob = build_problem(cfg.problem);
  const auto s = stationary_distribution(net.mixing);
  const auto first = execute_all(cfg, net, s, prob);
  cfg.out = dir / "b";
  const auto second = execute_all(cfg, net, s, prob);
  REQUIRE(first.size() == 2);
  for (std::size_t k = 0; k < first.size(); ++k) {
    CHECK(first[k].error.empty());
    CHECK(slurp(first[k].csv) == slurp(second[k].csv));
  }
  CHECK(first[0].messages == 200 * 10);

  const auto agents = execute_run(net, s, prob, cfg.runs[0], Engine::agents, dir / "c");
  CHECK(agents.engine == Engine::agents);
  CHECK(agents.final_err == doctest::Approx(first[0].final_err).epsilon(1e-12));
  CHECK(agents.messages == first[0].messages);
  // subgradient-push has no agent engine and falls back to the matrix one
  CHECK(execute_run(net, s, prob, cfg.runs[1], Engine::agents, dir / "c").engine == Engine::matrix);

  write_summary(first, dir / "summary.csv");
  const auto text = slurp(dir / "summary.csv");
  CHECK(text.rfind("name,algorithm,engine,iterations,stop_reason,final_err,relative_err,fitted_rate,fit_r2,"
                   "messages,wall_seconds,error\n",
                   0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  std::filesystem::remove_all(dir);
}

TEST_CASE("graph report lists the diagnostics") {
  GraphSpec g;
  const auto report = graph_info_report(build_network(g, 5));
  for (const char* key : {"n = 5", "edges = 10", "strongly connected = yes", "phi =", "xi", "rate"})
    CHECK(report.find(key) != std::string::npos);
}
