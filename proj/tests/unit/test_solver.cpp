#include "oracles.hpp"

#include "extrapush/experiment.hpp"
#include "extrapush/solver.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace extrapush;

namespace {

ExperimentInstance tall_ls(std::size_t n, std::uint64_t seed) {
  GeneratorOptions o;
  o.n = n;
  o.p = 8;
  o.m = 20;
  o.seed = seed;
  return generate_experiment(o);
}

/// f(x) = (x - 3)^2 / 2 on one agent.
ConsensusObjective scalar_quadratic() {
  Matrix t(1, 1);
  t << 3.0;
  return ConsensusObjective(t);
}

AlgorithmConfig fixed(Algorithm alg, double alpha, std::size_t iters) {
  AlgorithmConfig c;
  c.algorithm = alg;
  c.alpha = alpha;
  c.max_iters = iters;
  return c;
}

std::vector<Matrix> x_history(const MixingMatrix& a, const StationaryDistribution& s, const Objective& obj,
                              const AlgorithmConfig& cfg, const Matrix& z0) {
  std::vector<Matrix> xs;
  RunHooks hooks;
  hooks.observer = [&](const IterateState& st) { xs.push_back(st.x); };
  run_algorithm(a, s, obj, cfg, z0, hooks);
  return xs;
}

double max_rel_gap(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    worst = std::max(worst, (a[t] - b[t]).norm() / std::max(1.0, b[t].norm()));
  return worst;
}

}  // namespace

TEST_CASE("Extra on one agent unrolls to gradient descent") {
  const auto obj = scalar_quadratic();
  std::vector<double> xs;
  RunHooks hooks;
  hooks.observer = [&](const IterateState& st) { xs.push_back(st.x(0, 0)); };
  run_extra(Matrix::Ones(1, 1), obj, fixed(Algorithm::extra, 0.1, 2), Matrix::Zero(1, 1), hooks);
  REQUIRE(xs.size() == 3);
  CHECK(xs[0] == 0.0);
  CHECK(xs[1] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(xs[2] == doctest::Approx(0.57).epsilon(1e-15));
}

TEST_CASE("ExtraPush on one agent is gradient descent for 100 rounds") {
  const auto obj = scalar_quadratic();
  const MixingMatrix a(Matrix::Ones(1, 1));
  const StationaryDistribution s(Vector::Ones(1));
  for (auto alg : {Algorithm::extrapush, Algorithm::normalized_extrapush}) {
    const auto xs = x_history(a, s, obj, fixed(alg, 0.1, 100), Matrix::Zero(1, 1));
    double x = 0.0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
      CHECK(xs[t](0, 0) == x);
      x = x - 0.1 * (x - 3.0);
    }
  }
}

TEST_CASE("Matrix engines agree with the loop-level recursions") {
  const auto g = random_strongly_connected(6, 0.3, 17);
  const auto a = build_out_degree_mixing(g);
  const auto s = stationary_distribution(a);
  const auto inst = tall_ls(6, 4);
  const auto obj = make_objective(inst);
  Matrix z0(6, 8);
  z0.setConstant(0.5);
  const auto ours = x_history(a, s, *obj, fixed(Algorithm::extrapush, 0.05, 200), z0);
  const auto loops = oracle::extrapush_loops(a.a, *obj, 0.05, z0, 200);
  CHECK(max_rel_gap(ours, loops) <= 1e-12);

  const auto w = build_out_degree_mixing(complete_digraph(6));
  std::vector<Matrix> extra;
  RunHooks hooks;
  hooks.observer = [&](const IterateState& st) { extra.push_back(st.x); };
  run_extra(w.a, *obj, fixed(Algorithm::extra, 0.05, 200), z0, hooks);
  CHECK(max_rel_gap(extra, oracle::extra_loops(w.a, *obj, 0.05, z0, 200)) <= 1e-12);
}

TEST_CASE("a consensual stationary start never moves under Normalized ExtraPush") {
  const MixingMatrix a(paper_fig1_matrix());
  const auto s = stationary_distribution(a);
  Matrix targets(5, 3);
  for (int i = 0; i < 5; ++i) targets.row(i) = Eigen::RowVector3d(1.0, -2.0, 4.0);
  const ConsensusObjective obj(targets);
  Matrix z0(5, 3);
  for (int i = 0; i < 5; ++i) z0.row(i) = s.d(i) * targets.row(0);
  // ExtraPush itself starts from w = 1, so x^0 = z^0 is not x_bar and the start is not stationary.
  {
    auto cfg = fixed(Algorithm::normalized_extrapush, 0.1, 50);
    cfg.tol = 1e-12;
    std::vector<Matrix> zs;
    RunHooks hooks;
    hooks.observer = [&](const IterateState& st) { zs.push_back(st.z); };
    const auto rec = run_algorithm(a, s, obj, cfg, z0, hooks);
    for (const auto& z : zs) CHECK((z - z0).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK(rec.reason == StopReason::step_tolerance);
    CHECK(rec.rows.back().t == 2);
  }
}

TEST_CASE("Normalized ExtraPush equals Extra for doubly stochastic mixing") {
  const auto w = build_out_degree_mixing(complete_digraph(5));
  const auto s = stationary_distribution(w);
  const auto inst = tall_ls(5, 9);
  const auto obj = make_objective(inst);
  const Matrix x0 = Matrix::Constant(5, 8, 0.2);
  const auto norm = x_history(w, s, *obj, fixed(Algorithm::normalized_extrapush, 0.1, 500), x0);
  std::vector<Matrix> extra;
  RunHooks hooks;
  hooks.observer = [&](const IterateState& st) { extra.push_back(st.x); };
  run_extra(w.a, *obj, fixed(Algorithm::extra, 0.1, 500), x0, hooks);
  REQUIRE(norm.size() == extra.size());
  for (std::size_t t = 0; t < norm.size(); ++t) CHECK((norm[t] - extra[t]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("three Normalized ExtraPush forms agree") {
  const MixingMatrix a(paper_fig1_matrix());
  const auto s = stationary_distribution(a);
  const Matrix a_phi = row_stochastic_form(a, s);
  CHECK((a_phi.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);

  const auto inst = tall_ls(5, 2);
  const auto obj = make_objective(inst);
  const Matrix z0 = initial_z(Algorithm::normalized_extrapush, Matrix::Constant(5, 8, -0.3), s);
  const auto base = x_history(a, s, *obj, fixed(Algorithm::normalized_extrapush, 0.1, 500), z0);
  const auto zf = x_history(a, s, *obj, fixed(Algorithm::normalized_extrapush_z, 0.1, 500), z0);
  const auto xf = x_history(a, s, *obj, fixed(Algorithm::normalized_extrapush_x, 0.1, 500), z0);
  CHECK(max_rel_gap(zf, base) <= 1e-9);
  CHECK(max_rel_gap(xf, base) <= 1e-9);
}

TEST_CASE("sum of z changes by exactly the summed gradient step") {
  const auto g = random_strongly_connected(7, 0.2, 3);
  const auto a = build_out_degree_mixing(g);
  const auto s = stationary_distribution(a);
  const auto inst = tall_ls(7, 5);
  const auto obj = make_objective(inst);
  for (auto alg : {Algorithm::extrapush, Algorithm::normalized_extrapush}) {
    std::vector<IterateState> h;
    RunHooks hooks;
    hooks.observer = [&](const IterateState& st) { h.push_back(st); };
    run_algorithm(a, s, *obj, fixed(alg, 0.1, 300), Matrix::Zero(7, 8), hooks);
    for (std::size_t t = 0; t + 1 < h.size(); ++t) {
      const Eigen::RowVectorXd drift =
          h[t + 1].z.colwise().sum() - h[t].z.colwise().sum() + 0.1 * h[t].grad.colwise().sum();
      CHECK(drift.norm() <= 1e-9 * (1.0 + h[t].z.norm()));
    }
  }
}

TEST_CASE("push-sum weights follow A^t 1") {
  const MixingMatrix a(paper_fig1_matrix());
  const auto s = stationary_distribution(a);
  const ZeroObjective obj(5, 2);
  std::vector<Vector> ws;
  RunHooks hooks;
  hooks.observer = [&](const IterateState& st) { ws.push_back(st.w); };
  run_extrapush(a, obj, fixed(Algorithm::extrapush, 0.1, 60), Matrix::Ones(5, 2), hooks);
  Vector w = Vector::Ones(5);
  for (const auto& wt : ws) {
    CHECK((wt - w).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(wt.minCoeff() >= std::pow(5.0, -5.0));
    w = a.a * w;
  }
  CHECK((ws.back() / 5.0 - s.phi).norm() <= 1e-10);
}

TEST_CASE("subgradient-push with no objective averages z0") {
  const MixingMatrix a(paper_fig1_matrix());
  const auto s = stationary_distribution(a);
  const ZeroObjective obj(5, 3);
  Matrix z0(5, 3);
  for (int i = 0; i < 5; ++i) z0.row(i) = Eigen::RowVector3d(i, 2.0 * i, -1.0);
  AlgorithmConfig cfg;
  cfg.algorithm = Algorithm::subgradient_push;
  cfg.max_iters = 200;
  const auto rec = run_algorithm(a, s, obj, cfg, z0);
  const Eigen::RowVectorXd mean = z0.colwise().mean();
  for (int i = 0; i < 5; ++i) CHECK((rec.final_state.x.row(i) - mean).norm() <= 1e-10);
}

TEST_CASE("resuming from a checkpoint reproduces the suffix") {
  const MixingMatrix a(paper_fig1_matrix());
  const auto s = stationary_distribution(a);
  const auto inst = tall_ls(5, 6);
  const auto obj = make_objective(inst);
  for (auto alg : {Algorithm::extrapush, Algorithm::normalized_extrapush}) {
    auto cfg = fixed(alg, 0.1, 300);
    const Matrix z0 = Matrix::Constant(5, 8, 1.0);
    const auto full = x_history(a, s, *obj, cfg, z0);
    const auto cp = checkpoint_at(a, s, *obj, cfg, z0, 120);
    CHECK(cp.t == 120);

    const auto path = std::filesystem::temp_directory_path() / "extrapush_checkpoint.json";
    save_checkpoint(cp, path);
    const auto loaded = load_checkpoint(path);
    std::filesystem::remove(path);
    CHECK(loaded.z == cp.z);
    CHECK(loaded.y == cp.y);
    CHECK(loaded.w == cp.w);

    std::vector<Matrix> tail;
    RunHooks hooks;
    hooks.observer = [&](const IterateState& st) { tail.push_back(st.x); };
    const auto rec = resume_run(loaded, a, s, *obj, cfg, hooks);
    CHECK(rec.rows.front().t == 121);
    REQUIRE(tail.size() >= 180);
    const std::size_t offset = full.size() - tail.size();
    for (std::size_t k = 0; k < tail.size(); ++k)
      CHECK((tail[k] - full[offset + k]).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("stopping rules") {
  const MixingMatrix a(paper_fig1_matrix());
  const auto s = stationary_distribution(a);
  const auto inst = tall_ls(5, 7);
  const auto obj = make_objective(inst);

  auto cfg = fixed(Algorithm::extrapush, 0.1, 40);
  cfg.tol = 0.0;
  auto rec = run_algorithm(a, s, *obj, cfg, Matrix::Zero(5, 8));
  CHECK(rec.reason == StopReason::max_iters);
  CHECK(rec.rows.back().t == 40);
  CHECK(rec.rows.size() == 41);

  cfg.alpha = 1e3;
  cfg.max_iters = 5000;
  rec = run_algorithm(a, s, *obj, cfg, Matrix::Zero(5, 8));
  CHECK(rec.reason == StopReason::diverged);
  CHECK(rec.rows.back().t < 5000);

  StopInputs in;
  in.t = 1;
  in.step_change = 0.0;
  AlgorithmConfig tight;
  tight.tol = 1e-6;
  tight.max_iters = 10;
  CHECK_FALSE(stop_rule(in, tight).stop);
  in.t = 2;
  CHECK(stop_rule(in, tight).reason == StopReason::step_tolerance);
  in.step_change = 1.0;
  in.residual = 1e-9;
  CHECK(stop_rule(in, tight).reason == StopReason::residual_tolerance);
  in.t = 10;
  CHECK(stop_rule(in, tight).reason == StopReason::max_iters);
  in.finite = false;
  CHECK(stop_rule(in, tight).reason == StopReason::diverged);
}

TEST_CASE("recorded rows are strictly increasing and sampled") {
  const MixingMatrix a(paper_fig1_matrix());
  const auto s = stationary_distribution(a);
  const auto inst = tall_ls(5, 8);
  const auto obj = make_objective(inst);
  auto cfg = fixed(Algorithm::normalized_extrapush, 0.1, 53);
  cfg.record_every = 10;
  const auto rec = run_algorithm(a, s, *obj, cfg, Matrix::Zero(5, 8));
  std::vector<std::size_t> ts;
  for (const auto& r : rec.rows) ts.push_back(r.t);
  CHECK(ts == std::vector<std::size_t>{0, 10, 20, 30, 40, 50, 53});
}

TEST_CASE("step schedules are validated") {
  CHECK_NOTHROW(StepSchedule::inverse_sqrt(0.8).validate());
  CHECK(StepSchedule::inverse_sqrt(5.0, 100.0)(1) == doctest::Approx(5.0 / std::sqrt(101.0)));
  CHECK(StepSchedule::inverse_sqrt(0.8).divergent_sum());
  CHECK_FALSE(StepSchedule::inverse_sqrt(0.8).square_summable());
  CHECK_THROWS_AS(StepSchedule::inverse_sqrt(-1.0).validate(), Error);
  auto summable = StepSchedule::inverse_sqrt(1.0);
  summable.exponent = 1.5;
  CHECK_THROWS_AS(summable.validate(), Error);
  auto growing = StepSchedule::inverse_sqrt(1.0);
  growing.exponent = -0.5;
  CHECK_THROWS_AS(growing.validate(), Error);

  AlgorithmConfig c;
  c.alpha = 0.0;
  c.algorithm = Algorithm::extrapush;
  CHECK_THROWS_AS(c.validate(), Error);
  c.alpha = 0.1;
  c.record_every = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("Extra rejects a matrix that is not symmetric doubly stochastic") {
  const ZeroObjective obj(5, 1);
  CHECK_THROWS_AS(run_extra(paper_fig1_matrix(), obj, fixed(Algorithm::extra, 0.1, 3), Matrix::Zero(5, 1)),
                  Error);
}

TEST_CASE("trajectory CSV layout") {
  const MixingMatrix a(paper_fig1_matrix());
  const auto s = stationary_distribution(a);
  const auto inst = tall_ls(5, 1);
  const auto obj = make_objective(inst);
  RunHooks hooks;
  hooks.x_star = inst.x_star;
  const auto rec = run_algorithm(a, s, *obj, fixed(Algorithm::extrapush, 0.1, 3), Matrix::Zero(5, 8), hooks);
  std::ostringstream os;
  write_trajectory_csv(rec, os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,err_opt,consensus,residual_opt,residual_feas,alpha_t");
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 5);
    CHECK(line.rfind(std::to_string(rows) + ",", 0) == 0);
    ++rows;
  }
  CHECK(rows == 4);
  CHECK(rec.rows[0].err_opt == doctest::Approx((inst.x0.rowwise() - inst.x_star.transpose()).norm()));
}

TEST_CASE("algorithm names round-trip") {
  for (auto alg : {Algorithm::extra, Algorithm::subgradient_push, Algorithm::extrapush,
                   Algorithm::normalized_extrapush, Algorithm::normalized_extrapush_z,
                   Algorithm::normalized_extrapush_x})
    CHECK(parse_algorithm(to_string(alg)) == alg);
  CHECK_THROWS_AS(parse_algorithm("gossip"), Error);
}
