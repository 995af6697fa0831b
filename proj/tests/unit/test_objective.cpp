#include "oracles.hpp"

#include "extrapush/experiment.hpp"
#include "extrapush/kernels.hpp"
#include "extrapush/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace extrapush;

namespace {

ExperimentInstance small(ProblemKind kind, std::uint64_t seed) {
  GeneratorOptions o;
  o.kind = kind;
  o.n = 4;
  o.p = 6;
  o.m = 10;
  o.seed = seed;
  o.l1_depth = 3.0;
  return generate_experiment(o);
}

double fd_mismatch(const Objective& obj, std::size_t agent, const Vector& x) {
  auto f = [&](const Vector& v) { return obj.value(agent, {v.data(), static_cast<std::size_t>(v.size())}); };
  const Vector fd = oracle::central_difference(f, x, 1e-6 * (1.0 + x.cwiseAbs().maxCoeff()));
  Vector g(x.size());
  obj.gradient(agent, {x.data(), static_cast<std::size_t>(x.size())}, {g.data(), static_cast<std::size_t>(g.size())});
  return (g - fd).norm() / std::max(1.0, fd.norm());
}

Vector random_point(Rng& rng, Eigen::Index p, double scale) {
  Vector x(p);
  for (Eigen::Index k = 0; k < p; ++k) x(k) = scale * rng.unit_variance();
  return x;
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
  Rng rng(99);
  SUBCASE("least squares") {
    const auto inst = small(ProblemKind::least_squares, 3);
    const auto obj = make_objective(inst);
    for (int k = 0; k < 10; ++k)
      CHECK(fd_mismatch(*obj, k % 4, random_point(rng, 6, 3.0)) <= 1e-6);
  }
  SUBCASE("huber") {
    const auto inst = small(ProblemKind::huber, 4);
    const auto obj = make_objective(inst);
    for (int k = 0; k < 10; ++k)
      CHECK(fd_mismatch(*obj, k % 4, random_point(rng, 6, 3.0)) <= 1e-6);
  }
  SUBCASE("consensus") {
    Matrix targets(3, 5);
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index c = 0; c < 5; ++c) targets(i, c) = rng.unit_variance();
    const ConsensusObjective obj(targets);
    for (int k = 0; k < 10; ++k) CHECK(fd_mismatch(obj, k % 3, random_point(rng, 5, 2.0)) <= 1e-6);
  }
}

TEST_CASE("huber loss and slope are continuous at the knee") {
  for (double xi : {0.5, 2.0, 7.0})
    for (double sign : {-1.0, 1.0}) {
      const double knee = sign * xi;
      for (double eps : {1e-7, 1e-9}) {
        CHECK(std::abs(huber_slope(knee + eps, xi) - huber_slope(knee - eps, xi)) <= 1e-6);
        // both branches give xi^2 / 2 at the knee, so the jump is only the slope times 2 eps
        CHECK(std::abs(huber_loss(knee + eps, xi) - huber_loss(knee - eps, xi)) <= 2.0 * xi * eps * (1.0 + 1e-6));
      }
      CHECK(huber_loss(knee, xi) == doctest::Approx(xi * xi / 2.0));
    }
  CHECK(huber_slope(10.0, 2.0) == 2.0);
  CHECK(huber_slope(-10.0, 2.0) == -2.0);
  CHECK(huber_loss(10.0, 2.0) == doctest::Approx(2.0 * (10.0 - 1.0)));
}

TEST_CASE("least-squares constants are the extreme eigenvalues of B_i^T B_i") {
  const auto inst = small(ProblemKind::least_squares, 5);
  const auto c = ls_constants(inst.data);
  for (std::size_t i = 0; i < inst.agents(); ++i) {
    const Matrix& b = inst.data.blocks[i];
    const auto ev = oracle::jacobi_eigenvalues(b.transpose() * b);
    CHECK(c.lipschitz[i] == doctest::Approx(ev.back()).epsilon(1e-10));
    CHECK(c.strong_convexity[i] == doctest::Approx(std::max(ev.front(), 0.0)).epsilon(1e-8));
  }

  GeneratorOptions wide;
  wide.n = 2;
  wide.p = 12;
  wide.m = 5;
  const auto w = generate_experiment(wide);
  CHECK(ls_constants(w.data).s_f == 0.0);
}

TEST_CASE("generated ground truth is a stationary point") {
  for (auto kind : {ProblemKind::least_squares, ProblemKind::huber}) {
    const auto inst = small(kind, 11);
    const auto obj = make_objective(inst);
    const Matrix x = inst.stacked_optimum();
    const Matrix g = grad_stack(*obj, x);
    CHECK(g.colwise().sum().norm() <= 1e-10 * (1.0 + g.norm()));
  }
}

TEST_CASE("huber instance places x* in the quadratic zone and x0 in the linear zone") {
  const auto inst = small(ProblemKind::huber, 12);
  for (std::size_t i = 0; i < inst.agents(); ++i) {
    const Vector r_star = agent_residuals(inst.data, i, inst.x_star);
    CHECK(r_star.cwiseAbs().maxCoeff() <= 0.8 * inst.xi + 1e-12);
    const Vector r0 = agent_residuals(inst.data, i, inst.x0.row(static_cast<Eigen::Index>(i)).transpose());
    CHECK(r0.cwiseAbs().minCoeff() >= 1.2 * inst.xi);
  }
}

TEST_CASE("generator is deterministic and instances round-trip through JSON") {
  const auto a = small(ProblemKind::huber, 21);
  const auto b = small(ProblemKind::huber, 21);
  const auto c = small(ProblemKind::huber, 22);
  CHECK(a.data.blocks[0] == b.data.blocks[0]);
  CHECK(a.x_star == b.x_star);
  CHECK(a.data.blocks[0] != c.data.blocks[0]);

  const auto path = std::filesystem::temp_directory_path() / "extrapush_instance_roundtrip.json";
  save_instance(a, path);
  const auto back = load_instance(path);
  CHECK(back.kind == a.kind);
  CHECK(back.xi == a.xi);
  CHECK(back.x0 == a.x0);
  CHECK(back.x_star == a.x_star);
  for (std::size_t i = 0; i < a.agents(); ++i) {
    CHECK(back.data.blocks[i] == a.data.blocks[i]);
    CHECK(back.data.targets[i] == a.data.targets[i]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("mismatched least-squares blocks are rejected") {
  LeastSquaresData d;
  d.blocks = {Matrix::Ones(3, 2), Matrix::Ones(3, 4)};
  d.targets = {Vector::Ones(3), Vector::Ones(3)};
  CHECK_THROWS_AS(d.validate(), Error);
  d.blocks[1] = Matrix::Ones(3, 2);
  d.targets[1] = Vector::Ones(2);
  CHECK_THROWS_AS(d.validate(), Error);
}

TEST_CASE("parallel kernels equal the serial reference bit for bit") {
  Rng rng(5);
  Matrix a(7, 7), z1(7, 9), z2(7, 9), g1(7, 9), g2(7, 9);
  for (auto* m : {&a, &z1, &z2, &g1, &g2})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.unit_variance();
  Matrix p1, r1, p2, r2, p3, r3;
  kernels::mix(a, z1, p1);
  reference::mix(a, z1, r1);
  CHECK(p1 == r1);
  Matrix py = z2, ry = z2;
  kernels::update_correction(z1, p1, py);
  reference::update_correction(z1, r1, ry);
  CHECK(py == ry);
  kernels::extra_step(z1, p1, py, g1, 0.3, p2);
  reference::extra_step(z1, r1, ry, g1, 0.3, r2);
  CHECK(p2 == r2);
  const Vector w = Vector::LinSpaced(7, 1.0, 2.0);
  kernels::normalize_rows(z1, w, p3);
  reference::normalize_rows(z1, w, r3);
  CHECK(p3 == r3);
  kernels::gradient_step(z1, g1, 0.7, p3);
  reference::gradient_step(z1, g1, 0.7, r3);
  CHECK(p3 == r3);

  const auto inst = small(ProblemKind::huber, 8);
  const auto obj = make_objective(inst);
  kernels::grad_stack(*obj, inst.x0, p1);
  reference::grad_stack(*obj, inst.x0, r1);
  CHECK(p1 == r1);
}
