#include "doctest.h"
#include "test_support.hpp"

#include "ct_forward.hpp"
#include "data_metric.hpp"
#include "map_io.hpp"
#include "map_solver.hpp"

#include <cmath>

using namespace buqo;

namespace {

MapProblem identity_problem(const IdentityOperator &id, const Vec &y, double eps, std::size_t n) {
  return {&id, make_sparsity(SparsityKind::Haar3, n, n), n, n, y, eps, nullptr};
}

void check_feasible(const MapResult &r, const Vec &y, const LinearOperator &phi, double tol = 1e-4) {
  CHECK(r.residual <= data_bound(r.epsilon, tol, y));
  CHECK(distance2(phi.apply(r.x.values), y) == doctest::Approx(r.residual).epsilon(1e-10));
  CHECK(r.x.min() >= -1e-12);
}

} // namespace

TEST_CASE("identity with epsilon = 0 reproduces the data") {
  const std::size_t n = 8;
  IdentityOperator id(n * n);
  const Vec y = testing::uniform(n * n, 3);
  const MapResult r = solve_map(identity_problem(id, y, 0.0, n));
  CHECK(r.converged);
  CHECK(testing::max_abs_diff(r.x.values, y) <= 1e-6);
}

TEST_CASE("identity with epsilon >= ||y|| returns zero") {
  const std::size_t n = 8;
  IdentityOperator id(n * n);
  const Vec y = testing::uniform(n * n, 4);
  const MapResult r = solve_map(identity_problem(id, y, norm2(y) * 1.0001, n));
  CHECK(r.converged);
  CHECK(norm2(r.x.values) <= 1e-6);
  CHECK(r.objective <= 1e-6);
}

TEST_CASE("inconsistent noiseless data is flagged, not thrown") {
  const std::size_t n = 8;
  IdentityOperator id(n * n);
  Vec y = testing::uniform(n * n, 5);
  y[3] = -1.0;
  SolverConfig cfg;
  cfg.max_iters = 300;
  MapResult r;
  CHECK_NOTHROW(r = solve_map(identity_problem(id, y, 0.0, n), cfg));
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 300);
}

TEST_CASE("8x8 Gaussian instance matches the conic reference objective") {
  const auto &o = testing::oracles().at("map_8x8");
  const std::size_t n = o.at("n"), m = o.at("m");
  DenseOperator phi(m, n * n, o.at("phi").get<Vec>());
  const Vec y = o.at("y").get<Vec>();
  const double eps = o.at("epsilon");
  const double ref = o.at("objective");
  for (const auto &[key, value] : o.at("kkt").items())
    CHECK_MESSAGE(value.get<double>() <= 1e-6, key);

  SolverConfig cfg;
  cfg.max_iters = 100000;
  cfg.rel_change_tol = 1e-7;
  const MapResult r = solve_map({&phi, make_sparsity(SparsityKind::Haar3, n, n), n, n, y, eps, nullptr}, cfg);
  CHECK(r.converged);
  check_feasible(r, y, phi);
  CHECK(std::abs(r.objective - ref) / ref <= 1e-3);
}

TEST_CASE("default tolerances on the 8x8 instance also land within 1e-3") {
  const auto &o = testing::oracles().at("map_8x8");
  const std::size_t n = o.at("n"), m = o.at("m");
  DenseOperator phi(m, n * n, o.at("phi").get<Vec>());
  const Vec y = o.at("y").get<Vec>();
  const MapResult r =
      solve_map({&phi, make_sparsity(SparsityKind::Haar3, n, n), n, n, y, o.at("epsilon").get<double>(), nullptr});
  CHECK(r.converged);
  CHECK(std::abs(r.objective - o.at("objective").get<double>()) / o.at("objective").get<double>() <= 1e-3);
}

TEST_CASE("objective does not increase as epsilon grows") {
  const auto &o = testing::oracles().at("map_8x8");
  const std::size_t n = o.at("n"), m = o.at("m");
  DenseOperator phi(m, n * n, o.at("phi").get<Vec>());
  const Vec y = o.at("y").get<Vec>();
  const double eps = o.at("epsilon");
  SolverConfig cfg;
  cfg.max_iters = 50000;
  cfg.rel_change_tol = 1e-7;
  double prev = INFINITY;
  for (double f : {0.5, 1.0, 2.0, 4.0}) {
    const MapResult r =
        solve_map({&phi, make_sparsity(SparsityKind::Haar3, n, n), n, n, y, f * eps, nullptr}, cfg);
    CHECK(r.converged);
    CHECK(r.objective <= prev * (1 + 1e-4));
    prev = r.objective;
  }
}

TEST_CASE("CT solve with the ramp metric: feasible, deterministic, exact counters") {
  const std::size_t n = 32;
  const Geometry g{40, 60, n};
  Phantom ph;
  ph.size = n;
  ph.ellipses.push_back({16, 16, 12, 9, 10, 0.6});
  ph.ellipses.push_back({12, 14, 3, 3, 0, 0.3});
  ParallelBeamProjector phi(g);
  const SimulatedData sim = simulate_data(phi, {0.02, 3}, render_phantom(ph));
  const auto metric = make_data_metric(g);
  const MapProblem p{&phi, make_sparsity(SparsityKind::Haar3, n, n), n, n, sim.y.values, sim.epsilon, metric};

  const auto f0 = phi.forward_count(), a0 = phi.adjoint_count();
  SolverConfig cfg;
  const MapResult a = solve_map(p, cfg);
  CHECK(a.converged);
  check_feasible(a, sim.y.values, phi);
  const EvaluationCount want = map_expected_evaluations(a.iterations, cfg);
  CHECK(a.phi_forward == want.forward);
  CHECK(a.phi_adjoint == want.adjoint);
  CHECK(phi.forward_count() - f0 - 1 == want.forward);
  CHECK(phi.adjoint_count() - a0 == want.adjoint);

  const MapResult b = solve_map(p, cfg);
  CHECK(b.x.values == a.x.values);
  CHECK(b.iterations == a.iterations);

  SolverConfig known = cfg;
  known.phi_norm = a.phi_norm;
  const MapResult c = solve_map(p, known);
  CHECK(c.phi_forward == map_expected_evaluations(c.iterations, known).forward);
  CHECK(c.phi_forward == static_cast<std::uint64_t>(c.iterations) + 1);
}

TEST_CASE("MAP results survive a RAWJ round trip") {
  const std::size_t n = 8;
  IdentityOperator id(n * n);
  const Vec y = testing::uniform(n * n, 9);
  const MapResult r = solve_map(identity_problem(id, y, 0.5, n));
  const auto dir = testing::scratch("map_io");
  save_map_result(dir / "x_map", r);
  const MapResult back = load_map_result(dir / "x_map");
  CHECK(back.x.values == r.x.values);
  CHECK(back.residual == r.residual);
  CHECK(back.objective == r.objective);
  CHECK(back.epsilon == r.epsilon);
  CHECK(back.iterations == r.iterations);
  CHECK(back.converged == r.converged);
  CHECK(back.phi_forward == r.phi_forward);
  CHECK(back.psi_kind == r.psi_kind);
  CHECK(map_result_json(back) == map_result_json(r));
}

TEST_CASE("solver input validation") {
  const std::size_t n = 8;
  IdentityOperator id(n * n);
  const Vec y(n * n, 1.0);
  MapProblem p = identity_problem(id, y, 0.1, n);
  p.epsilon = -1.0;
  CHECK_THROWS_AS(solve_map(p), std::invalid_argument);
  p = identity_problem(id, Vec(5, 1.0), 0.1, n);
  CHECK_THROWS_AS(solve_map(p), DimensionError);
  p = identity_problem(id, y, 0.1, n);
  p.phi = nullptr;
  CHECK_THROWS_AS(solve_map(p), std::invalid_argument);
}

TEST_CASE("norm estimates") {
  DenseOperator d(3, 3, {3, 0, 0, 0, -5, 0, 0, 0, 1});
  CHECK(estimate_operator_norm(d, 50) == doctest::Approx(5.0).epsilon(1e-8));
  EuclideanMetric e(3);
  CHECK(estimate_metric_norm(d, e, 50) == doctest::Approx(5.0).epsilon(1e-8));
  CHECK(d.forward_count() == 100);
  CHECK(d.adjoint_count() == 100);
}

TEST_CASE("ramp metric is orthonormal with positive weights") {
  const Geometry g{7, 30, 16};
  RampMetric r(g);
  CHECK(r.dim() == 210);
  const Vec v = testing::gaussian(210, 1);
  Vec t(210), back(210);
  r.forward(v, t);
  r.inverse(t, back);
  CHECK(testing::max_abs_diff(back, v) <= 1e-12);
  CHECK(norm2(t) == doctest::Approx(norm2(v)).epsilon(1e-12));
  for (double w : r.weights())
    CHECK(w > 0.0);
  CHECK(r.weights()[1] == doctest::Approx(1.0 / 30));
  CHECK(r.weights()[0] == doctest::Approx(0.5 / 30));
}

TEST_CASE("metric ball dual satisfies the projection's optimality conditions") {
  const std::size_t m = 40;
  const Vec r = testing::uniform(m, 2, 0.05, 2.0);
  const Vec c = testing::gaussian(m, 3);
  const double sigma = 0.7;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Vec w = testing::gaussian(m, 100 + s);
    for (auto &x : w)
      x *= 3.0;
    const Vec w0 = w;
    const double radius = 0.5 + 0.1 * s;
    const double lambda = metric_ball_dual(w, c, radius, sigma, r);
    // z = A^-1 (w0 - u) is the metric projection of A^-1 w0 onto the ball and
    // u = lambda (z - c) with lambda >= 0.
    Vec z(m), zc(m);
    for (std::size_t i = 0; i < m; ++i) {
      z[i] = (w0[i] - w[i]) / (sigma * r[i]);
      zc[i] = z[i] - c[i];
    }
    if (lambda == 0.0) {
      CHECK(norm2(zc) <= radius * (1 + 1e-12));
      CHECK(norm2(w) == 0.0);
    } else {
      CHECK(lambda > 0.0);
      CHECK(norm2(zc) == doctest::Approx(radius).epsilon(1e-10));
      for (std::size_t i = 0; i < m; ++i)
        CHECK(w[i] == doctest::Approx(lambda * zc[i]).epsilon(1e-9).scale(1.0));
    }
  }
  Vec inside = c;
  for (std::size_t i = 0; i < m; ++i)
    inside[i] *= sigma * r[i];
  CHECK(metric_ball_dual(inside, c, 1.0, sigma, r) == 0.0);
}
