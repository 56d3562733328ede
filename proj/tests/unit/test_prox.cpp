#include "doctest.h"
#include "test_support.hpp"

#include "prox.hpp"

#include <cmath>

using namespace buqo;
using namespace buqo::prox;

TEST_CASE("l2 ball projection examples") {
  CHECK(project_l2_ball({0.0, 2.0}, Vec{1, 1}) == Vec{1, 1});
  const Vec p = project_l2_ball({0.0, 1.0}, Vec{3, 4});
  CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(project_l2_ball({Vec{1, 2}, 0.0}, Vec{7, -3}) == Vec{1, 2});
  CHECK_THROWS_AS(project_l2_ball({0.0, -1.0}, Vec{1}), std::invalid_argument);
  CHECK_THROWS_AS(project_l2_ball({Vec{1, 2, 3}, 1.0}, Vec{1, 1}), DimensionError);
}

TEST_CASE("l1 ball projection matches brute-force and conic references") {
  for (const auto &c : testing::oracles().at("l1_ball")) {
    const Vec v = c.at("v").get<Vec>();
    const double r = c.at("radius").get<double>();
    const Vec got = project_l1_ball(r, v);
    CHECK(testing::max_abs_diff(got, c.at("projection").get<Vec>()) <= 1e-12);
    CHECK(norm1(got) <= r * (1 + 1e-12));
  }
  CHECK(project_l1_ball(0.0, Vec{1, -2}) == Vec{0, 0});
  CHECK_THROWS_AS(project_l1_ball(-1.0, Vec{1}), std::invalid_argument);
}

TEST_CASE("nonnegativity and soft-threshold") {
  CHECK(project_nonneg(Vec{-1, 2}) == Vec{0, 2});
  CHECK(project_nonneg(Vec{0.5, 3}) == Vec{0.5, 3});
  const Vec z = project_nonneg(Vec{-0.0});
  CHECK_FALSE(std::signbit(z[0]));
  CHECK(soft_threshold(0.0, Vec{1, -2}) == Vec{1, -2});
  CHECK(soft_threshold(1.0, Vec{2, -0.5}) == Vec{1, 0});
  CHECK(soft_threshold(5.0, Vec{4, -5, 0.1}) == Vec{0, 0, 0});
  CHECK_THROWS_AS(soft_threshold(-1.0, Vec{1}), std::invalid_argument);
}

TEST_CASE("projections are idempotent and nonexpansive") {
  const BallSpec l2{Vec(20, 0.3), 1.5};
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Vec u = testing::gaussian(20, 2 * s), v = testing::gaussian(20, 2 * s + 1);
    const Vec pu = project_l2_ball(l2, u), pv = project_l2_ball(l2, v);
    CHECK(testing::max_abs_diff(project_l2_ball(l2, pu), pu) <= 1e-12);
    CHECK(distance2(pu, pv) <= distance2(u, v) + 1e-15);

    const Vec qu = project_l1_ball(2.0, u), qv = project_l1_ball(2.0, v);
    CHECK(testing::max_abs_diff(project_l1_ball(2.0, qu), qu) <= 1e-12);
    CHECK(distance2(qu, qv) <= distance2(u, v) + 1e-15);

    const Vec nu = project_nonneg(u), nv = project_nonneg(v);
    CHECK(project_nonneg(nu) == nu);
    CHECK(distance2(nu, nv) <= distance2(u, v) + 1e-15);
  }
}

TEST_CASE("ball spec distance in both norms") {
  const BallSpec b1{1.0, 2.0, BallNorm::L1};
  CHECK(b1.distance_from_center(Vec{2, -1}) == 3.0);
  const BallSpec b2{Vec{0, 0}, 1.0};
  CHECK(b2.distance_from_center(Vec{3, 4}) == 5.0);
  CHECK(b2.center_at(1) == 0.0);
}
