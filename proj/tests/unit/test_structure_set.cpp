#include "doctest.h"
#include "test_support.hpp"

#include "ct_forward.hpp"
#include "data_metric.hpp"
#include "structure_set.hpp"

#include <cmath>

using namespace buqo;

namespace {

// Bright vessel with a dark blob, mask over the blob.
struct Scene {
  Image img;
  Mask mask;
};

Scene vessel_scene(std::size_t n = 48, double blob = 0.3) {
  Phantom ph;
  ph.size = n;
  ph.ellipses.push_back({n / 2.0, n / 2.0, n / 2.0 - 2, n / 2.0 - 4, 0, 0.2});
  ph.ellipses.push_back({n / 2.0, n / 2.0, 10, 8, 0, 0.7});
  ph.embolus = Embolus{n / 2.0, n / 2.0, 3.5, blob};
  return {render_phantom(ph), embolus_mask(ph)};
}

StructureSet scene_set(const Scene &s) { return StructureSet(s.mask, sample_neighborhood(s.img, s.mask, 3)); }

} // namespace

TEST_CASE("percentiles interpolate linearly between order statistics") {
  const auto &o = testing::oracles().at("percentiles_1to5");
  const Vec s{5, 1, 4, 2, 3};
  CHECK(percentile(s, 50) == o.at("p50").get<double>());
  CHECK(percentile(s, 60) == doctest::Approx(o.at("p60").get<double>()).epsilon(1e-15));
  CHECK(percentile(s, 40) == doctest::Approx(o.at("p40").get<double>()).epsilon(1e-15));
  CHECK(percentile(s, 0) == 1.0);
  CHECK(percentile(s, 100) == 5.0);
  CHECK_THROWS_AS(percentile(Vec{}, 50), std::invalid_argument);
  CHECK_THROWS_AS(percentile(s, 101), std::invalid_argument);
}

TEST_CASE("constant neighborhood: median is the constant and radii hit their floors") {
  const Image img(20, 20, 0.6);
  const Mask m = Mask::disk(20, 20, 10, 10, 2);
  const NeighborhoodStats st = sample_neighborhood(img, m, 3);
  CHECK(st.mu_pix == 0.6);
  CHECK(st.r_pix == doctest::Approx(kPixRadiusFloor * 0.6));
  CHECK(st.mu_grad == 0.0);
  CHECK(st.r_grad == doctest::Approx(kGradRadiusFloor * 0.6));
  CHECK(st.intensities.size() == m.ring(3).count());
  CHECK(st.gradients.size() == 2 * m.ring(3).count());
}

TEST_CASE("ring inside a vessel of intensity 0.9 gives mu_pix = 0.9") {
  Phantom ph;
  ph.size = 40;
  ph.ellipses.push_back({20, 20, 14, 12, 0, 0.9});
  const Image img = render_phantom(ph);
  const NeighborhoodStats st = sample_neighborhood(img, Mask::disk(40, 40, 20, 20, 3), 3);
  CHECK(st.mu_pix == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("neighborhood sampling errors") {
  const Image img(6, 6, 1.0);
  Mask all(6, 6, std::vector<std::uint8_t>(36, 1));
  CHECK_THROWS_WITH_AS(sample_neighborhood(img, all, 3), "mask touches entire image", std::invalid_argument);
  CHECK_THROWS_AS(sample_neighborhood(img, Mask(6, 6), 3), std::invalid_argument);
  CHECK_THROWS_AS(sample_neighborhood(img, Mask(5, 6), 3), DimensionError);
}

TEST_CASE("membership residuals") {
  const Scene sc = vessel_scene();
  const StructureSet s = scene_set(sc);
  Image x = sc.img;
  x.values[0] = -0.5;
  const Membership m = membership(s, x.values);
  CHECK_FALSE(m.member);
  CHECK(m.residuals.intensity == doctest::Approx(0.5));

  // Dark blob: far from the neighborhood median.
  const Membership blob = membership(s, sc.img.values);
  CHECK_FALSE(blob.member);
  CHECK(blob.residuals.energy > 0.0);

  // Constant at mu_pix over a wide area around the mask: every masked value and
  // gradient sits at the center of its ball.
  Image flat(sc.img.height, sc.img.width, s.stats().mu_pix);
  const Membership f = membership(s, flat.values);
  CHECK(f.member);
  CHECK(f.residuals.energy == 0.0);
}

TEST_CASE("projection fixed point") {
  const Scene sc = vessel_scene();
  const StructureSet s = scene_set(sc);
  const Image flat(sc.img.height, sc.img.width, s.stats().mu_pix);
  const ProjectionResult p = project_onto_structure_set(s, flat);
  CHECK(p.converged);
  CHECK(testing::max_abs_diff(p.x.values, flat.values) <= 1e-6);
}

TEST_CASE("single active ball reproduces the closed-form projection") {
  const std::size_t n = 8;
  Mask all(n, n, std::vector<std::uint8_t>(n * n, 1));
  NeighborhoodStats st;
  st.mu_pix = 0.0;
  st.r_pix = 1.0;
  st.mu_grad = 0.0;
  st.r_grad = 1e6;
  const StructureSet s(all, st);
  Image x0(n, n);
  x0.at(3, 5) = 2.0;
  const ProjectionResult p = project_onto_structure_set(s, x0);
  CHECK(p.converged);
  Image want(n, n);
  want.at(3, 5) = 1.0;
  CHECK(testing::max_abs_diff(p.x.values, want.values) <= 1e-6);
}

TEST_CASE("projection fills in the dark blob of an embolus-bearing MAP image") {
  const std::size_t n = 48;
  const Scene sc = vessel_scene(n);
  const Geometry g{72, 80, n};
  ParallelBeamProjector phi(g);
  const SimulatedData sim = simulate_data(phi, {0.01, 5}, sc.img);
  const MapResult map = solve_map(
      {&phi, make_sparsity(SparsityKind::Haar3, n, n), n, n, sim.y.values, sim.epsilon, make_data_metric(g)});
  REQUIRE(map.converged);
  const StructureSet s(sc.mask, sample_neighborhood(map.x, sc.mask, 3));
  const ProjectionResult p = project_onto_structure_set(s, map.x);
  CHECK(p.converged);
  const Vec inside = masked_select(sc.mask, p.x);
  double e = 0.0;
  for (double v : inside)
    e += (v - s.stats().mu_pix) * (v - s.stats().mu_pix);
  CHECK(std::sqrt(e) <= s.stats().r_pix * (1 + 1e-4));
  CHECK(residuals_within(s, p.residuals, 1e-4));
  CHECK(p.x.min() >= -1e-12);
  // Outside the mask and its one-pixel border the image barely moves.
  double inner_mean = 0.0;
  for (double v : inside)
    inner_mean += v;
  CHECK(inner_mean / inside.size() > 0.6);
}

TEST_CASE("projection outputs satisfy all three constraints; idempotent and minimal") {
  const Scene sc = vessel_scene();
  const StructureSet s = scene_set(sc);
  const double tol = 1e-4;
  std::vector<Image> members;
  for (std::uint64_t k = 0; k < 6; ++k) {
    Image x0 = sc.img;
    const Vec noise = testing::gaussian(x0.size(), 40 + k);
    for (std::size_t i = 0; i < x0.size(); ++i)
      x0.values[i] += 0.05 * noise[i];
    const ProjectionResult p = project_onto_structure_set(s, x0);
    REQUIRE(p.converged);
    CHECK(residuals_within(s, p.residuals, tol));
    CHECK(membership(s, p.x.values, tol).member);

    const ProjectionResult pp = project_onto_structure_set(s, p.x);
    CHECK(distance2(pp.x.values, p.x.values) <= 2 * tol * std::max(1.0, norm2(p.x.values)));

    // Every other member found so far is a feasible point no closer to x0.
    const double d = distance2(p.x.values, x0.values);
    for (const auto &z : members)
      CHECK(d <= distance2(z.values, x0.values) + tol * norm2(x0.values));
    members.push_back(p.x);
  }
}

TEST_CASE("S is convex: combinations of members are members") {
  const Scene sc = vessel_scene();
  const StructureSet s = scene_set(sc);
  std::vector<Image> members;
  for (std::uint64_t k = 0; k < 10; ++k) {
    Image x0 = sc.img;
    const Vec noise = testing::gaussian(x0.size(), 70 + k);
    for (std::size_t i = 0; i < x0.size(); ++i)
      x0.values[i] = std::max(0.0, x0.values[i] + 0.2 * noise[i]);
    const ProjectionResult p = project_onto_structure_set(s, x0);
    REQUIRE(p.converged);
    members.push_back(p.x);
  }
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  int pairs = 0;
  while (pairs < 50) {
    const std::size_t i = pick(rng), j = pick(rng);
    if (i == j)
      continue;
    const double t = ut(rng);
    Vec z(members[i].size());
    for (std::size_t q = 0; q < z.size(); ++q)
      z[q] = t * members[i].values[q] + (1 - t) * members[j].values[q];
    CHECK(membership(s, z, 1e-4).member);
    ++pairs;
  }
}

TEST_CASE("structure set description") {
  const Scene sc = vessel_scene();
  const StructureSet s = scene_set(sc);
  const json j = s.to_json(true);
  CHECK(j.at("mask_pixels") == sc.mask.count());
  CHECK(j.at("intensities").size() == s.stats().intensities.size());
  CHECK(j.at("r_pix").get<double>() > 0.0);
  CHECK_FALSE(s.to_json().contains("intensities"));
  CHECK(s.select().output_dim() == sc.mask.count());
  CHECK(s.masked_gradient().output_dim() == 2 * sc.mask.count());
  CHECK(adjoint_mismatch(s.masked_gradient(), 100, 3) <= 1e-8);
}
