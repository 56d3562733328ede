#include "structure_set.hpp"

#include "sparsity.hpp"

#include <algorithm>
#include <cmath>

namespace buqo {

double percentile(std::span<const double> samples, double p) {
  if (samples.empty())
    throw std::invalid_argument("percentile of an empty sample list");
  if (!(p >= 0.0 && p <= 100.0))
    throw std::invalid_argument("percentile must lie in [0, 100]");
  Vec s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double pos = p / 100.0 * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  const double f = pos - static_cast<double>(lo);
  return s[lo] + f * (s[hi] - s[lo]);
}

namespace {

// Bound on ||x - x*|| relative to ||x0|| at the projection's exit.
constexpr double kProjectionAccuracy = 1e-7;

void center_and_radius(std::span<const double> samples, double floor, double &mu, double &r) {
  mu = percentile(samples, 50.0);
  const double upper = percentile(samples, 60.0) - mu;
  const double lower = mu - percentile(samples, 40.0);
  r = std::max({upper, lower, floor});
}

} // namespace

NeighborhoodStats sample_neighborhood(const Image &img, const Mask &mask, std::size_t ring_width) {
  if (mask.height != img.height || mask.width != img.width)
    throw DimensionError("mask and image dimensions differ");
  if (mask.count() == 0)
    throw std::invalid_argument("empty structure mask");
  const Mask ring = mask.ring(ring_width);
  const auto idx = ring.indices();
  if (idx.empty())
    throw std::invalid_argument("mask touches entire image");

  GradientOperator grad(img.height, img.width);
  const Vec g = grad.apply(img.values);
  const std::size_t n = img.size();

  NeighborhoodStats st;
  for (auto i : idx)
    st.intensities.push_back(img.values[i]);
  for (auto i : idx)
    st.gradients.push_back(g[i]);
  for (auto i : idx)
    st.gradients.push_back(g[n + i]);

  const double scale = std::max(img.max(), 0.0);
  center_and_radius(st.intensities, kPixRadiusFloor * scale, st.mu_pix, st.r_pix);
  center_and_radius(st.gradients, kGradRadiusFloor * scale, st.mu_grad, st.r_grad);
  // A blank image has no scale to floor against; keep the balls nondegenerate.
  st.r_pix = std::max(st.r_pix, 1e-12);
  st.r_grad = std::max(st.r_grad, 1e-12);
  return st;
}

StructureSet::StructureSet(Mask mask, NeighborhoodStats stats) : mask_(std::move(mask)), stats_(std::move(stats)) {
  if (mask_.count() == 0)
    throw std::invalid_argument("empty structure mask");
  if (!(stats_.r_pix > 0.0) || !(stats_.r_grad > 0.0))
    throw std::invalid_argument("structure-set radii must be positive");
  select_ = std::make_shared<MaskSelectOperator>(mask_);
  auto grad = std::make_shared<GradientOperator>(mask_.height, mask_.width);
  masked_grad_ = std::make_shared<ComposedOperator>(std::make_shared<MaskSelectOperator>(mask_, 2), grad);
}

prox::BallSpec StructureSet::intensity_ball() const { return {stats_.mu_pix, stats_.r_pix, prox::BallNorm::L2}; }

prox::BallSpec StructureSet::gradient_ball() const { return {stats_.mu_grad, stats_.r_grad, prox::BallNorm::L2}; }

nlohmann::json StructureSet::to_json(bool include_samples) const {
  nlohmann::json j;
  j["height"] = mask_.height;
  j["width"] = mask_.width;
  j["mask_pixels"] = mask_.count();
  j["mu_pix"] = stats_.mu_pix;
  j["r_pix"] = stats_.r_pix;
  j["mu_grad"] = stats_.mu_grad;
  j["r_grad"] = stats_.r_grad;
  j["intensity_samples"] = stats_.intensities.size();
  j["gradient_samples"] = stats_.gradients.size();
  if (include_samples) {
    j["intensities"] = stats_.intensities;
    j["gradients"] = stats_.gradients;
  }
  return j;
}

bool residuals_within(const StructureSet &s, const SetResiduals &r, double rel_tol, double neg_tol) {
  return r.intensity <= neg_tol && r.energy <= rel_tol * s.stats().r_pix &&
         r.smoothness <= rel_tol * s.stats().r_grad;
}

Membership membership(const StructureSet &s, std::span<const double> x, double rel_tol) {
  if (x.size() != s.pixels())
    throw_dimension("membership image", s.pixels(), x.size());
  Membership m;
  const double lo = x.empty() ? 0.0 : *std::min_element(x.begin(), x.end());
  m.residuals.intensity = std::max(0.0, -lo);
  m.residuals.energy =
      std::max(0.0, s.intensity_ball().distance_from_center(s.select().apply(x)) - s.stats().r_pix);
  m.residuals.smoothness =
      std::max(0.0, s.gradient_ball().distance_from_center(s.masked_gradient().apply(x)) - s.stats().r_grad);
  m.member = residuals_within(s, m.residuals, rel_tol);
  return m;
}

ProjectionResult project_onto_structure_set(const StructureSet &s, const Image &x0, const SolverConfig &cfg) {
  if (x0.size() != s.pixels())
    throw_dimension("projection input", s.pixels(), x0.size());
  const LinearOperator &sel = s.select();
  const LinearOperator &mg = s.masked_gradient();
  const std::size_t n = x0.size(), k1 = sel.output_dim(), k2 = mg.output_dim();
  const prox::BallSpec b1 = s.intensity_ball(), b2 = s.gradient_ball();

  // ||[M; M grad]||^2 <= 1 + 8.
  const double L = 3.0;
  double tau = 1.0 / L, sigma = 1.0 / L;

  Vec x = prox::project_nonneg(x0.values), xbar = x, x_new(n);
  Vec v1(k1, 0.0), v2(k2, 0.0), w1(k1), w2(k2), a1(n), a2(n);

  // sqrt(2 gap) bounds ||x - x*|| by strong convexity. The dual value at v
  // uses x(v) = P_+(x0 - K^T v) and the balls' support functions.
  const double x0n = std::max(norm2(x0.values), 1e-300);
  auto support = [](const prox::BallSpec &b, const Vec &v) {
    double sc = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      sc += b.center_at(i) * v[i];
      vv += v[i] * v[i];
    }
    return sc + b.radius * std::sqrt(vv);
  };
  auto gap_bound = [&](const Vec &ka, const Vec &kb) {
    double primal = 0.0, dual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = ka[i] + kb[i];
      const double xv = std::max(0.0, x0.values[i] - a);
      primal += 0.5 * (x[i] - x0.values[i]) * (x[i] - x0.values[i]);
      dual += 0.5 * (xv - x0.values[i]) * (xv - x0.values[i]) + a * xv;
    }
    dual -= support(b1, v1) + support(b2, v2);
    return std::sqrt(2.0 * std::max(0.0, primal - dual));
  };

  ProjectionResult res;
  for (int it = 0; it < cfg.max_iters; ++it) {
    // Duals: v <- w - sigma P_B(w / sigma), w = v + sigma K xbar.
    sel.apply(xbar, w1);
    mg.apply(xbar, w2);
    for (std::size_t i = 0; i < k1; ++i) {
      v1[i] += sigma * w1[i];
      w1[i] = v1[i] / sigma;
    }
    for (std::size_t i = 0; i < k2; ++i) {
      v2[i] += sigma * w2[i];
      w2[i] = v2[i] / sigma;
    }
    prox::project_l2_ball_inplace(b1, w1);
    prox::project_l2_ball_inplace(b2, w2);
    for (std::size_t i = 0; i < k1; ++i)
      v1[i] -= sigma * w1[i];
    for (std::size_t i = 0; i < k2; ++i)
      v2[i] -= sigma * w2[i];

    // Primal: prox of tau (1/2 ||. - x0||^2 + nonnegativity).
    sel.adjoint(v1, a1);
    mg.adjoint(v2, a2);
    double change = 0.0, xn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = (x[i] - tau * (a1[i] + a2[i]) + tau * x0.values[i]) / (1.0 + tau);
      x_new[i] = v > 0.0 ? v : 0.0;
      change += (x_new[i] - x[i]) * (x_new[i] - x[i]);
      xn += x[i] * x[i];
    }
    change = std::sqrt(change);
    xn = std::sqrt(xn);

    // Strong convexity (modulus 1) lets the steps accelerate.
    const double theta = 1.0 / std::sqrt(1.0 + 2.0 * tau);
    for (std::size_t i = 0; i < n; ++i)
      xbar[i] = x_new[i] + theta * (x_new[i] - x[i]);
    x.swap(x_new);
    tau *= theta;
    sigma /= theta;
    res.iterations = it + 1;

    if ((change <= cfg.rel_change_tol * xn || change == 0.0) && gap_bound(a1, a2) <= kProjectionAccuracy * x0n) {
      const Membership m = membership(s, x, std::min(cfg.feas_tol, kProjectionAccuracy));
      if (m.member) {
        res.converged = true;
        break;
      }
    }
  }
  res.x = Image(x0.height, x0.width, x);
  res.residuals = membership(s, res.x.values, cfg.feas_tol).residuals;
  return res;
}

} // namespace buqo
