#include "map_solver.hpp"


#include <algorithm>
#include <cmath>
#include <random>

namespace buqo {

namespace {

// Residual-balancing step adaptation: tau and sigma move in opposite directions
// (their product is fixed) with a geometrically decaying rate.
constexpr double kAdaptStart = 0.5;
constexpr double kAdaptDecay = 0.95;
constexpr double kAdaptRatio = 1.5;

} // namespace

double estimate_operator_norm(const LinearOperator &op, int iters, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Vec v(op.input_dim());
  for (auto &x : v)
    x = g(rng);
  double nv = norm2(v);
  for (auto &x : v)
    x /= nv;
  double lambda = 0.0;
  Vec av(op.output_dim());
  for (int k = 0; k < iters; ++k) {
    op.apply(v, av);
    op.adjoint(av, v);
    lambda = norm2(v);
    if (lambda == 0.0)
      return 0.0;
    for (auto &x : v)
      x /= lambda;
  }
  return std::sqrt(lambda);
}

EvaluationCount map_expected_evaluations(int iterations, const SolverConfig &cfg) {
  const std::uint64_t power = cfg.phi_norm ? 0 : static_cast<std::uint64_t>(cfg.power_iters);
  const auto it = static_cast<std::uint64_t>(iterations);
  // Phi^T y for the warm start and Phi x0 before the loop; one of each per iteration.
  return {power + 1 + it, power + 1 + it};
}

double data_bound(double epsilon, double feas_tol, std::span<const double> y) {
  if (epsilon > 0.0)
    return epsilon * (1.0 + feas_tol);
  return 1e-9 * std::max(1.0, norm2(y));
}

MapResult solve_map(const MapProblem &p, const SolverConfig &cfg) {
  if (!p.phi || !p.psi.op)
    throw std::invalid_argument("MAP problem needs both Phi and Psi");
  const LinearOperator &phi = *p.phi;
  const LinearOperator &psi = *p.psi.op;
  const std::size_t n = phi.input_dim(), m = phi.output_dim(), k = psi.output_dim();
  if (p.height * p.width != n)
    throw_dimension("MAP image", n, p.height * p.width);
  if (psi.input_dim() != n)
    throw_dimension("Psi input", n, psi.input_dim());
  if (p.y.size() != m)
    throw_dimension("MAP data", m, p.y.size());
  if (!(p.epsilon >= 0.0) || !std::isfinite(p.epsilon))
    throw std::invalid_argument("epsilon must be nonnegative");
  std::shared_ptr<const DataMetric> metric = p.metric;
  if (!metric)
    metric = std::make_shared<EuclideanMetric>(m);
  if (metric->dim() != m)
    throw_dimension("data metric", m, metric->dim());
  const Vec &r = metric->weights();

  const auto fwd0 = phi.forward_count(), adj0 = phi.adjoint_count();

  MapResult res;
  res.epsilon = p.epsilon;
  res.psi_kind = p.psi.kind;
  res.phi_norm = cfg.phi_norm ? *cfg.phi_norm : estimate_metric_norm(phi, *metric, cfg.power_iters);
  // Work with Phi' = Phi / c so that ||R^(1/2) Phi'|| <= 1; the 1% margin covers
  // the power iteration's underestimate.
  const double c = res.phi_norm > 0.0 ? 1.01 * res.phi_norm : 1.0;
  const double knorm = std::sqrt(1.0 + p.psi.norm_bound * p.psi.norm_bound);
  double tau = cfg.step_balance / knorm;
  double sigma = 1.0 / (cfg.step_balance * knorm);
  double adapt = kAdaptStart;

  // Data-block quantities live in the metric's spectral coordinates (hats).
  auto to_spectral = [&](std::span<const double> v, std::span<double> out) {
    metric->forward(v, out);
    for (auto &x : out)
      x /= c;
  };
  Vec y_hat(m);
  to_spectral(p.y, y_hat);
  const double radius = p.epsilon / c;

  // Warm start: Phi^T y rescaled into [0, 1].
  Vec x = phi.adjoint(p.y);
  const double xmax = *std::max_element(x.begin(), x.end());
  for (auto &v : x)
    v = xmax > 0.0 && v > 0.0 ? v / xmax : 0.0;

  Vec phix = phi.apply(x), px_hat(m), qx_hat(m), u1_hat(m, 0.0), w_hat(m), u1(m);
  to_spectral(phix, px_hat);
  Vec u2(k, 0.0), u2_new(k), psix = psi.apply(x), psix_new(k);
  Vec kt(n, 0.0), kt_new(n), x_new(n), tmp_n(n);
  const double bound = data_bound(p.epsilon, cfg.feas_tol, p.y);

  res.residual = distance2(phix, p.y);
  for (int it = 0; it < cfg.max_iters; ++it) {
    // Primal descent with nonnegativity; kt = Phi'^T u1 + Psi^T u2.
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x[i] - tau * kt[i];
      x_new[i] = v > 0.0 ? v : 0.0;
    }
    phi.apply(x_new, phix);
    to_spectral(phix, qx_hat);
    psi.apply(x_new, psix_new);

    // Dual ascent at the extrapolated point 2 x_{k+1} - x_k, whose images follow
    // from linearity.
    for (std::size_t i = 0; i < m; ++i)
      w_hat[i] = u1_hat[i] + sigma * r[i] * (2.0 * qx_hat[i] - px_hat[i]);
    metric_ball_dual(w_hat, y_hat, radius, sigma, r);
    for (std::size_t i = 0; i < k; ++i)
      u2_new[i] = std::clamp(u2[i] + sigma * (2.0 * psix_new[i] - psix[i]), -1.0, 1.0);

    metric->inverse(w_hat, u1);
    phi.adjoint(u1, kt_new);
    psi.adjoint(u2_new, tmp_n);
    for (std::size_t i = 0; i < n; ++i)
      kt_new[i] = kt_new[i] / c + tmp_n[i];

    // Primal and dual residuals of the iteration, used to balance the steps.
    double pr = 0.0, dr = 0.0, change = 0.0, xn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = x[i] - x_new[i];
      const double e = dx / tau - (kt[i] - kt_new[i]);
      pr += e * e;
      change += dx * dx;
      xn += x[i] * x[i];
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double e = (u1_hat[i] - w_hat[i]) / (sigma * r[i]) - (px_hat[i] - qx_hat[i]);
      dr += e * e;
    }
    for (std::size_t i = 0; i < k; ++i) {
      const double e = (u2[i] - u2_new[i]) / sigma - (psix[i] - psix_new[i]);
      dr += e * e;
    }
    pr = std::sqrt(pr);
    dr = std::sqrt(dr);
    change = std::sqrt(change);
    xn = std::sqrt(xn);

    x.swap(x_new);
    px_hat.swap(qx_hat);
    psix.swap(psix_new);
    u1_hat.swap(w_hat);
    u2.swap(u2_new);
    kt.swap(kt_new);

    if (cfg.adaptive_steps) {
      if (pr > kAdaptRatio * dr) {
        tau /= 1.0 - adapt;
        sigma *= 1.0 - adapt;
        adapt *= kAdaptDecay;
      } else if (dr > kAdaptRatio * pr) {
        tau *= 1.0 - adapt;
        sigma /= 1.0 - adapt;
        adapt *= kAdaptDecay;
      }
    }

    res.iterations = it + 1;
    res.residual = distance2(phix, p.y);
    const double rel = change / std::max(xn, 1e-300);
    if (cfg.progress && cfg.progress_every > 0 && res.iterations % cfg.progress_every == 0)
      cfg.progress(res.iterations, res.residual, rel);
    // The first step starts from zero duals and never moves x.
    if (it > 0 && change <= cfg.rel_change_tol * xn && res.residual <= bound) {
      res.converged = true;
      break;
    }
  }

  res.x = Image(p.height, p.width, x);
  res.objective = norm1(psix);
  res.phi_forward = phi.forward_count() - fwd0;
  res.phi_adjoint = phi.adjoint_count() - adj0;
  return res;
}

} // namespace buqo
