#include "prox.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace buqo::prox {

namespace {

void check_radius(double r) {
  if (!(r >= 0.0) || !std::isfinite(r))
    throw std::invalid_argument("ball radius must be nonnegative and finite, got " + std::to_string(r));
}

} // namespace

double BallSpec::center_at(std::size_t i) const {
  if (const auto *s = std::get_if<double>(&center))
    return *s;
  return std::get<Vec>(center)[i];
}

double BallSpec::distance_from_center(std::span<const double> v) const {
  if (const auto *c = std::get_if<Vec>(&center); c && c->size() != v.size())
    throw_dimension("ball center", c->size(), v.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - center_at(i);
    acc += norm == BallNorm::L2 ? d * d : std::abs(d);
  }
  return norm == BallNorm::L2 ? std::sqrt(acc) : acc;
}

void project_l2_ball_inplace(const BallSpec &spec, std::span<double> v) {
  if (spec.norm != BallNorm::L2)
    throw std::invalid_argument("project_l2_ball needs an l2 ball");
  check_radius(spec.radius);
  const double dist = spec.distance_from_center(v);
  if (dist <= spec.radius)
    return;
  const double scale = spec.radius / dist;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double c = spec.center_at(i);
    v[i] = c + scale * (v[i] - c);
  }
}

Vec project_l2_ball(const BallSpec &spec, std::span<const double> v) {
  Vec out(v.begin(), v.end());
  project_l2_ball_inplace(spec, out);
  return out;
}

void project_l1_ball_inplace(double radius, std::span<double> v) {
  check_radius(radius);
  if (norm1(v) <= radius)
    return;
  if (radius == 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
    return;
  }
  // Largest k with mu_k > (sum_{i<=k} mu_i - radius) / k, mu sorted descending.
  Vec mu(v.size());
  std::transform(v.begin(), v.end(), mu.begin(), [](double x) { return std::abs(x); });
  std::sort(mu.begin(), mu.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    cumsum += mu[k];
    const double t = (cumsum - radius) / static_cast<double>(k + 1);
    if (mu[k] > t)
      theta = t;
    else
      break;
  }
  for (auto &x : v) {
    const double a = std::abs(x) - theta;
    x = a > 0.0 ? std::copysign(a, x) : 0.0;
  }
}

Vec project_l1_ball(double radius, std::span<const double> v) {
  Vec out(v.begin(), v.end());
  project_l1_ball_inplace(radius, out);
  return out;
}

void project_nonneg_inplace(std::span<double> v) {
  for (auto &x : v)
    x = x > 0.0 ? x : 0.0;
}

Vec project_nonneg(std::span<const double> v) {
  Vec out(v.begin(), v.end());
  project_nonneg_inplace(out);
  return out;
}

Vec soft_threshold(double tau, std::span<const double> v) {
  if (!(tau >= 0.0))
    throw std::invalid_argument("soft-threshold level must be nonnegative");
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]) - tau;
    out[i] = a > 0.0 ? std::copysign(a, v[i]) : 0.0;
  }
  return out;
}

} // namespace buqo::prox
