#include "data_metric.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>

namespace buqo {

namespace {

// FFTW's planner is not thread-safe; execution with new arrays is.
std::mutex &planner_mutex() {
  static std::mutex m;
  return m;
}

void check(std::span<const double> in, std::span<double> out, std::size_t dim) {
  if (in.size() != dim)
    throw_dimension("metric input", dim, in.size());
  if (out.size() != dim)
    throw_dimension("metric output", dim, out.size());
}

} // namespace

void EuclideanMetric::forward(std::span<const double> in, std::span<double> out) const {
  check(in, out, dim());
  std::copy(in.begin(), in.end(), out.begin());
}

void EuclideanMetric::inverse(std::span<const double> in, std::span<double> out) const {
  check(in, out, dim());
  std::copy(in.begin(), in.end(), out.begin());
}

RampMetric::RampMetric(const Geometry &g)
    : DataMetric(g.measurements()), views_(g.angles), detectors_(g.detectors), w_(g.measurements()) {
  g.validate();
  for (std::size_t a = 0; a < views_; ++a)
    for (std::size_t k = 0; k < detectors_; ++k)
      w_[a * detectors_ + k] = std::max(static_cast<double>(k), 0.5) / static_cast<double>(detectors_);

  const int n = static_cast<int>(detectors_);
  const int howmany = static_cast<int>(views_);
  std::vector<double> buf_in(dim()), buf_out(dim());
  const fftw_r2r_kind fwd = FFTW_REDFT10, inv = FFTW_REDFT01;
  std::lock_guard lk(planner_mutex());
  plan_fwd_ = fftw_plan_many_r2r(1, &n, howmany, buf_in.data(), nullptr, 1, n, buf_out.data(), nullptr, 1, n, &fwd,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  plan_inv_ = fftw_plan_many_r2r(1, &n, howmany, buf_in.data(), nullptr, 1, n, buf_out.data(), nullptr, 1, n, &inv,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plan_fwd_ || !plan_inv_)
    throw std::runtime_error("FFTW could not plan the detector-axis DCT");
}

RampMetric::~RampMetric() {
  std::lock_guard lk(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
}

void RampMetric::forward(std::span<const double> in, std::span<double> out) const {
  check(in, out, dim());
  // FFTW's REDFT10 is 2 * sum x_j cos(pi k (j + 1/2) / n); rescale to orthonormal.
  Vec tmp(in.begin(), in.end());
  fftw_execute_r2r(static_cast<fftw_plan>(plan_fwd_), tmp.data(), out.data());
  const double s0 = 1.0 / std::sqrt(4.0 * static_cast<double>(detectors_));
  const double s = 1.0 / std::sqrt(2.0 * static_cast<double>(detectors_));
  for (std::size_t a = 0; a < views_; ++a) {
    double *row = out.data() + a * detectors_;
    row[0] *= s0;
    for (std::size_t k = 1; k < detectors_; ++k)
      row[k] *= s;
  }
}

void RampMetric::inverse(std::span<const double> in, std::span<double> out) const {
  check(in, out, dim());
  Vec tmp(in.begin(), in.end());
  const double s0 = 1.0 / std::sqrt(static_cast<double>(detectors_));
  const double s = 1.0 / std::sqrt(2.0 * static_cast<double>(detectors_));
  for (std::size_t a = 0; a < views_; ++a) {
    double *row = tmp.data() + a * detectors_;
    row[0] *= s0;
    for (std::size_t k = 1; k < detectors_; ++k)
      row[k] *= s;
  }
  fftw_execute_r2r(static_cast<fftw_plan>(plan_inv_), tmp.data(), out.data());
}

std::shared_ptr<const DataMetric> make_data_metric(const Geometry &g) { return std::make_shared<RampMetric>(g); }

double metric_ball_dual(std::span<double> w, std::span<const double> center, double radius, double sigma,
                        std::span<const double> r) {
  const std::size_t m = w.size();
  if (center.size() != m || r.size() != m)
    throw_dimension("metric ball", m, center.size() != m ? center.size() : r.size());
  // b = w - A c; the projection is c + s(lambda) with s_k = b_k / (a_k + lambda),
  // and the new dual is lambda * s(lambda).
  Vec b(m);
  double n0 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    b[i] = w[i] - sigma * r[i] * center[i];
    const double s = b[i] / (sigma * r[i]);
    n0 += s * s;
  }
  if (std::sqrt(n0) <= radius) {
    std::fill(w.begin(), w.end(), 0.0);
    return 0.0;
  }
  if (radius <= 0.0) {
    std::copy(b.begin(), b.end(), w.begin());
    return std::numeric_limits<double>::infinity();
  }
  // Newton on 1/||s(lambda)|| - 1/radius, which is concave and increasing in
  // lambda, so the iterates approach the root from below.
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    double s2 = 0.0, s3 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = 1.0 / (sigma * r[i] + lambda);
      const double bd = b[i] * d;
      s2 += bd * bd;
      s3 += bd * bd * d;
    }
    const double ns = std::sqrt(s2);
    if (std::abs(ns - radius) <= 1e-14 * radius)
      break;
    const double phi = 1.0 / ns - 1.0 / radius;
    const double dphi = s3 / (ns * ns * ns);
    const double next = lambda - phi / dphi;
    if (!(next > lambda))
      break;
    lambda = next;
  }
  for (std::size_t i = 0; i < m; ++i)
    w[i] = lambda * b[i] / (sigma * r[i] + lambda);
  return lambda;
}

double estimate_metric_norm(const LinearOperator &phi, const DataMetric &metric, int iters, std::uint64_t seed) {
  if (metric.dim() != phi.output_dim())
    throw_dimension("metric", phi.output_dim(), metric.dim());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Vec v(phi.input_dim());
  for (auto &x : v)
    x = g(rng);
  double nv = norm2(v);
  for (auto &x : v)
    x /= nv;
  const Vec &r = metric.weights();
  Vec a(phi.output_dim()), b(phi.output_dim());
  double lambda = 0.0;
  for (int k = 0; k < iters; ++k) {
    phi.apply(v, a);
    metric.forward(a, b);
    for (std::size_t i = 0; i < b.size(); ++i)
      b[i] *= r[i];
    metric.inverse(b, a);
    phi.adjoint(a, v);
    lambda = norm2(v);
    if (lambda == 0.0)
      return 0.0;
    for (auto &x : v)
      x /= lambda;
  }
  return std::sqrt(lambda);
}

} // namespace buqo
