#pragma once

// Metrics on data space of the form R = T^T diag(r) T with T orthonormal. The
// primal-dual solvers take the data-block dual step in this metric; a ramp-like r
// makes Phi^T R Phi close to a multiple of the identity for tomographic Phi, so
// the data constraint no longer converges at the pace of Phi's weakest modes.

#include "ct_forward.hpp"

namespace buqo {

class DataMetric {
public:
  explicit DataMetric(std::size_t dim) : dim_(dim) {}
  virtual ~DataMetric() = default;
  std::size_t dim() const { return dim_; }
  /// Orthonormal T and its inverse T^T. Both are safe to call concurrently.
  virtual void forward(std::span<const double> in, std::span<double> out) const = 0;
  virtual void inverse(std::span<const double> in, std::span<double> out) const = 0;
  /// Positive spectral weights r.
  virtual const Vec &weights() const = 0;
  virtual std::string name() const = 0;

private:
  std::size_t dim_;
};

/// T = I, r = 1: the plain Euclidean metric.
class EuclideanMetric final : public DataMetric {
public:
  explicit EuclideanMetric(std::size_t dim) : DataMetric(dim), w_(dim, 1.0) {}
  void forward(std::span<const double> in, std::span<double> out) const override;
  void inverse(std::span<const double> in, std::span<double> out) const override;
  const Vec &weights() const override { return w_; }
  std::string name() const override { return "euclidean"; }

private:
  Vec w_;
};

/// Per-view orthonormal DCT-II along the detector axis with weights
/// r_k = max(k, 1/2) / detectors (a ramp filter).
class RampMetric final : public DataMetric {
public:
  explicit RampMetric(const Geometry &g);
  ~RampMetric() override;
  void forward(std::span<const double> in, std::span<double> out) const override;
  void inverse(std::span<const double> in, std::span<double> out) const override;
  const Vec &weights() const override { return w_; }
  std::string name() const override { return "ramp"; }

private:
  std::size_t views_, detectors_;
  Vec w_;
  void *plan_fwd_ = nullptr;
  void *plan_inv_ = nullptr;
};

/// The metric the pipeline pairs with a parallel-beam projector.
std::shared_ptr<const DataMetric> make_data_metric(const Geometry &g);

/// Dual step of the ball indicator {z : ||z - c|| <= radius} in the metric A with
/// spectral weights a = sigma * r, all in spectral coordinates. On entry `w` holds
/// the ascent point u + A K x; on exit the new dual u = w - A P(A^-1 w), with P
/// the A-metric projection onto the ball. Returns the multiplier lambda (0 when
/// A^-1 w already lies in the ball).
double metric_ball_dual(std::span<double> w, std::span<const double> center, double radius, double sigma,
                        std::span<const double> r);

/// Largest eigenvalue of Phi^T R Phi, square-rooted: ||R^(1/2) Phi||. Power
/// iteration from a fixed start; `iters` forward and `iters` adjoint calls.
double estimate_metric_norm(const LinearOperator &phi, const DataMetric &metric, int iters,
                            std::uint64_t seed = 0x5eed);

} // namespace buqo
