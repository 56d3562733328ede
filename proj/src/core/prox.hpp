#pragma once

#include "grid.hpp"

#include <variant>

namespace buqo::prox {

enum class BallNorm { L2, L1 };

/// Closed ball {u : ||u - center|| <= radius}. A scalar center is broadcast.
struct BallSpec {
  std::variant<double, Vec> center = 0.0;
  double radius = 0.0;
  BallNorm norm = BallNorm::L2;

  double center_at(std::size_t i) const;
  /// ||v - center|| in the ball's norm.
  double distance_from_center(std::span<const double> v) const;
};

Vec project_l2_ball(const BallSpec &spec, std::span<const double> v);
/// Euclidean projection onto {u : ||u||_1 <= radius}, exact (sort-based pivot).
Vec project_l1_ball(double radius, std::span<const double> v);
Vec project_nonneg(std::span<const double> v);
Vec soft_threshold(double tau, std::span<const double> v);

// In-place variants used inside solver loops.
void project_l2_ball_inplace(const BallSpec &spec, std::span<double> v);
void project_l1_ball_inplace(double radius, std::span<double> v);
void project_nonneg_inplace(std::span<double> v);

} // namespace buqo::prox
