#pragma once

// The structure-free set S = I ∩ E ∩ G over images x:
//   I: x >= 0
//   E: ||M x - mu_pix 1||_2 <= r_pix          (intensity inside the structure)
//   G: ||M grad x - mu_grad 1||_2 <= r_grad   (smoothness inside the structure)
// with M selecting the mask pixels. Balls are closed.

#include "grid.hpp"
#include "map_solver.hpp"
#include "prox.hpp"

#include "json.hpp"

namespace buqo {

struct NeighborhoodStats {
  Vec intensities;
  Vec gradients;
  double mu_pix = 0.0;
  double r_pix = 0.0;
  double mu_grad = 0.0;
  double r_grad = 0.0;
};

/// Linear-interpolation percentile (p in [0, 100]) of an unsorted sample list.
double percentile(std::span<const double> samples, double p);

/// Radius floors relative to the image maximum.
inline constexpr double kPixRadiusFloor = 0.01;
inline constexpr double kGradRadiusFloor = 0.005;
inline constexpr std::size_t kDefaultRingWidth = 3;

/// Samples intensities and both gradient components on the ring of pixels within
/// `ring_width` (Chebyshev) of the mask, mask excluded. Centers are medians; radii
/// are max(P60 - median, median - P40), floored.
NeighborhoodStats sample_neighborhood(const Image &img, const Mask &mask, std::size_t ring_width = kDefaultRingWidth);

class StructureSet {
public:
  StructureSet(Mask mask, NeighborhoodStats stats);

  const Mask &mask() const { return mask_; }
  const NeighborhoodStats &stats() const { return stats_; }
  std::size_t pixels() const { return mask_.size(); }

  /// M (N -> N_S) and M grad (N -> 2 N_S).
  const LinearOperator &select() const { return *select_; }
  const LinearOperator &masked_gradient() const { return *masked_grad_; }

  prox::BallSpec intensity_ball() const;
  prox::BallSpec gradient_ball() const;

  nlohmann::json to_json(bool include_samples = false) const;

private:
  Mask mask_;
  NeighborhoodStats stats_;
  std::shared_ptr<const LinearOperator> select_;
  std::shared_ptr<const LinearOperator> masked_grad_;
};

/// Constraint excesses (value minus bound, clamped at 0).
struct SetResiduals {
  double intensity = 0.0; // max(0, -min x)
  double energy = 0.0;    // max(0, ||Mx - mu_pix|| - r_pix)
  double smoothness = 0.0;
};

/// Energy and smoothness within rel_tol of their radii; intensity within neg_tol.
bool residuals_within(const StructureSet &s, const SetResiduals &r, double rel_tol, double neg_tol = 1e-12);

struct Membership {
  bool member = false;
  SetResiduals residuals;
};

Membership membership(const StructureSet &s, std::span<const double> x, double rel_tol = 1e-4);

struct ProjectionResult {
  Image x;
  bool converged = false;
  int iterations = 0;
  SetResiduals residuals;
};

/// Euclidean projection onto S: min 1/2 ||x - x0||^2 over S, by an accelerated
/// primal-dual iteration (the quadratic's prox plus nonnegativity in the primal,
/// one ball-constrained dual per transformed constraint).
ProjectionResult project_onto_structure_set(const StructureSet &s, const Image &x0, const SolverConfig &cfg = {});

} // namespace buqo
