#pragma once

#include "grid.hpp"

#include <optional>
#include "json.hpp"

namespace buqo {

/// Parallel-beam acquisition on an n-by-n image. Angles are k*pi/angles for
/// k = 0..angles-1; detectors span the image diagonal.
struct Geometry {
  std::size_t angles = 0;
  std::size_t detectors = 0;
  std::size_t image_size = 0;

  double detector_spacing() const;
  double angle(std::size_t k) const;
  /// Signed offset of detector d from the rotation center, in pixel units.
  double detector_offset(std::size_t d) const;
  std::size_t measurements() const { return angles * detectors; }
  void validate() const;
};

/// Ray-driven Joseph projector. For each ray the image is sampled once per row
/// (mostly vertical rays) or per column (mostly horizontal rays) with linear
/// interpolation along the crossed line, weighted by the path length per step.
/// Pixels outside the grid read as zero. The adjoint is the exact transpose of
/// the same interpolation weights.
///
/// Pixel (r, c) has center (c - (n-1)/2, r - (n-1)/2); the ray for angle t and
/// offset s is { p : p.x cos t + p.y sin t = s }.
class ParallelBeamProjector final : public LinearOperator {
public:
  explicit ParallelBeamProjector(Geometry g);
  const Geometry &geometry() const { return geom_; }
  std::string name() const override { return "projector"; }

  Sinogram project(const Image &img) const;
  Image backproject(const Sinogram &s) const;

protected:
  void forward_impl(std::span<const double> v, std::span<double> out) const override;
  void adjoint_impl(std::span<const double> u, std::span<double> out) const override;

private:
  struct View {
    bool transposed; // step along columns instead of rows
    double weight;   // path length per step
    double slope;    // d(sample coordinate) / d(detector index)
    double base;     // sample coordinate at detector 0 for step coordinate 0
    double shear;    // d(sample coordinate) / d(step coordinate)
  };
  Geometry geom_;
  std::vector<View> views_;
};

struct NoiseModel {
  double sigma_rel = 0.0;
  std::uint64_t seed = 0;
};

struct SimulatedData {
  Sinogram y;
  double epsilon = 0.0;
  double sigma_abs = 0.0;
};

/// sigma * sqrt(M + 2 sqrt(2M)): mean plus two standard deviations of the
/// squared norm of M i.i.d. N(0, sigma^2) draws.
double noise_bound(double sigma_abs, std::size_t measurements);

/// y = Phi x_true + w, w ~ N(0, (sigma_rel * max(Phi x_true))^2), seeded.
SimulatedData simulate_data(const ParallelBeamProjector &phi, const NoiseModel &noise, const Image &x_true);

struct Ellipse {
  // Center in pixel-grid coordinates: x to the right, y down, origin at the
  // top-left corner of the grid (pixel (r, c) has center (c + 0.5, r + 0.5)).
  double cx = 0, cy = 0;
  double a = 0, b = 0; // semi-axes along the rotated x and y directions
  double angle_deg = 0;
  double intensity = 0; // additive
};

/// Low-intensity disk that overwrites whatever the ellipses produced.
struct Embolus {
  double cx = 0, cy = 0;
  double radius = 0;
  double intensity = 0;
};

struct Phantom {
  std::size_t size = 0;
  std::vector<Ellipse> ellipses;
  std::optional<Embolus> embolus;
  /// Render the structure-free ground truth: the embolus is omitted.
  bool artifact_free = false;
};

Image render_phantom(const Phantom &ph);
/// Disk covered by the phantom's embolus (empty mask when there is none).
Mask embolus_mask(const Phantom &ph);

Phantom phantom_from_json(const nlohmann::json &j);
nlohmann::json phantom_to_json(const Phantom &ph);

} // namespace buqo
