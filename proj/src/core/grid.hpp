#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace buqo {

using Vec = std::vector<double>;

/// Raised when vector or container sizes disagree.
class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

[[noreturn]] void throw_dimension(const std::string &what, std::size_t expected, std::size_t got);

/// n-by-m scalar field, row-major. Pixel (r, c) lives at values[r * width + c].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  Vec values;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0);
  Image(std::size_t h, std::size_t w, Vec v);

  std::size_t size() const { return values.size(); }
  double &at(std::size_t r, std::size_t c) { return values[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
  double max() const;
  double min() const;
};

/// Line-integral measurements, one row of `detectors` values per angle.
struct Sinogram {
  std::size_t angles = 0;
  std::size_t detectors = 0;
  Vec values;

  Sinogram() = default;
  Sinogram(std::size_t a, std::size_t d, double fill = 0.0);
  Sinogram(std::size_t a, std::size_t d, Vec v);

  std::size_t size() const { return values.size(); }
  double max() const;
};

struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> membership;

  Mask() = default;
  Mask(std::size_t h, std::size_t w);
  Mask(std::size_t h, std::size_t w, std::vector<std::uint8_t> m);

  bool contains(std::size_t r, std::size_t c) const { return membership[r * width + c] != 0; }
  void set(std::size_t r, std::size_t c, bool on = true) { membership[r * width + c] = on ? 1 : 0; }
  std::size_t size() const { return membership.size(); }
  std::size_t count() const;
  /// Row-major flat indices of member pixels.
  std::vector<std::size_t> indices() const;

  /// Filled disk of pixels whose centers lie within `radius` of (row, col).
  static Mask disk(std::size_t h, std::size_t w, double row, double col, double radius);
  /// Pixels within Chebyshev distance `width` of the mask, excluding the mask itself.
  Mask ring(std::size_t ring_width) const;

  bool operator==(const Mask &) const = default;
};

/// Linear map with an exact transpose. Every evaluation bumps a counter; counters are
/// never reset behind the caller's back.
class LinearOperator {
public:
  LinearOperator(std::size_t input_dim, std::size_t output_dim);
  virtual ~LinearOperator() = default;

  LinearOperator(const LinearOperator &) = delete;
  LinearOperator &operator=(const LinearOperator &) = delete;

  std::size_t input_dim() const { return in_dim_; }
  std::size_t output_dim() const { return out_dim_; }

  Vec apply(std::span<const double> v) const;
  void apply(std::span<const double> v, std::span<double> out) const;
  Vec adjoint(std::span<const double> u) const;
  void adjoint(std::span<const double> u, std::span<double> out) const;

  std::uint64_t forward_count() const { return forward_.load(std::memory_order_relaxed); }
  std::uint64_t adjoint_count() const { return adjoint_.load(std::memory_order_relaxed); }
  std::uint64_t evaluations() const { return forward_count() + adjoint_count(); }

  virtual std::string name() const = 0;

protected:
  virtual void forward_impl(std::span<const double> v, std::span<double> out) const = 0;
  virtual void adjoint_impl(std::span<const double> u, std::span<double> out) const = 0;

private:
  std::size_t in_dim_;
  std::size_t out_dim_;
  mutable std::atomic<std::uint64_t> forward_{0};
  mutable std::atomic<std::uint64_t> adjoint_{0};
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

class IdentityOperator final : public LinearOperator {
public:
  explicit IdentityOperator(std::size_t n) : LinearOperator(n, n) {}
  std::string name() const override { return "identity"; }

protected:
  void forward_impl(std::span<const double> v, std::span<double> out) const override;
  void adjoint_impl(std::span<const double> u, std::span<double> out) const override;
};

/// Row-major dense matrix.
class DenseOperator final : public LinearOperator {
public:
  DenseOperator(std::size_t rows, std::size_t cols, Vec entries);
  std::string name() const override { return "dense"; }

protected:
  void forward_impl(std::span<const double> v, std::span<double> out) const override;
  void adjoint_impl(std::span<const double> u, std::span<double> out) const override;

private:
  Vec a_;
};

/// Picks mask-member entries, in row-major order, from `blocks` stacked images.
/// The adjoint scatters back with zeros elsewhere.
class MaskSelectOperator final : public LinearOperator {
public:
  explicit MaskSelectOperator(const Mask &mask, std::size_t blocks = 1);
  std::string name() const override { return "mask-select"; }
  std::size_t selected() const { return idx_.size(); }

protected:
  void forward_impl(std::span<const double> v, std::span<double> out) const override;
  void adjoint_impl(std::span<const double> u, std::span<double> out) const override;

private:
  std::size_t n_;
  std::size_t blocks_;
  std::vector<std::size_t> idx_;
};

/// outer ∘ inner. Evaluations are forwarded, so the constituents' counters move too.
class ComposedOperator final : public LinearOperator {
public:
  ComposedOperator(OperatorPtr outer, OperatorPtr inner);
  std::string name() const override;

protected:
  void forward_impl(std::span<const double> v, std::span<double> out) const override;
  void adjoint_impl(std::span<const double> u, std::span<double> out) const override;

private:
  OperatorPtr outer_;
  OperatorPtr inner_;
};

/// Selects the mask pixels of an image (the operator M).
Vec masked_select(const Mask &mask, const Image &img);
/// Adjoint of masked_select: member values scattered into a zero image.
Image masked_scatter(const Mask &mask, std::span<const double> values);

// Vector-space helpers. All sizes must agree; they are checked.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm1(std::span<const double> a);
double distance2(std::span<const double> a, std::span<const double> b);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
Vec subtract(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> a);

/// Worst relative dot-product mismatch |<Au,v> - <u,A^T v>| / (||Au|| ||v||) over
/// `trials` Gaussian pairs.
double adjoint_mismatch(const LinearOperator &op, int trials, std::uint64_t seed);

} // namespace buqo
