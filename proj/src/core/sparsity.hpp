#pragma once

#include "grid.hpp"

namespace buqo {

/// Orthonormal 2D Haar wavelet, `levels` deep, Mallat layout: after each level the
/// approximation band occupies the top-left quarter of the current block.
/// The adjoint is also the inverse.
class HaarWavelet final : public LinearOperator {
public:
  HaarWavelet(std::size_t height, std::size_t width, int levels = 3);
  std::string name() const override { return "haar"; }
  int levels() const { return levels_; }

protected:
  void forward_impl(std::span<const double> v, std::span<double> out) const override;
  void adjoint_impl(std::span<const double> u, std::span<double> out) const override;

private:
  std::size_t h_, w_;
  int levels_;
};

/// Forward differences [Dx; Dy] (length 2N). The last column of Dx and the last
/// row of Dy are zero (replicate boundary).
class GradientOperator final : public LinearOperator {
public:
  GradientOperator(std::size_t height, std::size_t width);
  std::string name() const override { return "gradient"; }

protected:
  void forward_impl(std::span<const double> v, std::span<double> out) const override;
  void adjoint_impl(std::span<const double> u, std::span<double> out) const override;

private:
  std::size_t h_, w_;
};

enum class SparsityKind { Haar3, Gradient };

SparsityKind parse_sparsity(const std::string &s); // "haar3" | "grad"
std::string to_string(SparsityKind k);

struct SparsityTransform {
  SparsityKind kind = SparsityKind::Haar3;
  std::shared_ptr<const LinearOperator> op;
  /// Upper bound on the operator norm (1 for Haar, sqrt(8) for the gradient).
  double norm_bound = 1.0;
};

SparsityTransform make_sparsity(SparsityKind kind, std::size_t height, std::size_t width);

Vec analyze(const SparsityTransform &t, const Image &img);
Image synthesize(const SparsityTransform &t, std::span<const double> coeffs, std::size_t height,
                 std::size_t width);

} // namespace buqo
