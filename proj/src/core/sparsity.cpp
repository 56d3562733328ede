#include "sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace buqo {

HaarWavelet::HaarWavelet(std::size_t height, std::size_t width, int levels)
    : LinearOperator(height * width, height * width), h_(height), w_(width), levels_(levels) {
  if (levels < 1)
    throw std::invalid_argument("haar needs at least one level");
  const std::size_t block = std::size_t{1} << levels;
  if (height % block != 0 || width % block != 0)
    throw std::invalid_argument("haar with " + std::to_string(levels) + " levels needs image sides divisible by " +
                                std::to_string(block) + "; pad the image (got " + std::to_string(height) + "x" +
                                std::to_string(width) + ")");
}

namespace {

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

// One analysis step on `len` samples spaced by `step`, using `tmp` as scratch.
void split(double *x, std::size_t len, std::size_t step, std::vector<double> &tmp) {
  const std::size_t half = len / 2;
  tmp.resize(len);
  for (std::size_t i = 0; i < half; ++i) {
    const double a = x[(2 * i) * step], b = x[(2 * i + 1) * step];
    tmp[i] = (a + b) * kInvSqrt2;
    tmp[half + i] = (a - b) * kInvSqrt2;
  }
  for (std::size_t i = 0; i < len; ++i)
    x[i * step] = tmp[i];
}

void merge(double *x, std::size_t len, std::size_t step, std::vector<double> &tmp) {
  const std::size_t half = len / 2;
  tmp.resize(len);
  for (std::size_t i = 0; i < half; ++i) {
    const double s = x[i * step], d = x[(half + i) * step];
    tmp[2 * i] = (s + d) * kInvSqrt2;
    tmp[2 * i + 1] = (s - d) * kInvSqrt2;
  }
  for (std::size_t i = 0; i < len; ++i)
    x[i * step] = tmp[i];
}

} // namespace

void HaarWavelet::forward_impl(std::span<const double> v, std::span<double> out) const {
  std::copy(v.begin(), v.end(), out.begin());
  std::vector<double> tmp;
  std::size_t bh = h_, bw = w_;
  for (int l = 0; l < levels_; ++l) {
    for (std::size_t r = 0; r < bh; ++r)
      split(out.data() + r * w_, bw, 1, tmp);
    for (std::size_t c = 0; c < bw; ++c)
      split(out.data() + c, bh, w_, tmp);
    bh /= 2;
    bw /= 2;
  }
}

void HaarWavelet::adjoint_impl(std::span<const double> u, std::span<double> out) const {
  std::copy(u.begin(), u.end(), out.begin());
  std::vector<double> tmp;
  for (int l = levels_ - 1; l >= 0; --l) {
    const std::size_t bh = h_ >> l, bw = w_ >> l;
    for (std::size_t c = 0; c < bw; ++c)
      merge(out.data() + c, bh, w_, tmp);
    for (std::size_t r = 0; r < bh; ++r)
      merge(out.data() + r * w_, bw, 1, tmp);
  }
}

GradientOperator::GradientOperator(std::size_t height, std::size_t width)
    : LinearOperator(height * width, 2 * height * width), h_(height), w_(width) {}

void GradientOperator::forward_impl(std::span<const double> v, std::span<double> out) const {
  const std::size_t n = h_ * w_;
  for (std::size_t r = 0; r < h_; ++r)
    for (std::size_t c = 0; c < w_; ++c) {
      const std::size_t i = r * w_ + c;
      out[i] = c + 1 < w_ ? v[i + 1] - v[i] : 0.0;
      out[n + i] = r + 1 < h_ ? v[i + w_] - v[i] : 0.0;
    }
}

void GradientOperator::adjoint_impl(std::span<const double> u, std::span<double> out) const {
  const std::size_t n = h_ * w_;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < h_; ++r)
    for (std::size_t c = 0; c < w_; ++c) {
      const std::size_t i = r * w_ + c;
      if (c + 1 < w_) {
        out[i + 1] += u[i];
        out[i] -= u[i];
      }
      if (r + 1 < h_) {
        out[i + w_] += u[n + i];
        out[i] -= u[n + i];
      }
    }
}

SparsityKind parse_sparsity(const std::string &s) {
  if (s == "haar3" || s == "haar")
    return SparsityKind::Haar3;
  if (s == "grad" || s == "gradient")
    return SparsityKind::Gradient;
  throw std::invalid_argument("unknown sparsity transform \"" + s + "\" (expected haar3 or grad)");
}

std::string to_string(SparsityKind k) { return k == SparsityKind::Haar3 ? "haar3" : "grad"; }

SparsityTransform make_sparsity(SparsityKind kind, std::size_t height, std::size_t width) {
  SparsityTransform t;
  t.kind = kind;
  if (kind == SparsityKind::Haar3) {
    t.op = std::make_shared<HaarWavelet>(height, width, 3);
    t.norm_bound = 1.0;
  } else {
    t.op = std::make_shared<GradientOperator>(height, width);
    t.norm_bound = std::sqrt(8.0);
  }
  return t;
}

Vec analyze(const SparsityTransform &t, const Image &img) { return t.op->apply(img.values); }

Image synthesize(const SparsityTransform &t, std::span<const double> coeffs, std::size_t height,
                 std::size_t width) {
  if (height * width != t.op->input_dim())
    throw_dimension("synthesized image", t.op->input_dim(), height * width);
  Image img(height, width);
  t.op->adjoint(coeffs, img.values);
  return img;
}

} // namespace buqo
