#include "grid.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace buqo {

void throw_dimension(const std::string &what, std::size_t expected, std::size_t got) {
  throw DimensionError(what + ": expected length " + std::to_string(expected) + ", got " +
                       std::to_string(got));
}

namespace {

void require_finite(std::span<const double> v, const char *what) {
  if (!all_finite(v))
    throw std::invalid_argument(std::string(what) + " contains non-finite values");
}

} // namespace

Image::Image(std::size_t h, std::size_t w, double fill) : height(h), width(w), values(h * w, fill) {}

Image::Image(std::size_t h, std::size_t w, Vec v) : height(h), width(w), values(std::move(v)) {
  if (values.size() != h * w)
    throw_dimension("image values", h * w, values.size());
  require_finite(values, "image");
}

double Image::max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }
double Image::min() const { return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end()); }

Sinogram::Sinogram(std::size_t a, std::size_t d, double fill) : angles(a), detectors(d), values(a * d, fill) {}

Sinogram::Sinogram(std::size_t a, std::size_t d, Vec v) : angles(a), detectors(d), values(std::move(v)) {
  if (values.size() != a * d)
    throw_dimension("sinogram values", a * d, values.size());
  require_finite(values, "sinogram");
}

double Sinogram::max() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

Mask::Mask(std::size_t h, std::size_t w) : height(h), width(w), membership(h * w, 0) {}

Mask::Mask(std::size_t h, std::size_t w, std::vector<std::uint8_t> m)
    : height(h), width(w), membership(std::move(m)) {
  if (membership.size() != h * w)
    throw_dimension("mask membership", h * w, membership.size());
  for (auto &b : membership)
    b = b ? 1 : 0;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(membership.begin(), membership.end(), std::uint8_t{1}));
}

std::vector<std::size_t> Mask::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < membership.size(); ++i)
    if (membership[i])
      out.push_back(i);
  return out;
}

Mask Mask::disk(std::size_t h, std::size_t w, double row, double col, double radius) {
  Mask m(h, w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const double dr = static_cast<double>(r) - row;
      const double dc = static_cast<double>(c) - col;
      if (dr * dr + dc * dc <= radius * radius)
        m.set(r, c);
    }
  return m;
}

Mask Mask::ring(std::size_t ring_width) const {
  Mask out(height, width);
  const auto rw = static_cast<std::ptrdiff_t>(ring_width);
  const auto H = static_cast<std::ptrdiff_t>(height);
  const auto W = static_cast<std::ptrdiff_t>(width);
  for (std::ptrdiff_t r = 0; r < H; ++r)
    for (std::ptrdiff_t c = 0; c < W; ++c) {
      if (!contains(static_cast<std::size_t>(r), static_cast<std::size_t>(c)))
        continue;
      for (std::ptrdiff_t dr = -rw; dr <= rw; ++dr)
        for (std::ptrdiff_t dc = -rw; dc <= rw; ++dc) {
          const auto rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= H || cc >= W)
            continue;
          out.set(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        }
    }
  for (std::size_t i = 0; i < membership.size(); ++i)
    if (membership[i])
      out.membership[i] = 0;
  return out;
}

LinearOperator::LinearOperator(std::size_t input_dim, std::size_t output_dim)
    : in_dim_(input_dim), out_dim_(output_dim) {}

Vec LinearOperator::apply(std::span<const double> v) const {
  Vec out(out_dim_);
  apply(v, out);
  return out;
}

void LinearOperator::apply(std::span<const double> v, std::span<double> out) const {
  if (v.size() != in_dim_)
    throw_dimension(name() + " apply input", in_dim_, v.size());
  if (out.size() != out_dim_)
    throw_dimension(name() + " apply output", out_dim_, out.size());
  forward_.fetch_add(1, std::memory_order_relaxed);
  forward_impl(v, out);
}

Vec LinearOperator::adjoint(std::span<const double> u) const {
  Vec out(in_dim_);
  adjoint(u, out);
  return out;
}

void LinearOperator::adjoint(std::span<const double> u, std::span<double> out) const {
  if (u.size() != out_dim_)
    throw_dimension(name() + " adjoint input", out_dim_, u.size());
  if (out.size() != in_dim_)
    throw_dimension(name() + " adjoint output", in_dim_, out.size());
  adjoint_.fetch_add(1, std::memory_order_relaxed);
  adjoint_impl(u, out);
}

void IdentityOperator::forward_impl(std::span<const double> v, std::span<double> out) const {
  std::copy(v.begin(), v.end(), out.begin());
}

void IdentityOperator::adjoint_impl(std::span<const double> u, std::span<double> out) const {
  std::copy(u.begin(), u.end(), out.begin());
}

DenseOperator::DenseOperator(std::size_t rows, std::size_t cols, Vec entries)
    : LinearOperator(cols, rows), a_(std::move(entries)) {
  if (a_.size() != rows * cols)
    throw_dimension("dense operator entries", rows * cols, a_.size());
}

void DenseOperator::forward_impl(std::span<const double> v, std::span<double> out) const {
  const std::size_t cols = input_dim();
  for (std::size_t r = 0; r < output_dim(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c)
      s += a_[r * cols + c] * v[c];
    out[r] = s;
  }
}

void DenseOperator::adjoint_impl(std::span<const double> u, std::span<double> out) const {
  const std::size_t cols = input_dim();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < output_dim(); ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out[c] += a_[r * cols + c] * u[r];
}

MaskSelectOperator::MaskSelectOperator(const Mask &mask, std::size_t blocks)
    : LinearOperator(mask.size() * blocks, mask.count() * blocks), n_(mask.size()), blocks_(blocks),
      idx_(mask.indices()) {
  if (idx_.empty())
    throw std::invalid_argument("empty structure mask");
}

void MaskSelectOperator::forward_impl(std::span<const double> v, std::span<double> out) const {
  const std::size_t k = idx_.size();
  for (std::size_t b = 0; b < blocks_; ++b)
    for (std::size_t i = 0; i < k; ++i)
      out[b * k + i] = v[b * n_ + idx_[i]];
}

void MaskSelectOperator::adjoint_impl(std::span<const double> u, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t k = idx_.size();
  for (std::size_t b = 0; b < blocks_; ++b)
    for (std::size_t i = 0; i < k; ++i)
      out[b * n_ + idx_[i]] = u[b * k + i];
}

ComposedOperator::ComposedOperator(OperatorPtr outer, OperatorPtr inner)
    : LinearOperator(inner->input_dim(), outer->output_dim()), outer_(std::move(outer)),
      inner_(std::move(inner)) {
  if (outer_->input_dim() != inner_->output_dim())
    throw_dimension("composition " + outer_->name() + " after " + inner_->name(),
                    outer_->input_dim(), inner_->output_dim());
}

std::string ComposedOperator::name() const { return outer_->name() + "*" + inner_->name(); }

void ComposedOperator::forward_impl(std::span<const double> v, std::span<double> out) const {
  outer_->apply(inner_->apply(v), out);
}

void ComposedOperator::adjoint_impl(std::span<const double> u, std::span<double> out) const {
  inner_->adjoint(outer_->adjoint(u), out);
}

Vec masked_select(const Mask &mask, const Image &img) {
  if (mask.height != img.height || mask.width != img.width)
    throw DimensionError("mask is " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                         " but image is " + std::to_string(img.height) + "x" +
                         std::to_string(img.width));
  if (mask.count() == 0)
    throw std::invalid_argument("empty structure mask");
  Vec out;
  out.reserve(mask.count());
  for (std::size_t i = 0; i < img.size(); ++i)
    if (mask.membership[i])
      out.push_back(img.values[i]);
  return out;
}

Image masked_scatter(const Mask &mask, std::span<const double> values) {
  const auto idx = mask.indices();
  if (idx.empty())
    throw std::invalid_argument("empty structure mask");
  if (values.size() != idx.size())
    throw_dimension("masked values", idx.size(), values.size());
  Image out(mask.height, mask.width);
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.values[idx[i]] = values[i];
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw_dimension("dot", a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm1(std::span<const double> a) {
  double s = 0.0;
  for (double v : a)
    s += std::abs(v);
  return s;
}

double distance2(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw_dimension("distance", a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size())
    throw_dimension("axpy", y.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] += alpha * x[i];
}

Vec subtract(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw_dimension("subtract", a.size(), b.size());
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    out[i] = a[i] - b[i];
  return out;
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

double adjoint_mismatch(const LinearOperator &op, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Vec u(op.input_dim()), v(op.output_dim());
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    for (auto &x : u)
      x = g(rng);
    for (auto &x : v)
      x = g(rng);
    const Vec au = op.apply(u);
    const Vec atv = op.adjoint(v);
    const double scale = norm2(au) * norm2(v);
    const double diff = std::abs(dot(au, v) - dot(u, atv));
    if (scale > 0.0)
      worst = std::max(worst, diff / scale);
    else if (diff > 0.0)
      worst = std::max(worst, diff);
  }
  return worst;
}

} // namespace buqo
