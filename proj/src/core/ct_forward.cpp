#include "ct_forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace buqo {

double Geometry::detector_spacing() const {
  return static_cast<double>(image_size) * std::numbers::sqrt2 / static_cast<double>(detectors);
}

double Geometry::angle(std::size_t k) const {
  return static_cast<double>(k) * std::numbers::pi / static_cast<double>(angles);
}

double Geometry::detector_offset(std::size_t d) const {
  return (static_cast<double>(d) - 0.5 * static_cast<double>(detectors - 1)) * detector_spacing();
}

void Geometry::validate() const {
  if (angles < 1)
    throw std::invalid_argument("geometry needs at least one angle");
  if (detectors < 1)
    throw std::invalid_argument("geometry needs at least one detector");
  if (image_size < 1)
    throw std::invalid_argument("geometry needs a positive image size");
}

ParallelBeamProjector::ParallelBeamProjector(Geometry g)
    : LinearOperator((g.validate(), g.image_size * g.image_size), g.measurements()), geom_(g) {
  const double h = geom_.detector_spacing();
  const double c0 = 0.5 * static_cast<double>(geom_.image_size - 1);
  const double d0 = -0.5 * static_cast<double>(geom_.detectors - 1) * h;
  views_.reserve(geom_.angles);
  for (std::size_t k = 0; k < geom_.angles; ++k) {
    const double t = geom_.angle(k);
    const double c = std::cos(t), s = std::sin(t);
    View v{};
    // Sample coordinate along a line: (offset - step * p) / q + c0, where q is the
    // dominant direction cosine.
    const bool rows = std::abs(c) >= std::abs(s);
    const double q = rows ? c : s;
    const double p = rows ? s : c;
    v.transposed = !rows;
    v.weight = 1.0 / std::abs(q);
    v.slope = h / q;
    v.base = d0 / q + c0;
    v.shear = -p / q;
    views_.push_back(v);
  }
}

namespace {

// Padded copy with one zero on either end of every line; `transpose` turns columns into lines.
void pad_lines(std::span<const double> img, std::size_t n, bool transpose, std::vector<double> &out) {
  const std::size_t stride = n + 2;
  out.assign(n * stride, 0.0);
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t i = 0; i < n; ++i)
      out[l * stride + i + 1] = transpose ? img[i * n + l] : img[l * n + i];
}

// Detector index range [lo, hi] whose padded sample coordinate t = slope*d + off
// lies in [0, n + 1).
bool detector_range(double slope, double off, std::size_t n, std::size_t D, std::ptrdiff_t &lo,
                    std::ptrdiff_t &hi) {
  const double top = static_cast<double>(n) + 1.0;
  double a = (0.0 - off) / slope, b = (top - off) / slope;
  if (a > b)
    std::swap(a, b);
  lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(a)) - 1);
  hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(D) - 1,
                                static_cast<std::ptrdiff_t>(std::ceil(b)) + 1);
  auto ok = [&](std::ptrdiff_t d) {
    const double t = slope * static_cast<double>(d) + off;
    return t >= 0.0 && t < top;
  };
  while (lo <= hi && !ok(lo))
    ++lo;
  while (hi >= lo && !ok(hi))
    --hi;
  return lo <= hi;
}

} // namespace

void ParallelBeamProjector::forward_impl(std::span<const double> v, std::span<double> out) const {
  const std::size_t n = geom_.image_size, D = geom_.detectors, stride = n + 2;
  const double c0 = 0.5 * static_cast<double>(n - 1);
  std::vector<double> rows, cols;
  pad_lines(v, n, false, rows);
  if (std::any_of(views_.begin(), views_.end(), [](const View &w) { return w.transposed; }))
    pad_lines(v, n, true, cols);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < views_.size(); ++k) {
    const View &vw = views_[k];
    const std::vector<double> &img = vw.transposed ? cols : rows;
    double *sino = out.data() + k * D;
    for (std::size_t l = 0; l < n; ++l) {
      const double off = vw.base + vw.shear * (static_cast<double>(l) - c0) + 1.0;
      std::ptrdiff_t lo, hi;
      if (!detector_range(vw.slope, off, n, D, lo, hi))
        continue;
      const double *line = img.data() + l * stride;
      for (std::ptrdiff_t d = lo; d <= hi; ++d) {
        const double t = vw.slope * static_cast<double>(d) + off;
        const auto j = static_cast<std::size_t>(t);
        const double f = t - static_cast<double>(j);
        sino[d] += vw.weight * (line[j] + f * (line[j + 1] - line[j]));
      }
    }
  }
}

void ParallelBeamProjector::adjoint_impl(std::span<const double> u, std::span<double> out) const {
  const std::size_t n = geom_.image_size, D = geom_.detectors, stride = n + 2;
  const double c0 = 0.5 * static_cast<double>(n - 1);
  std::vector<double> rows(n * stride, 0.0), cols;
  const bool any_t = std::any_of(views_.begin(), views_.end(), [](const View &w) { return w.transposed; });
  if (any_t)
    cols.assign(n * stride, 0.0);
  for (std::size_t k = 0; k < views_.size(); ++k) {
    const View &vw = views_[k];
    std::vector<double> &img = vw.transposed ? cols : rows;
    const double *sino = u.data() + k * D;
    for (std::size_t l = 0; l < n; ++l) {
      const double off = vw.base + vw.shear * (static_cast<double>(l) - c0) + 1.0;
      std::ptrdiff_t lo, hi;
      if (!detector_range(vw.slope, off, n, D, lo, hi))
        continue;
      double *line = img.data() + l * stride;
      for (std::ptrdiff_t d = lo; d <= hi; ++d) {
        const double t = vw.slope * static_cast<double>(d) + off;
        const auto j = static_cast<std::size_t>(t);
        const double f = t - static_cast<double>(j);
        const double s = vw.weight * sino[d];
        line[j] += s - f * s;
        line[j + 1] += f * s;
      }
    }
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      double val = rows[r * stride + c + 1];
      if (any_t)
        val += cols[c * stride + r + 1];
      out[r * n + c] = val;
    }
}

Sinogram ParallelBeamProjector::project(const Image &img) const {
  if (img.height != geom_.image_size || img.width != geom_.image_size)
    throw DimensionError("projector expects a " + std::to_string(geom_.image_size) + "x" +
                         std::to_string(geom_.image_size) + " image, got " + std::to_string(img.height) +
                         "x" + std::to_string(img.width));
  Sinogram s(geom_.angles, geom_.detectors);
  apply(img.values, s.values);
  return s;
}

Image ParallelBeamProjector::backproject(const Sinogram &s) const {
  if (s.angles != geom_.angles || s.detectors != geom_.detectors)
    throw DimensionError("sinogram is " + std::to_string(s.angles) + "x" + std::to_string(s.detectors) +
                         ", geometry expects " + std::to_string(geom_.angles) + "x" +
                         std::to_string(geom_.detectors));
  Image img(geom_.image_size, geom_.image_size);
  adjoint(s.values, img.values);
  return img;
}

double noise_bound(double sigma_abs, std::size_t measurements) {
  const double m = static_cast<double>(measurements);
  return sigma_abs * std::sqrt(m + 2.0 * std::sqrt(2.0 * m));
}

SimulatedData simulate_data(const ParallelBeamProjector &phi, const NoiseModel &noise, const Image &x_true) {
  if (noise.sigma_rel < 0.0 || !std::isfinite(noise.sigma_rel))
    throw std::invalid_argument("noise level sigma must be nonnegative");
  SimulatedData out;
  out.y = phi.project(x_true);
  out.sigma_abs = noise.sigma_rel * out.y.max();
  if (out.sigma_abs > 0.0) {
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> g(0.0, out.sigma_abs);
    for (auto &v : out.y.values)
      v += g(rng);
  }
  out.epsilon = noise_bound(out.sigma_abs, out.y.size());
  return out;
}

namespace {

bool inside_ellipse(const Ellipse &e, double px, double py) {
  const double t = e.angle_deg * std::numbers::pi / 180.0;
  const double dx = px - e.cx, dy = py - e.cy;
  const double xr = dx * std::cos(t) + dy * std::sin(t);
  const double yr = -dx * std::sin(t) + dy * std::cos(t);
  return (xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b) <= 1.0;
}

bool inside_disk(const Embolus &e, double px, double py) {
  const double dx = px - e.cx, dy = py - e.cy;
  return dx * dx + dy * dy <= e.radius * e.radius;
}

void check_extent(double cx, double cy, double ex, double ey, std::size_t n, const std::string &what) {
  const double lim = static_cast<double>(n), tol = 1e-9;
  if (cx - ex < -tol || cy - ey < -tol || cx + ex > lim + tol || cy + ey > lim + tol)
    throw std::invalid_argument(what + " extends outside the " + std::to_string(n) + "x" +
                                std::to_string(n) + " grid");
}

} // namespace

Image render_phantom(const Phantom &ph) {
  if (ph.size == 0)
    throw std::invalid_argument("phantom size must be positive");
  const std::size_t n = ph.size;
  for (std::size_t i = 0; i < ph.ellipses.size(); ++i) {
    const Ellipse &e = ph.ellipses[i];
    if (!(e.a > 0.0) || !(e.b > 0.0))
      throw std::invalid_argument("ellipse " + std::to_string(i) + " needs positive semi-axes");
    const double t = e.angle_deg * std::numbers::pi / 180.0;
    const double ex = std::sqrt(e.a * e.a * std::cos(t) * std::cos(t) + e.b * e.b * std::sin(t) * std::sin(t));
    const double ey = std::sqrt(e.a * e.a * std::sin(t) * std::sin(t) + e.b * e.b * std::cos(t) * std::cos(t));
    check_extent(e.cx, e.cy, ex, ey, n, "ellipse " + std::to_string(i));
  }
  if (ph.embolus) {
    if (!(ph.embolus->radius > 0.0))
      throw std::invalid_argument("embolus radius must be positive");
    check_extent(ph.embolus->cx, ph.embolus->cy, ph.embolus->radius, ph.embolus->radius, n, "embolus");
  }

  Image img(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double px = static_cast<double>(c) + 0.5, py = static_cast<double>(r) + 0.5;
      double v = 0.0;
      for (const auto &e : ph.ellipses)
        if (inside_ellipse(e, px, py))
          v += e.intensity;
      if (ph.embolus && !ph.artifact_free && inside_disk(*ph.embolus, px, py))
        v = ph.embolus->intensity;
      img.at(r, c) = std::clamp(v, 0.0, 1.0);
    }
  return img;
}

Mask embolus_mask(const Phantom &ph) {
  Mask m(ph.size, ph.size);
  if (!ph.embolus)
    return m;
  for (std::size_t r = 0; r < ph.size; ++r)
    for (std::size_t c = 0; c < ph.size; ++c)
      if (inside_disk(*ph.embolus, static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5))
        m.set(r, c);
  return m;
}

Phantom phantom_from_json(const nlohmann::json &j) {
  Phantom ph;
  if (!j.contains("size"))
    throw std::invalid_argument("phantom JSON lacks \"size\"");
  ph.size = j.at("size").get<std::size_t>();
  for (const auto &e : j.value("ellipses", nlohmann::json::array())) {
    Ellipse el;
    el.cx = e.at("cx").get<double>();
    el.cy = e.at("cy").get<double>();
    el.a = e.at("a").get<double>();
    el.b = e.at("b").get<double>();
    el.angle_deg = e.value("angle", 0.0);
    el.intensity = e.at("intensity").get<double>();
    ph.ellipses.push_back(el);
  }
  if (j.contains("embolus") && !j["embolus"].is_null()) {
    const auto &e = j["embolus"];
    ph.embolus = Embolus{e.at("cx").get<double>(), e.at("cy").get<double>(), e.at("radius").get<double>(),
                         e.at("intensity").get<double>()};
  }
  ph.artifact_free = j.value("artifact_free", false);
  return ph;
}

nlohmann::json phantom_to_json(const Phantom &ph) {
  nlohmann::json j;
  j["size"] = ph.size;
  j["ellipses"] = nlohmann::json::array();
  for (const auto &e : ph.ellipses)
    j["ellipses"].push_back(
        {{"cx", e.cx}, {"cy", e.cy}, {"a", e.a}, {"b", e.b}, {"angle", e.angle_deg}, {"intensity", e.intensity}});
  if (ph.embolus)
    j["embolus"] = {{"cx", ph.embolus->cx},
                    {"cy", ph.embolus->cy},
                    {"radius", ph.embolus->radius},
                    {"intensity", ph.embolus->intensity}};
  j["artifact_free"] = ph.artifact_free;
  return j;
}

} // namespace buqo
