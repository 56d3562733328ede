#include "buqo/buqo.h"

#include "ct_forward.hpp"
#include "data_metric.hpp"
#include "hypothesis_test.hpp"
#include "map_io.hpp"
#include "probe_service.hpp"
#include "rawj.hpp"
#include "rle.hpp"
#include "sweep.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>

struct buqo_image {
  buqo::Image img;
};
struct buqo_sinogram {
  buqo::Sinogram y;
};
struct buqo_mask {
  buqo::Mask mask;
};
struct buqo_map_result {
  buqo::MapResult res;
  buqo_image image;
};
struct buqo_report {
  buqo::TestReport rep;
  buqo_image x_map, x_map_s, x_c, x_s, difference;
};

namespace {

thread_local std::string g_last_error;

buqo_status fail(buqo_status s, const std::string &msg) {
  g_last_error = msg;
  return s;
}

template <class F> buqo_status guard(F &&f) {
  g_last_error.clear();
  try {
    f();
    return BUQO_OK;
  } catch (const buqo::DimensionError &e) {
    return fail(BUQO_ERR_DIMENSION, e.what());
  } catch (const buqo::IoError &e) {
    return fail(BUQO_ERR_IO, e.what());
  } catch (const std::invalid_argument &e) {
    return fail(BUQO_ERR_INVALID_ARGUMENT, e.what());
  } catch (const nlohmann::json::exception &e) {
    return fail(BUQO_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception &e) {
    return fail(BUQO_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(BUQO_ERR_INTERNAL, "unknown error");
  }
}

void need(const void *p, const char *name) {
  if (!p)
    throw std::invalid_argument(std::string(name) + " must not be NULL");
}

char *dup_string(const std::string &s) {
  char *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (!out)
    throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

buqo::Phantom parse_phantom(const char *json) {
  need(json, "phantom_json");
  return buqo::phantom_from_json(nlohmann::json::parse(json));
}

} // namespace

extern "C" {

const char *buqo_version(void) { return "1.0.0"; }

const char *buqo_last_error(void) { return g_last_error.c_str(); }

const char *buqo_status_name(buqo_status status) {
  switch (status) {
  case BUQO_OK:
    return "ok";
  case BUQO_ERR_INVALID_ARGUMENT:
    return "invalid-argument";
  case BUQO_ERR_DIMENSION:
    return "dimension-mismatch";
  case BUQO_ERR_IO:
    return "io-error";
  case BUQO_ERR_NOT_CONVERGED:
    return "not-converged";
  case BUQO_ERR_INTERNAL:
    return "internal-error";
  }
  return "unknown";
}

void buqo_string_free(char *s) { std::free(s); }

buqo_status buqo_image_create(size_t height, size_t width, const double *values, buqo_image **out) {
  return guard([&] {
    need(out, "out");
    buqo::Image img(height, width);
    if (values)
      img = buqo::Image(height, width, buqo::Vec(values, values + height * width));
    *out = new buqo_image{std::move(img)};
  });
}

buqo_status buqo_image_read_rawj(const char *path, buqo_image **out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new buqo_image{buqo::read_rawj_image(path)};
  });
}

buqo_status buqo_image_write_rawj(const buqo_image *img, const char *path) {
  return guard([&] {
    need(img, "img");
    need(path, "path");
    buqo::write_rawj(path, img->img);
  });
}

size_t buqo_image_height(const buqo_image *img) { return img ? img->img.height : 0; }
size_t buqo_image_width(const buqo_image *img) { return img ? img->img.width : 0; }
const double *buqo_image_data(const buqo_image *img) { return img ? img->img.values.data() : nullptr; }
void buqo_image_free(buqo_image *img) { delete img; }

buqo_status buqo_sinogram_create(size_t angles, size_t detectors, const double *values, buqo_sinogram **out) {
  return guard([&] {
    need(values, "values");
    need(out, "out");
    *out = new buqo_sinogram{buqo::Sinogram(angles, detectors, buqo::Vec(values, values + angles * detectors))};
  });
}

buqo_status buqo_sinogram_read_rawj(const char *path, buqo_sinogram **out, double *epsilon) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    nlohmann::json header;
    auto y = buqo::read_rawj_sinogram(path, &header);
    if (epsilon)
      *epsilon = header.contains("epsilon") ? header.at("epsilon").get<double>() : std::nan("");
    *out = new buqo_sinogram{std::move(y)};
  });
}

buqo_status buqo_sinogram_write_rawj(const buqo_sinogram *y, const char *path, double epsilon) {
  return guard([&] {
    need(y, "y");
    need(path, "path");
    nlohmann::json extra = nlohmann::json::object();
    if (std::isfinite(epsilon))
      extra["epsilon"] = epsilon;
    buqo::write_rawj(path, y->y, extra);
  });
}

size_t buqo_sinogram_angles(const buqo_sinogram *y) { return y ? y->y.angles : 0; }
size_t buqo_sinogram_detectors(const buqo_sinogram *y) { return y ? y->y.detectors : 0; }
const double *buqo_sinogram_data(const buqo_sinogram *y) { return y ? y->y.values.data() : nullptr; }
void buqo_sinogram_free(buqo_sinogram *y) { delete y; }

buqo_status buqo_mask_create(size_t height, size_t width, const uint8_t *membership, buqo_mask **out) {
  return guard([&] {
    need(membership, "membership");
    need(out, "out");
    std::vector<std::uint8_t> m(membership, membership + height * width);
    for (auto &v : m)
      v = v ? 1 : 0;
    *out = new buqo_mask{buqo::Mask(height, width, std::move(m))};
  });
}

buqo_status buqo_mask_disk(size_t height, size_t width, double row, double col, double radius, buqo_mask **out) {
  return guard([&] {
    need(out, "out");
    *out = new buqo_mask{buqo::Mask::disk(height, width, row, col, radius)};
  });
}

buqo_status buqo_mask_read_pgm(const char *path, buqo_mask **out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new buqo_mask{buqo::read_pgm_mask(path)};
  });
}

buqo_status buqo_mask_write_pgm(const buqo_mask *mask, const char *path) {
  return guard([&] {
    need(mask, "mask");
    need(path, "path");
    buqo::write_pgm_mask(path, mask->mask);
  });
}

size_t buqo_mask_count(const buqo_mask *mask) { return mask ? mask->mask.count() : 0; }

buqo_status buqo_mask_rle_encode(const buqo_mask *mask, uint64_t **runs, size_t *count) {
  return guard([&] {
    need(mask, "mask");
    need(runs, "runs");
    need(count, "count");
    const auto r = buqo::rle_encode(mask->mask);
    auto *buf = static_cast<uint64_t *>(std::malloc(r.size() * sizeof(uint64_t)));
    if (!buf)
      throw std::bad_alloc();
    std::copy(r.begin(), r.end(), buf);
    *runs = buf;
    *count = r.size();
  });
}

void buqo_runs_free(uint64_t *runs) { std::free(runs); }

buqo_status buqo_mask_rle_decode(const uint64_t *runs, size_t count, size_t height, size_t width, buqo_mask **out) {
  return guard([&] {
    need(out, "out");
    if (count > 0)
      need(runs, "runs");
    *out = new buqo_mask{buqo::rle_decode(std::span<const std::uint64_t>(runs, count), height, width)};
  });
}

void buqo_mask_free(buqo_mask *mask) { delete mask; }

buqo_status buqo_render_phantom(const char *phantom_json, buqo_image **out) {
  return guard([&] {
    need(out, "out");
    *out = new buqo_image{buqo::render_phantom(parse_phantom(phantom_json))};
  });
}

buqo_status buqo_simulate(const char *phantom_json, size_t angles, size_t detectors, double sigma_rel, uint64_t seed,
                          buqo_image **truth, buqo_sinogram **y, double *epsilon) {
  return guard([&] {
    need(y, "y");
    const buqo::Phantom ph = parse_phantom(phantom_json);
    buqo::Image x = buqo::render_phantom(ph);
    buqo::ParallelBeamProjector phi(buqo::Geometry{angles, detectors, ph.size});
    auto sim = buqo::simulate_data(phi, {sigma_rel, seed}, x);
    if (epsilon)
      *epsilon = sim.epsilon;
    *y = new buqo_sinogram{std::move(sim.y)};
    if (truth)
      *truth = new buqo_image{std::move(x)};
  });
}

void buqo_solver_options_default(buqo_solver_options *opts) {
  if (!opts)
    return;
  const buqo::SolverConfig d;
  opts->max_iters = d.max_iters;
  opts->rel_change_tol = d.rel_change_tol;
  opts->feas_tol = d.feas_tol;
  opts->step_balance = d.step_balance;
  opts->adaptive_steps = d.adaptive_steps ? 1 : 0;
}

buqo_status buqo_reconstruct(const buqo_sinogram *y, size_t image_size, double epsilon, const char *psi,
                             const buqo_solver_options *opts, buqo_map_result **out) {
  return guard([&] {
    need(y, "y");
    need(out, "out");
    buqo::SolverConfig cfg;
    if (opts) {
      cfg.max_iters = opts->max_iters;
      cfg.rel_change_tol = opts->rel_change_tol;
      cfg.feas_tol = opts->feas_tol;
      cfg.step_balance = opts->step_balance;
      cfg.adaptive_steps = opts->adaptive_steps != 0;
    }
    const buqo::Geometry g{y->y.angles, y->y.detectors, image_size};
    buqo::ParallelBeamProjector phi(g);
    const auto kind = buqo::parse_sparsity(psi ? psi : "haar3");
    buqo::MapProblem p{&phi,      buqo::make_sparsity(kind, image_size, image_size), image_size, image_size,
                       y->y.values, epsilon, buqo::make_data_metric(g)};
    auto res = buqo::solve_map(p, cfg);
    auto *r = new buqo_map_result{std::move(res), {}};
    r->image.img = r->res.x;
    *out = r;
  });
}

const buqo_image *buqo_map_result_image(const buqo_map_result *res) { return res ? &res->image : nullptr; }
double buqo_map_result_residual(const buqo_map_result *res) { return res ? res->res.residual : std::nan(""); }
double buqo_map_result_epsilon(const buqo_map_result *res) { return res ? res->res.epsilon : std::nan(""); }
int buqo_map_result_converged(const buqo_map_result *res) { return res && res->res.converged ? 1 : 0; }

buqo_status buqo_map_result_json(const buqo_map_result *res, char **json) {
  return guard([&] {
    need(res, "res");
    need(json, "json");
    *json = dup_string(buqo::map_result_json(res->res).dump(2));
  });
}

buqo_status buqo_map_result_save(const buqo_map_result *res, const char *path) {
  return guard([&] {
    need(res, "res");
    need(path, "path");
    buqo::save_map_result(path, res->res);
  });
}

buqo_status buqo_map_result_load(const char *path, buqo_map_result **out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto *r = new buqo_map_result{buqo::load_map_result(path), {}};
    r->image.img = r->res.x;
    *out = r;
  });
}

void buqo_map_result_free(buqo_map_result *res) { delete res; }

buqo_status buqo_describe_structure(const buqo_image *img, const buqo_mask *mask, size_t ring_width, char **json) {
  return guard([&] {
    need(img, "img");
    need(mask, "mask");
    need(json, "json");
    buqo::StructureSet s(mask->mask, buqo::sample_neighborhood(img->img, mask->mask, ring_width));
    auto j = s.to_json();
    j["ring_width"] = ring_width;
    j["ring_pixels"] = mask->mask.ring(ring_width).count();
    *json = dup_string(j.dump(2));
  });
}

void buqo_test_options_default(buqo_test_options *opts) {
  if (!opts)
    return;
  const buqo::TestConfig d;
  opts->alpha = buqo::kDefaultAlpha;
  opts->delta = d.delta;
  opts->ring_width = buqo::kDefaultRingWidth;
  opts->max_iters = d.solver.max_iters;
}

buqo_status buqo_test(const buqo_map_result *map, const buqo_sinogram *y, const buqo_mask *mask,
                      const buqo_test_options *opts, buqo_report **out) {
  return guard([&] {
    need(map, "map");
    need(y, "y");
    need(mask, "mask");
    need(out, "out");
    buqo_test_options o;
    buqo_test_options_default(&o);
    if (opts)
      o = *opts;
    const std::size_t n = map->res.x.height;
    if (map->res.x.width != n)
      throw buqo::DimensionError("MAP image must be square");
    const buqo::Geometry g{y->y.angles, y->y.detectors, n};
    buqo::ParallelBeamProjector phi(g);
    const auto metric = buqo::make_data_metric(g);
    const auto region = buqo::make_credible_region(phi, y->y.values, map->res.epsilon,
                                                   buqo::make_sparsity(map->res.psi_kind, n, n), map->res, o.alpha,
                                                   metric);
    const buqo::StructureSet s(mask->mask, buqo::sample_neighborhood(map->res.x, mask->mask, o.ring_width));
    buqo::TestConfig cfg;
    cfg.delta = o.delta;
    cfg.solver.max_iters = o.max_iters;
    auto *r = new buqo_report{buqo::run_test(map->res, region, s, cfg), {}, {}, {}, {}, {}};
    r->x_map.img = r->rep.x_map;
    r->x_map_s.img = r->rep.x_map_s;
    r->x_c.img = r->rep.x_c;
    r->x_s.img = r->rep.x_s;
    r->difference.img = r->rep.difference;
    *out = r;
  });
}

double buqo_report_rho(const buqo_report *rep) { return rep ? rep->rep.rho : std::nan(""); }

buqo_decision buqo_report_decision(const buqo_report *rep) {
  if (!rep)
    return BUQO_INCONCLUSIVE;
  switch (rep->rep.decision) {
  case buqo::Decision::RejectH0:
    return BUQO_REJECT_H0;
  case buqo::Decision::CannotRejectH0:
    return BUQO_CANNOT_REJECT_H0;
  default:
    return BUQO_INCONCLUSIVE;
  }
}

buqo_status buqo_report_json(const buqo_report *rep, char **json) {
  return guard([&] {
    need(rep, "rep");
    need(json, "json");
    *json = dup_string(rep->rep.to_json().dump(2));
  });
}

buqo_status buqo_report_image(const buqo_report *rep, const char *which, const buqo_image **out) {
  return guard([&] {
    need(rep, "rep");
    need(which, "which");
    need(out, "out");
    const std::string w = which;
    if (w == "x_map")
      *out = &rep->x_map;
    else if (w == "x_map_s")
      *out = &rep->x_map_s;
    else if (w == "x_c")
      *out = &rep->x_c;
    else if (w == "x_s")
      *out = &rep->x_s;
    else if (w == "difference")
      *out = &rep->difference;
    else
      throw std::invalid_argument("unknown report image '" + w + "'");
  });
}

buqo_status buqo_report_write(const buqo_report *rep, const char *dir) {
  return guard([&] {
    need(rep, "rep");
    need(dir, "dir");
    const buqo::fs::path d(dir);
    std::error_code ec;
    buqo::fs::create_directories(d, ec);
    if (ec)
      throw buqo::IoError("cannot create " + d.string() + ": " + ec.message());
    buqo::write_text(d / "report.json", rep->rep.to_json().dump(2) + "\n");
    buqo::write_rawj(d / "x_map", rep->rep.x_map);
    buqo::write_rawj(d / "x_map_s", rep->rep.x_map_s);
    buqo::write_rawj(d / "x_c", rep->rep.x_c);
    buqo::write_rawj(d / "x_s", rep->rep.x_s);
    buqo::write_rawj(d / "difference", rep->rep.difference);
  });
}

void buqo_report_free(buqo_report *rep) { delete rep; }

buqo_status buqo_sweep(const char *spec_path, const char *out_dir, int verbose) {
  return guard([&] {
    need(spec_path, "spec_path");
    need(out_dir, "out_dir");
    const auto spec = buqo::load_sweep_spec(spec_path);
    buqo::SweepProgress progress;
    if (verbose) {
      progress = [](const buqo::SweepRow &r, std::size_t done, std::size_t total) {
        std::fprintf(stderr, "[%zu/%zu] M_a=%zu sigma=%g mask=%s rho=%.6g %s (map %.1fs, test %.1fs)%s%s\n", done,
                     total, r.angles, r.sigma, r.mask.c_str(), r.rho, buqo::to_string(r.decision).c_str(),
                     r.map_seconds, r.test_seconds, r.error.empty() ? "" : " : ", r.error.c_str());
      };
    }
    const auto rows = buqo::run_sweep(spec, progress);
    buqo::emit_outputs(rows, out_dir, spec.write_images);
  });
}

buqo_status buqo_serve(const char *host, int port, const char *data_dir, int workers) {
  return guard([&] {
    need(data_dir, "data_dir");
    buqo::ServiceOptions opts;
    opts.data_dir = data_dir;
    opts.workers = workers;
    const std::string h = host ? host : "127.0.0.1";
    const int rc = buqo::serve(opts, h, port, [&](int p) {
      std::fprintf(stderr, "serving on http://%s:%d (data in %s)\n", h.c_str(), p, data_dir);
    });
    if (rc != 0)
      throw std::runtime_error("server stopped with an error");
  });
}

} // extern "C"
