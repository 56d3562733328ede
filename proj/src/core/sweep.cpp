#include "sweep.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace buqo {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, const char *f = "%.10g") {
  if (std::isnan(v))
    return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

template <class T> T field(const json &j, const char *key, T fallback) {
  if (!j.contains(key))
    return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &) {
    throw std::invalid_argument(std::string("sweep spec field '") + key + "' has the wrong type");
  }
}

} // namespace

void SweepSpec::validate() const {
  if (angles.empty())
    throw std::invalid_argument("sweep needs at least one angle count");
  if (sigmas.empty())
    throw std::invalid_argument("sweep needs at least one noise level");
  if (masks.empty())
    throw std::invalid_argument("sweep needs at least one mask");
  if (phantom.size == 0)
    throw std::invalid_argument("sweep phantom has size 0");
  if (detectors < phantom.size)
    throw std::invalid_argument("detectors (" + std::to_string(detectors) + ") must be at least the image size (" +
                                std::to_string(phantom.size) + ")");
  for (auto a : angles)
    if (a == 0)
      throw std::invalid_argument("angle counts must be positive");
  for (double s : sigmas)
    if (!(s >= 0.0) || !std::isfinite(s))
      throw std::invalid_argument("noise levels must be finite and nonnegative");
  for (const auto &m : masks) {
    if (m.mask.height != phantom.size || m.mask.width != phantom.size)
      throw DimensionError("mask '" + m.id + "' does not match the phantom size");
    if (m.mask.count() == 0)
      throw std::invalid_argument("mask '" + m.id + "' is empty");
  }
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(delta >= 0.0))
    throw std::invalid_argument("delta must be nonnegative");
}

SweepSpec sweep_spec_from_json(const json &j, const fs::path &base_dir) {
  SweepSpec s;
  if (!j.contains("phantom"))
    throw std::invalid_argument("sweep spec is missing 'phantom'");
  const json &ph = j.at("phantom");
  if (ph.is_string())
    s.phantom = phantom_from_json(json::parse(read_text(base_dir / ph.get<std::string>())));
  else
    s.phantom = phantom_from_json(ph);
  if (j.contains("artifact_free"))
    s.phantom.artifact_free = j.at("artifact_free").get<bool>();

  s.angles = field(j, "angles", s.angles);
  s.sigmas = field(j, "sigmas", s.sigmas);
  s.detectors = field(j, "detectors", s.detectors);
  s.alpha = field(j, "alpha", s.alpha);
  s.delta = field(j, "delta", s.delta);
  s.seed = field(j, "seed", s.seed);
  s.ring_width = field(j, "ring_width", s.ring_width);
  s.write_images = field(j, "write_images", s.write_images);
  if (j.contains("psi"))
    s.psi = parse_sparsity(j.at("psi").get<std::string>());
  s.map_solver.max_iters = field(j, "map_max_iters", s.map_solver.max_iters);
  s.test.solver.max_iters = field(j, "test_max_iters", s.test.solver.max_iters);
  s.test.delta = s.delta;

  if (!j.contains("masks") || !j.at("masks").is_array())
    throw std::invalid_argument("sweep spec is missing 'masks'");
  const std::size_t n = s.phantom.size;
  for (const auto &m : j.at("masks")) {
    SweepMask sm;
    sm.id = m.value("id", "mask" + std::to_string(s.masks.size()));
    if (m.contains("file"))
      sm.mask = read_pgm_mask(base_dir / m.at("file").get<std::string>());
    else if (m.contains("disk")) {
      const json &d = m.at("disk");
      sm.mask = Mask::disk(n, n, d.at("row").get<double>(), d.at("col").get<double>(), d.at("radius").get<double>());
    } else if (m.value("source", "") == "embolus")
      sm.mask = embolus_mask(s.phantom);
    else
      throw std::invalid_argument("mask '" + sm.id + "' needs 'file', 'disk' or \"source\": \"embolus\"");
    s.masks.push_back(std::move(sm));
  }
  s.validate();
  return s;
}

SweepSpec load_sweep_spec(const fs::path &path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error &e) {
    throw std::invalid_argument("sweep spec " + path.string() + " is not valid JSON: " + e.what());
  }
  return sweep_spec_from_json(j, path.parent_path());
}

std::vector<SweepRow> run_sweep(const SweepSpec &spec, const SweepProgress &progress) {
  spec.validate();
  const std::size_t n = spec.phantom.size;
  const Image truth = render_phantom(spec.phantom);
  const std::size_t total = spec.angles.size() * spec.sigmas.size() * spec.masks.size();
  std::vector<SweepRow> rows;
  rows.reserve(total);

  for (std::size_t a : spec.angles) {
    for (double sigma : spec.sigmas) {
      std::vector<SweepRow> cell(spec.masks.size());
      for (std::size_t k = 0; k < spec.masks.size(); ++k) {
        cell[k].angles = a;
        cell[k].sigma = sigma;
        cell[k].mask = spec.masks[k].id;
        cell[k].rho = std::nan("");
      }
      try {
        // Fresh operators per cell keep the counters cell-local.
        const Geometry geom{a, spec.detectors, n};
        ParallelBeamProjector phi(geom);
        const SimulatedData sim = simulate_data(phi, {sigma, spec.seed}, truth);
        const SparsityTransform psi = make_sparsity(spec.psi, n, n);
        const auto metric = make_data_metric(geom);
        auto t0 = std::chrono::steady_clock::now();
        const MapResult map = solve_map({&phi, psi, n, n, sim.y.values, sim.epsilon, metric}, spec.map_solver);
        const double map_s = seconds_since(t0);
        for (auto &r : cell) {
          r.residual = map.residual;
          r.epsilon = sim.epsilon;
          r.map_converged = map.converged;
          r.map_iterations = map.iterations;
          r.map_evaluations = map.phi_forward + map.phi_adjoint;
          r.map_seconds = map_s;
        }
        const CredibleRegion region = make_credible_region(phi, sim.y.values, sim.epsilon, psi, map, spec.alpha, metric);
        for (std::size_t k = 0; k < spec.masks.size(); ++k) {
          SweepRow &r = cell[k];
          try {
            t0 = std::chrono::steady_clock::now();
            const StructureSet s(spec.masks[k].mask, sample_neighborhood(map.x, spec.masks[k].mask, spec.ring_width));
            TestReport rep = run_test(map, region, s, spec.test);
            r.test_seconds = seconds_since(t0);
            r.rho = rep.rho;
            r.decision = rep.decision;
            r.ratio = rep.evaluation_ratio;
            r.test_iterations = rep.iterations;
            r.stage1_exit = rep.stage1_exit;
            r.test_evaluations = rep.phi_forward + rep.phi_adjoint;
            if (!rep.note.empty())
              r.error = rep.note;
            r.report = std::move(rep);
          } catch (const std::exception &e) {
            r.error = e.what();
            r.decision = Decision::Inconclusive;
          }
        }
      } catch (const std::exception &e) {
        for (auto &r : cell) {
          r.error = e.what();
          r.decision = Decision::Inconclusive;
        }
      }
      for (auto &r : cell) {
        rows.push_back(std::move(r));
        if (progress)
          progress(rows.back(), rows.size(), total);
      }
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow> &rows) {
  std::string out = "M_a,sigma,mask,rho,decision,ratio,residual\n";
  for (const auto &r : rows) {
    out += std::to_string(r.angles) + "," + fmt(r.sigma) + "," + r.mask + "," + fmt(r.rho) + "," +
           to_string(r.decision) + "," + fmt(r.ratio) + "," + fmt(r.residual) + "\n";
  }
  return out;
}

std::string cell_name(const SweepRow &row) {
  return "a" + std::to_string(row.angles) + "_s" + fmt(row.sigma, "%g") + "_" + row.mask;
}

void emit_outputs(const std::vector<SweepRow> &rows, const fs::path &out_dir, bool images) {
  if (rows.empty())
    throw std::invalid_argument("no sweep rows to write");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  write_text(out_dir / "sweep.csv", sweep_csv(rows));

  json summary = json::array();
  for (const auto &r : rows) {
    json j;
    j["M_a"] = r.angles;
    j["sigma"] = r.sigma;
    j["mask"] = r.mask;
    j["rho"] = std::isnan(r.rho) ? json(nullptr) : json(r.rho);
    j["decision"] = to_string(r.decision);
    j["ratio"] = r.ratio;
    j["residual"] = r.residual;
    j["epsilon"] = r.epsilon;
    j["map_converged"] = r.map_converged;
    j["map_iterations"] = r.map_iterations;
    j["map_evaluations"] = r.map_evaluations;
    j["test_iterations"] = r.test_iterations;
    j["test_evaluations"] = r.test_evaluations;
    j["stage1_exit"] = r.stage1_exit;
    j["map_seconds"] = r.map_seconds;
    j["test_seconds"] = r.test_seconds;
    if (!r.error.empty())
      j["error"] = r.error;
    if (r.report)
      j["report"] = r.report->to_json();
    summary.push_back(std::move(j));

    if (images && r.report) {
      const fs::path dir = out_dir / "cells" / cell_name(r);
      fs::create_directories(dir, ec);
      if (ec)
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
      write_rawj(dir / "x_map", r.report->x_map);
      write_rawj(dir / "x_c", r.report->x_c);
      write_rawj(dir / "difference", r.report->difference);
    }
  }
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
}

} // namespace buqo
