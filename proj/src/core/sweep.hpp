#pragma once

// Experiment harness: grids of (angles, noise level) cells, each reconstructed
// once and probed with every mask.

#include "ct_forward.hpp"
#include "hypothesis_test.hpp"
#include "rawj.hpp"

#include <functional>

namespace buqo {

struct SweepMask {
  std::string id;
  Mask mask;
};

struct SweepSpec {
  Phantom phantom;
  std::vector<std::size_t> angles{50, 100, 200, 300, 450};
  std::vector<double> sigmas{0.007, 0.035, 0.175};
  std::size_t detectors = 450;
  std::vector<SweepMask> masks;
  double alpha = kDefaultAlpha;
  double delta = kDefaultDelta;
  std::uint64_t seed = 7;
  SparsityKind psi = SparsityKind::Haar3;
  std::size_t ring_width = kDefaultRingWidth;
  SolverConfig map_solver;
  TestConfig test;
  /// Write x_map, x_C and |x_C - x_S| per cell.
  bool write_images = true;

  void validate() const;
};

/// Reads a sweep description. Relative paths (phantom, mask files) resolve against
/// `base_dir`. Masks are {"id", "file": PGM} or {"id", "disk": {"row","col","radius"}}.
SweepSpec sweep_spec_from_json(const json &j, const fs::path &base_dir);
SweepSpec load_sweep_spec(const fs::path &path);

struct SweepRow {
  std::size_t angles = 0;
  double sigma = 0.0;
  std::string mask;
  double rho = 0.0;
  Decision decision = Decision::Inconclusive;
  double ratio = 0.0;
  double residual = 0.0;
  // Summary-only fields.
  double epsilon = 0.0;
  bool map_converged = false;
  int map_iterations = 0;
  int test_iterations = 0;
  bool stage1_exit = false;
  std::uint64_t map_evaluations = 0;
  std::uint64_t test_evaluations = 0;
  double map_seconds = 0.0;
  double test_seconds = 0.0;
  std::string error;
  std::optional<TestReport> report;
};

/// Called after each row with (row, rows done, rows total).
using SweepProgress = std::function<void(const SweepRow &, std::size_t, std::size_t)>;

/// Cells run in grid order (angles outer, sigma inner). A cell that throws yields
/// inconclusive rows carrying the error text; the sweep goes on.
std::vector<SweepRow> run_sweep(const SweepSpec &spec, const SweepProgress &progress = {});

/// CSV columns: M_a,sigma,mask,rho,decision,ratio,residual.
std::string sweep_csv(const std::vector<SweepRow> &rows);

/// sweep.csv, summary.json and cells/<cell>/{x_map,x_c,difference} RAWJ images.
void emit_outputs(const std::vector<SweepRow> &rows, const fs::path &out_dir, bool images = true);

std::string cell_name(const SweepRow &row);

} // namespace buqo
