#include "buqo/buqo.h"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(buqo_status s, const char *what) {
  if (s != BUQO_OK)
    throw CliError(std::string(what) + ": " + buqo_status_name(s) + ": " + buqo_last_error());
}

std::string slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw CliError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void make_dir(const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw CliError("cannot create " + dir + ": " + ec.message());
}

void print_owned(char *json) {
  std::printf("%s\n", json);
  buqo_string_free(json);
}

struct SimulateArgs {
  std::string phantom;
  std::string out_dir = ".";
  std::size_t angles = 450;
  std::size_t detectors = 450;
  double sigma = 0.007;
  std::uint64_t seed = 7;
};

int run_simulate(const SimulateArgs &a) {
  const std::string ph = slurp(a.phantom);
  buqo_image *truth = nullptr;
  buqo_sinogram *y = nullptr;
  double eps = 0.0;
  check(buqo_simulate(ph.c_str(), a.angles, a.detectors, a.sigma, a.seed, &truth, &y, &eps), "simulate");
  make_dir(a.out_dir);
  const std::string y_path = (fs::path(a.out_dir) / "y").string();
  const std::string x_path = (fs::path(a.out_dir) / "x_true").string();
  buqo_status s = buqo_sinogram_write_rawj(y, y_path.c_str(), eps);
  if (s == BUQO_OK)
    s = buqo_image_write_rawj(truth, x_path.c_str());
  const std::size_t n = buqo_image_height(truth);
  buqo_sinogram_free(y);
  buqo_image_free(truth);
  check(s, "write");
  std::printf("{\"sinogram\": \"%s.json\", \"truth\": \"%s.json\", \"epsilon\": %.17g, \"angles\": %zu, "
              "\"detectors\": %zu, \"image_size\": %zu}\n",
              y_path.c_str(), x_path.c_str(), eps, a.angles, a.detectors, n);
  return 0;
}

struct ReconstructArgs {
  std::string data;
  std::string out = "x_map";
  std::string psi = "haar3";
  double epsilon = NAN;
  std::size_t image_size = 128;
  int max_iters = 0;
};

int run_reconstruct(const ReconstructArgs &a) {
  buqo_sinogram *y = nullptr;
  double eps = NAN;
  check(buqo_sinogram_read_rawj(a.data.c_str(), &y, &eps), "read data");
  if (std::isfinite(a.epsilon))
    eps = a.epsilon;
  if (!std::isfinite(eps)) {
    buqo_sinogram_free(y);
    throw CliError("no epsilon in the data header; pass --epsilon");
  }
  buqo_solver_options opts;
  buqo_solver_options_default(&opts);
  if (a.max_iters > 0)
    opts.max_iters = a.max_iters;
  buqo_map_result *res = nullptr;
  const buqo_status s = buqo_reconstruct(y, a.image_size, eps, a.psi.c_str(), &opts, &res);
  buqo_sinogram_free(y);
  check(s, "reconstruct");
  char *json = nullptr;
  buqo_status w = buqo_map_result_save(res, a.out.c_str());
  if (w == BUQO_OK)
    w = buqo_map_result_json(res, &json);
  buqo_map_result_free(res);
  check(w, "write result");
  print_owned(json);
  return 0;
}

struct DescribeArgs {
  std::string image;
  std::string mask;
  std::size_t ring_width = 3;
};

int run_describe(const DescribeArgs &a) {
  buqo_image *img = nullptr;
  buqo_mask *mask = nullptr;
  check(buqo_image_read_rawj(a.image.c_str(), &img), "read image");
  buqo_status s = buqo_mask_read_pgm(a.mask.c_str(), &mask);
  char *json = nullptr;
  if (s == BUQO_OK)
    s = buqo_describe_structure(img, mask, a.ring_width, &json);
  buqo_image_free(img);
  buqo_mask_free(mask);
  check(s, "describe-structure");
  print_owned(json);
  return 0;
}

struct TestArgs {
  std::string map_result;
  std::string data;
  std::string mask;
  std::string out_dir = "report";
  double alpha = 0.0;
  double delta = -1.0;
  std::size_t ring_width = 0;
  int max_iters = 0;
};

int run_test(const TestArgs &a) {
  buqo_test_options opts;
  buqo_test_options_default(&opts);
  if (a.alpha > 0.0)
    opts.alpha = a.alpha;
  if (a.delta >= 0.0)
    opts.delta = a.delta;
  if (a.ring_width > 0)
    opts.ring_width = a.ring_width;
  if (a.max_iters > 0)
    opts.max_iters = a.max_iters;

  buqo_map_result *map = nullptr;
  buqo_sinogram *y = nullptr;
  buqo_mask *mask = nullptr;
  buqo_report *rep = nullptr;
  buqo_status s = buqo_map_result_load(a.map_result.c_str(), &map);
  const char *stage = "load MAP result";
  if (s == BUQO_OK) {
    stage = "read data";
    s = buqo_sinogram_read_rawj(a.data.c_str(), &y, nullptr);
  }
  if (s == BUQO_OK) {
    stage = "read mask";
    s = buqo_mask_read_pgm(a.mask.c_str(), &mask);
  }
  if (s == BUQO_OK) {
    stage = "test";
    s = buqo_test(map, y, mask, &opts, &rep);
  }
  char *json = nullptr;
  if (s == BUQO_OK) {
    stage = "write report";
    s = buqo_report_write(rep, a.out_dir.c_str());
  }
  if (s == BUQO_OK)
    s = buqo_report_json(rep, &json);
  buqo_report_free(rep);
  buqo_mask_free(mask);
  buqo_sinogram_free(y);
  buqo_map_result_free(map);
  check(s, stage);
  print_owned(json);
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"BUQO structure tests for parallel-beam CT"};
  app.set_version_flag("--version", std::string(buqo_version()));
  app.require_subcommand(1);

  SimulateArgs sim;
  auto *c_sim = app.add_subcommand("simulate", "Render a phantom and simulate noisy projections");
  c_sim->add_option("--phantom", sim.phantom, "Phantom JSON")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--angles", sim.angles, "Number of projection angles")->capture_default_str();
  c_sim->add_option("--detectors", sim.detectors, "Number of detectors")->capture_default_str();
  c_sim->add_option("--sigma", sim.sigma, "Noise level relative to max(Phi x)")->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "Noise seed")->capture_default_str();
  c_sim->add_option("--out-dir", sim.out_dir, "Output directory (y, x_true)")->capture_default_str();

  ReconstructArgs rec;
  auto *c_rec = app.add_subcommand("reconstruct", "MAP reconstruction");
  c_rec->add_option("--data", rec.data, "Sinogram RAWJ")->required();
  c_rec->add_option("--epsilon", rec.epsilon, "Noise bound (defaults to the data header)");
  c_rec->add_option("--psi", rec.psi, "Sparsity transform")
      ->check(CLI::IsMember({"haar3", "grad"}))
      ->capture_default_str();
  c_rec->add_option("--image-size", rec.image_size, "Reconstruction grid side")->capture_default_str();
  c_rec->add_option("--max-iters", rec.max_iters, "Iteration cap");
  c_rec->add_option("--out", rec.out, "Output RAWJ stem")->capture_default_str();

  DescribeArgs desc;
  auto *c_desc = app.add_subcommand("describe-structure", "Structure-free set parameters for a mask");
  c_desc->add_option("--image", desc.image, "Image RAWJ")->required();
  c_desc->add_option("--mask", desc.mask, "Mask PGM")->required()->check(CLI::ExistingFile);
  c_desc->add_option("--ring-width", desc.ring_width, "Neighborhood ring width")->capture_default_str();

  TestArgs test;
  auto *c_test = app.add_subcommand("test", "Hypothesis test for a masked structure");
  c_test->add_option("--map-result", test.map_result, "MAP result RAWJ")->required();
  c_test->add_option("--data", test.data, "Sinogram RAWJ")->required();
  c_test->add_option("--mask", test.mask, "Mask PGM")->required()->check(CLI::ExistingFile);
  c_test->add_option("--alpha", test.alpha, "Significance level (default 0.01)");
  c_test->add_option("--delta", test.delta, "Decision tolerance on rho (default 1e-3)");
  c_test->add_option("--ring-width", test.ring_width, "Neighborhood ring width (default 3)");
  c_test->add_option("--max-iters", test.max_iters, "Iteration cap");
  c_test->add_option("--out-dir", test.out_dir, "Report directory")->capture_default_str();

  std::string spec, sweep_out = "sweep-out";
  bool quiet = false;
  auto *c_sweep = app.add_subcommand("sweep", "Run an (angles x noise x mask) sweep");
  c_sweep->add_option("--spec", spec, "Sweep JSON")->required()->check(CLI::ExistingFile);
  c_sweep->add_option("--out-dir", sweep_out, "Output directory")->capture_default_str();
  c_sweep->add_flag("--quiet", quiet, "No progress lines");

  std::string host = "127.0.0.1", data_dir = "buqo-data";
  int port = 8080, workers = 1;
  if (const char *env = std::getenv("BUQO_PORT"))
    port = std::atoi(env);
  auto *c_serve = app.add_subcommand("serve", "HTTP probe service");
  c_serve->add_option("--host", host, "Bind address")->capture_default_str();
  c_serve->add_option("--port", port, "Port (env BUQO_PORT; 0 picks one)")->capture_default_str();
  c_serve->add_option("--data-dir", data_dir, "Session storage")->capture_default_str();
  c_serve->add_option("--workers", workers, "Job workers")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_sim)
      return run_simulate(sim);
    if (*c_rec)
      return run_reconstruct(rec);
    if (*c_desc)
      return run_describe(desc);
    if (*c_test)
      return run_test(test);
    if (*c_sweep) {
      check(buqo_sweep(spec.c_str(), sweep_out.c_str(), quiet ? 0 : 1), "sweep");
      return 0;
    }
    if (*c_serve) {
      check(buqo_serve(host.c_str(), port, data_dir.c_str(), workers), "serve");
      return 0;
    }
  } catch (const std::exception &e) {
    std::fprintf(stderr, "buqo: %s\n", e.what());
    return 1;
  }
  return 1;
}
