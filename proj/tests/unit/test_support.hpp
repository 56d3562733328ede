#pragma once

#include "json.hpp"
#include "rawj.hpp"

#include <random>

namespace testing {

inline buqo::fs::path data_dir() { return BUQO_TEST_DATA_DIR; }
inline buqo::fs::path repo_data_dir() { return BUQO_REPO_DATA_DIR; }

inline const nlohmann::json &oracles() {
  static const nlohmann::json j = nlohmann::json::parse(buqo::read_text(data_dir() / "oracles.json"));
  return j;
}

inline buqo::Vec gaussian(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  buqo::Vec v(n);
  for (auto &x : v)
    x = nd(rng);
  return v;
}

inline buqo::Vec uniform(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ud(lo, hi);
  buqo::Vec v(n);
  for (auto &x : v)
    x = ud(rng);
  return v;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Fresh scratch directory under the build tree.
inline buqo::fs::path scratch(const std::string &name) {
  const buqo::fs::path p = buqo::fs::path(BUQO_TEST_SCRATCH_DIR) / name;
  std::error_code ec;
  buqo::fs::remove_all(p, ec);
  buqo::fs::create_directories(p);
  return p;
}

} // namespace testing
