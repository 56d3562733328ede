#pragma once

#include "grid.hpp"
#include "data_metric.hpp"
#include "sparsity.hpp"

#include <functional>
#include <optional>

namespace buqo {

struct SolverConfig {
  int max_iters = 5000;
  /// Stop once ||x_{k+1} - x_k|| / ||x_k|| falls below this (and constraints hold).
  double rel_change_tol = 1e-5;
  /// Constraint slack, relative to each constraint's bound.
  double feas_tol = 1e-4;
  int power_iters = 50;
  /// Primal/dual balance: tau = balance / L, sigma = 1 / (balance * L).
  double step_balance = 1.0;
  /// Rebalance tau/sigma from the primal and dual residuals (product unchanged).
  bool adaptive_steps = true;
  /// Known ||R^(1/2) Phi|| (R the data metric); skips the power iteration when set.
  std::optional<double> phi_norm;
  /// Called every `progress_every` iterations with (iteration, residual, rel_change).
  std::function<void(int, double, double)> progress;
  int progress_every = 100;
};

/// min ||Psi x||_1  s.t.  ||Phi x - y||_2 <= epsilon,  x >= 0.
struct MapProblem {
  const LinearOperator *phi = nullptr;
  SparsityTransform psi;
  std::size_t height = 0;
  std::size_t width = 0;
  Vec y;
  double epsilon = 0.0;
  /// Data-space metric for the Phi dual step; null means Euclidean.
  std::shared_ptr<const DataMetric> metric;
};

struct MapResult {
  Image x;
  double residual = 0.0;  // ||Phi x - y||_2
  double objective = 0.0; // ||Psi x||_1
  double epsilon = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Phi evaluations spent inside this solve (norm estimate included).
  std::uint64_t phi_forward = 0;
  std::uint64_t phi_adjoint = 0;
  double phi_norm = 0.0;
  SparsityKind psi_kind = SparsityKind::Haar3;
};

/// Largest singular value of `op` by power iteration on op^T op, started from a
/// fixed pseudo-random vector. Costs `iters` forward and `iters` adjoint calls.
double estimate_operator_norm(const LinearOperator &op, int iters, std::uint64_t seed = 0x5eed);

/// Phi evaluations solve_map performs for a run of `iterations` iterations.
struct EvaluationCount {
  std::uint64_t forward = 0;
  std::uint64_t adjoint = 0;
};
EvaluationCount map_expected_evaluations(int iterations, const SolverConfig &cfg);

/// Primal-dual (Chambolle-Pock) iteration with one dual block per operator:
/// an l2-ball dual for Phi, an l-infinity-ball dual for Psi, and projection onto
/// the nonnegative orthant as the primal prox. The Phi dual steps in the problem's
/// data metric, and Phi is rescaled by its norm in that metric so both blocks share
/// one step pair. Never throws on infeasible data; it returns the last iterate with
/// converged = false.
MapResult solve_map(const MapProblem &p, const SolverConfig &cfg = {});

/// Absolute slack allowed on ||Phi x - y|| <= epsilon.
double data_bound(double epsilon, double feas_tol, std::span<const double> y);

} // namespace buqo
