#pragma once

// Nonlinear conjugate gradient (Hestenes-Stiefel) with a More-Thuente
// line search.

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace cpwopt {

struct LineSearchConfig {
  double c1 = 1e-4;          // sufficient decrease
  double c2 = 1e-2;          // curvature (strong Wolfe)
  double initial_step = 1.0;
  int max_trials = 20;
  double step_min = 1e-15;
  double step_max = 1e15;
  double xtol = 1e-15;       // relative width of the interval of uncertainty

  void validate() const;
};

enum class LineSearchStatus {
  converged,          // both strong Wolfe conditions hold
  interval_too_small, // relative interval width reached xtol
  max_trials,
  at_step_min,
  at_step_max,
  rounding_errors,
  not_descent,        // phi'(0) >= 0 on entry
};

[[nodiscard]] std::string_view to_string(LineSearchStatus s) noexcept;

struct LineSearchResult {
  double step = 0.0;
  double value = 0.0;       // phi(step)
  double derivative = 0.0;  // phi'(step)
  int trials = 0;
  LineSearchStatus status = LineSearchStatus::converged;
  [[nodiscard]] bool ok() const noexcept { return status == LineSearchStatus::converged; }
};

/// phi(alpha) -> (value, derivative) along a search ray.
using LineFunction = std::function<std::pair<double, double>(double)>;

/// More-Thuente safeguarded cubic/quadratic interpolation search for a step
/// satisfying the strong Wolfe conditions
///   phi(a) <= phi(0) + c1 a phi'(0),   |phi'(a)| <= c2 |phi'(0)|.
/// The last trial evaluated is always the returned step.
[[nodiscard]] LineSearchResult more_thuente_search(const LineFunction& phi, double phi0,
                                                   double dphi0, const LineSearchConfig& cfg);
/// Convenience overload that evaluates phi(0) itself (one extra call, not
/// counted in `trials`).
[[nodiscard]] LineSearchResult more_thuente_search(const LineFunction& phi,
                                                   const LineSearchConfig& cfg);

enum class StopReason { f_tol, g_tol, max_iters, max_fevals, line_search_failure, numerical_failure };

[[nodiscard]] std::string_view to_string(StopReason s) noexcept;
/// Inverse of to_string; throws ValueError on unknown names.
[[nodiscard]] StopReason stop_reason_from_string(std::string_view s);

/// Details of one accepted line-search step, for observers.
struct AcceptedStep {
  int iteration = 0;
  double step = 0.0;
  double f_before = 0.0;
  double slope_before = 0.0;  // phi'(0) = g_k^T d_k
  double f_after = 0.0;
  double slope_after = 0.0;   // phi'(step)
};

struct OptConfig {
  double rel_f_tol = 1e-8;
  /// Tolerance on ||g||_2 / P with P the number of variables.
  double grad_tol = 1e-8;
  int max_iters = 500;
  int max_fevals = 10000;
  /// Restart with steepest descent every this many iterations; 0 means P.
  int restart_every = 0;
  LineSearchConfig line_search;
  /// Called after every accepted step (optional).
  std::function<void(const AcceptedStep&)> on_step;

  void validate() const;
};

struct OptResult {
  double f = 0.0;
  double grad_norm = 0.0;  // ||g||_2 / P
  int iterations = 0;
  int fevals = 0;
  StopReason stop_reason = StopReason::max_iters;
  double seconds = 0.0;
  int restarts = 0;
};

/// Objective oracle: returns f(x) and writes grad f(x) into g (already sized).
using GradientOracle = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& g)>;

struct MinimizeResult {
  Eigen::VectorXd x;
  OptResult result;
};

/// Minimizes with d_k = -g_k + beta d_{k-1},
///   beta = g_k^T (g_k - g_{k-1}) / d_{k-1}^T (g_k - g_{k-1}).
/// Falls back to steepest descent when beta is undefined, when d_k is not a
/// descent direction, and every `restart_every` iterations. A failed line
/// search along a conjugate direction is retried once along -g; if that also
/// fails the run stops with line_search_failure and returns the best iterate.
/// Relative function change is |f_{k-1} - f_k| / |f_{k-1}| (0 if f_{k-1} = 0).
[[nodiscard]] MinimizeResult ncg_minimize(const GradientOracle& oracle, Eigen::VectorXd x0,
                                          const OptConfig& cfg);

}  // namespace cpwopt
