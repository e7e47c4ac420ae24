#include <chrono>
#include <cmath>
#include <limits>

#include "cpwopt/error.hpp"
#include "cpwopt/optimizer.hpp"

namespace cpwopt {

namespace {

struct NonFiniteTrial {};

}  // namespace

std::string_view to_string(StopReason s) noexcept {
  switch (s) {
    case StopReason::f_tol: return "f_tol";
    case StopReason::g_tol: return "g_tol";
    case StopReason::max_iters: return "max_iters";
    case StopReason::max_fevals: return "max_fevals";
    case StopReason::line_search_failure: return "line_search_failure";
    case StopReason::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

StopReason stop_reason_from_string(std::string_view s) {
  for (auto r : {StopReason::f_tol, StopReason::g_tol, StopReason::max_iters,
                 StopReason::max_fevals, StopReason::line_search_failure,
                 StopReason::numerical_failure}) {
    if (to_string(r) == s) return r;
  }
  throw ValueError("unknown stop reason '" + std::string(s) + "'");
}

void OptConfig::validate() const {
  if (!(rel_f_tol > 0.0) || !(grad_tol > 0.0)) throw ValueError("tolerances must be positive");
  if (max_iters < 1 || max_fevals < 1) throw ValueError("iteration caps must be at least 1");
  if (restart_every < 0) throw ValueError("restart interval must be nonnegative");
  line_search.validate();
}

MinimizeResult ncg_minimize(const GradientOracle& oracle, Eigen::VectorXd x0, const OptConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto p = x0.size();
  const double scale = 1.0 / static_cast<double>(std::max<Eigen::Index>(p, 1));
  const int restart_every = cfg.restart_every > 0 ? cfg.restart_every : static_cast<int>(p);

  MinimizeResult out;
  out.x = std::move(x0);
  OptResult& res = out.result;
  auto finish = [&](StopReason why) {
    res.stop_reason = why;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  };

  Eigen::VectorXd g(p);
  double f = oracle(out.x, g);
  res.fevals = 1;
  res.f = f;
  if (!std::isfinite(f) || !g.allFinite()) return finish(StopReason::numerical_failure);
  res.grad_norm = g.norm() * scale;
  if (res.grad_norm <= cfg.grad_tol) return finish(StopReason::g_tol);

  Eigen::VectorXd d = -g;
  bool steepest = true;
  Eigen::VectorXd x_trial(p), g_trial(p), g_diff(p);

  // phi(a) = f(x + a d); the oracle's last gradient is kept in g_trial.
  const LineFunction phi = [&](double alpha) {
    x_trial = out.x + alpha * d;
    const double ft = oracle(x_trial, g_trial);
    ++res.fevals;
    if (!std::isfinite(ft) || !g_trial.allFinite()) throw NonFiniteTrial{};
    return std::pair{ft, g_trial.dot(d)};
  };

  int since_restart = 0;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -g;
      slope = -g.squaredNorm();
      steepest = true;
      ++res.restarts;
    }

    LineSearchResult ls;
    for (;;) {
      const int budget = cfg.max_fevals - res.fevals;
      if (budget < 1) return finish(StopReason::max_fevals);
      LineSearchConfig lcfg = cfg.line_search;
      lcfg.max_trials = std::min(lcfg.max_trials, budget);
      try {
        ls = more_thuente_search(phi, f, slope, lcfg);
      } catch (const NonFiniteTrial&) {
        ls = LineSearchResult{};
        ls.status = LineSearchStatus::rounding_errors;
      }
      if (ls.ok()) break;
      if (ls.status == LineSearchStatus::max_trials && res.fevals >= cfg.max_fevals) {
        return finish(StopReason::max_fevals);
      }
      if (steepest) return finish(StopReason::line_search_failure);
      d = -g;
      slope = -g.squaredNorm();
      steepest = true;
      ++res.restarts;
    }

    // The accepted step is always the last trial, so x_trial/g_trial hold it.
    if (cfg.on_step) cfg.on_step({iter, ls.step, f, slope, ls.value, ls.derivative});
    const double f_prev = f;
    out.x.swap(x_trial);
    g_diff = g_trial - g;
    g.swap(g_trial);
    f = ls.value;
    res.f = f;
    res.iterations = iter;
    res.grad_norm = g.norm() * scale;

    if (res.grad_norm <= cfg.grad_tol) return finish(StopReason::g_tol);
    const double rel_change = f_prev == 0.0 ? (f == 0.0 ? 0.0 : std::numeric_limits<double>::infinity())
                                            : std::fabs(f_prev - f) / std::fabs(f_prev);
    if (rel_change <= cfg.rel_f_tol) return finish(StopReason::f_tol);
    if (res.fevals >= cfg.max_fevals) return finish(StopReason::max_fevals);

    ++since_restart;
    const double denom = d.dot(g_diff);
    const double beta = g.dot(g_diff) / denom;
    if (since_restart >= restart_every || denom == 0.0 || !std::isfinite(beta)) {
      d = -g;
      steepest = true;
      since_restart = 0;
      ++res.restarts;
    } else {
      d = -g + beta * d;
      steepest = false;
    }
  }
  return finish(StopReason::max_iters);
}

}  // namespace cpwopt
