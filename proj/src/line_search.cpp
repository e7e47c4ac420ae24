// More-Thuente line search, following the structure of MINPACK-2's
// dcsrch/dcstep: an interval of uncertainty [stx, sty] is maintained and the
// next trial is chosen by safeguarded cubic or quadratic interpolation.

#include <algorithm>
#include <cmath>

#include "cpwopt/error.hpp"
#include "cpwopt/optimizer.hpp"

namespace cpwopt {

namespace {

constexpr double kExtrapolate = 4.0;

// Function value and derivative at one end of the interval of uncertainty.
struct Endpoint {
  double step;
  double f;
  double d;
};

// Computes a safeguarded trial step and updates the interval. Returns false
// on inconsistent input (which signals rounding trouble to the caller).
bool update_interval(Endpoint& x, Endpoint& y, double& stp, double fp, double dp, bool& bracketed,
                     double stpmin, double stpmax) {
  if ((bracketed && (stp <= std::min(x.step, y.step) || stp >= std::max(x.step, y.step))) ||
      x.d * (stp - x.step) >= 0.0 || stpmax < stpmin) {
    return false;
  }
  const double sgnd = dp * (x.d / std::fabs(x.d));
  bool bound = false;
  double stpf = 0.0;

  if (fp > x.f) {
    // Higher function value: the minimum is bracketed. Take the cubic step
    // if it is closer to stx than the quadratic step, else their average.
    bound = true;
    const double theta = 3.0 * (x.f - fp) / (stp - x.step) + x.d + dp;
    const double s = std::max({std::fabs(theta), std::fabs(x.d), std::fabs(dp)});
    double gamma = s * std::sqrt((theta / s) * (theta / s) - (x.d / s) * (dp / s));
    if (stp < x.step) gamma = -gamma;
    const double p = (gamma - x.d) + theta;
    const double q = ((gamma - x.d) + gamma) + dp;
    const double stpc = x.step + (p / q) * (stp - x.step);
    const double stpq =
        x.step + ((x.d / ((x.f - fp) / (stp - x.step) + x.d)) / 2.0) * (stp - x.step);
    stpf = std::fabs(stpc - x.step) < std::fabs(stpq - x.step) ? stpc : stpc + (stpq - stpc) / 2.0;
    bracketed = true;
  } else if (sgnd < 0.0) {
    // Lower value, derivatives of opposite sign: bracketed. Take whichever of
    // the cubic and secant steps is farther from stp.
    const double theta = 3.0 * (x.f - fp) / (stp - x.step) + x.d + dp;
    const double s = std::max({std::fabs(theta), std::fabs(x.d), std::fabs(dp)});
    double gamma = s * std::sqrt((theta / s) * (theta / s) - (x.d / s) * (dp / s));
    if (stp > x.step) gamma = -gamma;
    const double p = (gamma - dp) + theta;
    const double q = ((gamma - dp) + gamma) + x.d;
    const double stpc = stp + (p / q) * (x.step - stp);
    const double stpq = stp + (dp / (dp - x.d)) * (x.step - stp);
    stpf = std::fabs(stpc - stp) > std::fabs(stpq - stp) ? stpc : stpq;
    bracketed = true;
  } else if (std::fabs(dp) < std::fabs(x.d)) {
    // Lower value, same-sign derivatives, derivative magnitude decreasing.
    // The cubic step is only used if the cubic tends to infinity in the
    // direction of the step or its minimum lies beyond stp.
    bound = true;
    const double theta = 3.0 * (x.f - fp) / (stp - x.step) + x.d + dp;
    const double s = std::max({std::fabs(theta), std::fabs(x.d), std::fabs(dp)});
    double gamma =
        s * std::sqrt(std::max(0.0, (theta / s) * (theta / s) - (x.d / s) * (dp / s)));
    if (stp > x.step) gamma = -gamma;
    const double p = (gamma - dp) + theta;
    const double q = (gamma + (x.d - dp)) + gamma;
    const double r = p / q;
    double stpc;
    if (r < 0.0 && gamma != 0.0) {
      stpc = stp + r * (x.step - stp);
    } else if (stp > x.step) {
      stpc = stpmax;
    } else {
      stpc = stpmin;
    }
    const double stpq = stp + (dp / (dp - x.d)) * (x.step - stp);
    if (bracketed) {
      stpf = std::fabs(stp - stpc) < std::fabs(stp - stpq) ? stpc : stpq;
    } else {
      stpf = std::fabs(stp - stpc) > std::fabs(stp - stpq) ? stpc : stpq;
    }
  } else {
    // Lower value, same-sign derivatives, derivative magnitude not
    // decreasing: cubic step from the bracket, or a bound.
    if (bracketed) {
      const double theta = 3.0 * (fp - y.f) / (y.step - stp) + y.d + dp;
      const double s = std::max({std::fabs(theta), std::fabs(y.d), std::fabs(dp)});
      double gamma = s * std::sqrt((theta / s) * (theta / s) - (y.d / s) * (dp / s));
      if (stp > y.step) gamma = -gamma;
      const double p = (gamma - dp) + theta;
      const double q = ((gamma - dp) + gamma) + y.d;
      stpf = stp + (p / q) * (y.step - stp);
    } else if (stp > x.step) {
      stpf = stpmax;
    } else {
      stpf = stpmin;
    }
  }

  // The interval update does not depend on which case produced the step.
  if (fp > x.f) {
    y = {stp, fp, dp};
  } else {
    if (sgnd < 0.0) y = x;
    x = {stp, fp, dp};
  }

  stpf = std::clamp(stpf, stpmin, stpmax);
  stp = stpf;
  if (bracketed && bound) {
    const double limit = x.step + 0.66 * (y.step - x.step);
    stp = y.step > x.step ? std::min(limit, stp) : std::max(limit, stp);
  }
  return true;
}

}  // namespace

void LineSearchConfig::validate() const {
  if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) {
    throw ValueError("line search needs 0 < c1 < c2 < 1");
  }
  if (!(initial_step > 0.0) || !(step_min >= 0.0) || !(step_max > step_min) || !(xtol >= 0.0) ||
      max_trials < 1) {
    throw ValueError("invalid line search bounds");
  }
}

std::string_view to_string(LineSearchStatus s) noexcept {
  switch (s) {
    case LineSearchStatus::converged: return "converged";
    case LineSearchStatus::interval_too_small: return "interval_too_small";
    case LineSearchStatus::max_trials: return "max_trials";
    case LineSearchStatus::at_step_min: return "at_step_min";
    case LineSearchStatus::at_step_max: return "at_step_max";
    case LineSearchStatus::rounding_errors: return "rounding_errors";
    case LineSearchStatus::not_descent: return "not_descent";
  }
  return "unknown";
}

LineSearchResult more_thuente_search(const LineFunction& phi, double phi0, double dphi0,
                                     const LineSearchConfig& cfg) {
  cfg.validate();
  LineSearchResult res;
  res.value = phi0;
  res.derivative = dphi0;
  if (!(dphi0 < 0.0)) {
    res.status = LineSearchStatus::not_descent;
    return res;
  }

  const double dgtest = cfg.c1 * dphi0;
  double width = cfg.step_max - cfg.step_min;
  double width1 = 2.0 * width;
  bool bracketed = false;
  bool stage1 = true;
  bool consistent = true;

  Endpoint best{0.0, phi0, dphi0};
  Endpoint other{0.0, phi0, dphi0};
  double stp = cfg.initial_step;

  for (;;) {
    double stmin, stmax;
    if (bracketed) {
      stmin = std::min(best.step, other.step);
      stmax = std::max(best.step, other.step);
    } else {
      stmin = best.step;
      stmax = stp + kExtrapolate * (stp - best.step);
    }
    stp = std::clamp(stp, cfg.step_min, cfg.step_max);

    // On an unusual termination, fall back to the best step found so far.
    if ((bracketed && (stp <= stmin || stp >= stmax)) || res.trials >= cfg.max_trials - 1 ||
        !consistent || (bracketed && stmax - stmin <= cfg.xtol * stmax)) {
      stp = best.step;
    }

    const auto [f, dg] = phi(stp);
    ++res.trials;
    res.step = stp;
    res.value = f;
    res.derivative = dg;

    const double ftest = phi0 + stp * dgtest;
    bool done = false;
    auto finish = [&](LineSearchStatus s) {
      res.status = s;
      done = true;
    };
    if ((bracketed && (stp <= stmin || stp >= stmax)) || !consistent) {
      finish(LineSearchStatus::rounding_errors);
    }
    if (stp == cfg.step_max && f <= ftest && dg <= dgtest) finish(LineSearchStatus::at_step_max);
    if (stp == cfg.step_min && (f > ftest || dg >= dgtest)) finish(LineSearchStatus::at_step_min);
    if (res.trials >= cfg.max_trials) finish(LineSearchStatus::max_trials);
    if (bracketed && stmax - stmin <= cfg.xtol * stmax) {
      finish(LineSearchStatus::interval_too_small);
    }
    if (f <= ftest && std::fabs(dg) <= cfg.c2 * (-dphi0)) finish(LineSearchStatus::converged);
    if (done) return res;

    if (stage1 && f <= ftest && dg >= std::min(cfg.c1, cfg.c2) * dphi0) stage1 = false;

    if (stage1 && f <= best.f && f > ftest) {
      // Work with the modified function psi(a) = phi(a) - phi(0) - c1 a phi'(0)
      // until a step with nonpositive psi and nonnegative psi' is found.
      Endpoint bm{best.step, best.f - best.step * dgtest, best.d - dgtest};
      Endpoint om{other.step, other.f - other.step * dgtest, other.d - dgtest};
      consistent = update_interval(bm, om, stp, f - res.step * dgtest, dg - dgtest, bracketed,
                                   stmin, stmax);
      best = {bm.step, bm.f + bm.step * dgtest, bm.d + dgtest};
      other = {om.step, om.f + om.step * dgtest, om.d + dgtest};
    } else {
      consistent = update_interval(best, other, stp, f, dg, bracketed, stmin, stmax);
    }

    // Force a sufficient decrease in the size of the interval.
    if (bracketed) {
      if (std::fabs(other.step - best.step) >= 0.66 * width1) {
        stp = best.step + 0.5 * (other.step - best.step);
      }
      width1 = width;
      width = std::fabs(other.step - best.step);
    }
  }
}

LineSearchResult more_thuente_search(const LineFunction& phi, const LineSearchConfig& cfg) {
  const auto [f0, d0] = phi(0.0);
  return more_thuente_search(phi, f0, d0, cfg);
}

}  // namespace cpwopt
