// Test-only brute-force helpers, kept independent of the library's solve
// paths so they can act as oracles.
#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "disdca/loss.hpp"

namespace oracle {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Objective wrapper that treats conjugate-domain violations as -inf.
inline double guarded_objective(const disdca::LossModel& loss,
                                const disdca::IncrementProblem& p, double d) {
  try {
    return disdca::increment_objective(loss, p, d);
  } catch (const disdca::DomainError&) {
    return kNegInf;
  }
}

// Golden-section bracket narrowing for the maximum of a unimodal f.
inline std::pair<double, double> golden_bracket(
    const std::function<double(double)>& f, double lo, double hi,
    double width_tol) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > width_tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return {a, b};
}

inline double golden_max(const std::function<double(double)>& f, double lo,
                         double hi, double width_tol) {
  const auto [a, b] = golden_bracket(f, lo, hi, width_tol);
  return 0.5 * (a + b);
}

// Golden section alone cannot localize a smooth maximum past the
// value-noise floor (~sqrt(eps) for unit curvature), so narrow to ~1e-5 and
// finish with one parabolic-interpolation step, which is exact for
// quadratics. Falls back to a deep golden search when the stencil leaves the
// domain (boundary maxima are steeply one-sided, where golden is reliable).
inline double golden_max_polished(const std::function<double(double)>& f,
                                  double lo, double hi) {
  const auto [a, b] = golden_bracket(f, lo, hi, 1e-5);
  const double c = 0.5 * (a + b);
  const double h = 0.25 * (b - a);
  const double f0 = f(c), fp = f(c + h), fm = f(c - h);
  if (std::isfinite(f0) && std::isfinite(fp) && std::isfinite(fm)) {
    const double denom = fp - 2.0 * f0 + fm;
    if (denom < 0) {
      const double vertex = c - h * (fp - fm) / (2.0 * denom);
      if (vertex >= a && vertex <= b) return vertex;
    }
  }
  return golden_max(f, a, b, 1e-12);
}

struct BruteResult {
  double grid_argmax = 0;
  double refined_argmax = 0;
};

// Scan [lo, hi] at the given resolution, then polish the winning bracket by
// golden section.
inline BruteResult brute_increment(const disdca::LossModel& loss,
                                   const disdca::IncrementProblem& p,
                                   double lo, double hi, double resolution) {
  const auto f = [&](double d) { return guarded_objective(loss, p, d); };
  double best = kNegInf, best_d = lo;
  const long long steps = static_cast<long long>((hi - lo) / resolution) + 1;
  for (long long i = 0; i <= steps; ++i) {
    const double d = lo + resolution * static_cast<double>(i);
    if (d > hi) break;
    const double v = f(d);
    if (v > best) {
      best = v;
      best_d = d;
    }
  }
  BruteResult r;
  r.grid_argmax = best_d;
  r.refined_argmax =
      golden_max_polished(f, best_d - resolution, best_d + resolution);
  return r;
}

// Central finite difference.
inline double fd_derivative(const std::function<double(double)>& f, double x,
                            double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracle
