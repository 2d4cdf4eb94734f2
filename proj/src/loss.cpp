#include "disdca/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace disdca {

LossModel make_loss(LossKind kind) {
  switch (kind) {
    case LossKind::squared_hinge:
      return {kind, 2.0};
    case LossKind::logistic:
      return {kind, 0.5};
    case LossKind::least_squares:
      return {kind, 1.0};
  }
  throw ConfigError("unknown loss kind");
}

const char* loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::squared_hinge:
      return "squared_hinge";
    case LossKind::logistic:
      return "logistic";
    case LossKind::least_squares:
      return "least_squares";
  }
  return "?";
}

LossKind loss_from_name(std::string_view name) {
  if (name == "squared_hinge") return LossKind::squared_hinge;
  if (name == "logistic") return LossKind::logistic;
  if (name == "least_squares") return LossKind::least_squares;
  throw ConfigError("unknown loss: " + std::string(name));
}

double loss_value(const LossModel& loss, double z, double y) {
  switch (loss.kind) {
    case LossKind::squared_hinge: {
      const double t = 1.0 - y * z;
      return t > 0 ? t * t : 0.0;
    }
    case LossKind::logistic: {
      const double yz = y * z;
      // log(1 + exp(-yz)) without overflow for large |yz|
      return yz >= 0 ? std::log1p(std::exp(-yz)) : -yz + std::log1p(std::exp(yz));
    }
    case LossKind::least_squares: {
      const double d = y - z;
      return 0.5 * d * d;
    }
  }
  return 0;
}

double loss_grad(const LossModel& loss, double z, double y) {
  switch (loss.kind) {
    case LossKind::squared_hinge: {
      const double t = 1.0 - y * z;
      return t > 0 ? -2.0 * y * t : 0.0;
    }
    case LossKind::logistic: {
      const double yz = y * z;
      if (yz >= 0) {
        const double e = std::exp(-yz);
        return -y * e / (1.0 + e);
      }
      return -y / (1.0 + std::exp(yz));
    }
    case LossKind::least_squares:
      return z - y;
  }
  return 0;
}

namespace {

inline double xlogx(double v) { return v > 0 ? v * std::log(v) : 0.0; }

}  // namespace

double conjugate_neg(const LossModel& loss, double a, double y) {
  switch (loss.kind) {
    case LossKind::squared_hinge:
      // phi*(alpha) = alpha y + alpha^2/4 evaluated at -a
      return -a * y + 0.25 * a * a;
    case LossKind::logistic: {
      const double b = a * y;
      if (!(b >= 0.0 && b <= 1.0))
        throw DomainError("logistic conjugate domain violated: a=" +
                          std::to_string(a) + ", a*y=" + std::to_string(b));
      return xlogx(b) + xlogx(1.0 - b);
    }
    case LossKind::least_squares:
      return -a * y + 0.5 * a * a;
  }
  return 0;
}

double increment_objective(const LossModel& loss, const IncrementProblem& p,
                           double delta) {
  const double quad = p.scale * p.x_norm_sq /
                      (2.0 * p.lambda * static_cast<double>(p.n));
  return -conjugate_neg(loss, p.alpha + delta, p.y) - delta * p.margin -
         quad * delta * delta;
}

namespace {

double logistic_increment(const IncrementProblem& p) {
  if (std::abs(p.y) != 1.0)
    throw DomainError("logistic dual increment requires labels in {-1,+1}");
  constexpr double kEdge = 1e-12;
  constexpr double kTol = 1e-12;
  constexpr int kMaxIter = 100;
  const double n = static_cast<double>(p.n);
  const double q = p.scale * p.x_norm_sq / (p.lambda * n);

  // b = (alpha + d) y must stay in [kEdge, 1 - kEdge]
  const double d_a = kEdge * p.y - p.alpha;
  const double d_b = (1.0 - kEdge) * p.y - p.alpha;
  double lo = std::min(d_a, d_b);
  double hi = std::max(d_a, d_b);

  const auto grad = [&](double d) {
    const double b = (p.alpha + d) * p.y;
    return -p.y * std::log(b / (1.0 - b)) - p.margin - q * d;
  };

  // h is concave, so h' is decreasing: a boundary wins when the gradient
  // does not change sign over the interval.
  if (grad(lo) <= 0) return lo;
  if (grad(hi) >= 0) return hi;

  double d = std::clamp(0.0, lo, hi);
  double g = 0;
  for (int it = 0; it < kMaxIter; ++it) {
    g = grad(d);
    if (std::abs(g) <= kTol) return d;
    if (g > 0)
      lo = d;
    else
      hi = d;
    const double b = (p.alpha + d) * p.y;
    const double curvature = -1.0 / (b * (1.0 - b)) - q;
    const double newton = d - g / curvature;
    d = (newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
  }
  throw NumericalError("logistic dual increment did not converge; residual=" +
                       std::to_string(g));
}

}  // namespace

double dual_increment(const LossModel& loss, const IncrementProblem& p) {
  const double n = static_cast<double>(p.n);
  switch (loss.kind) {
    case LossKind::squared_hinge: {
      // the stationary point of the quadratic surrogate; with ||x||^2 = 1 and
      // scale = K this is lambda n / (2K + lambda n) [2(y - margin) - alpha]
      double d = p.lambda * n / (2.0 * p.scale * p.x_norm_sq + p.lambda * n) *
                 (2.0 * (p.y - p.margin) - p.alpha);
      if (p.clip_to_conjugate_domain && (p.alpha + d) * p.y < 0) d = -p.alpha;
      return d;
    }
    case LossKind::least_squares:
      return (p.y - p.margin - p.alpha) /
             (1.0 + p.scale * p.x_norm_sq / (p.lambda * n));
    case LossKind::logistic:
      return logistic_increment(p);
  }
  return 0;
}

std::vector<double> primal_from_dual(const Regularizer& reg,
                                     std::span<const double> v) {
  std::vector<double> w(v.begin(), v.end());
  for (double& c : w) c /= reg.lambda;
  return w;
}

}  // namespace disdca
