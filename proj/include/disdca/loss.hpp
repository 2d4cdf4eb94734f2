#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "disdca/errors.hpp"

namespace disdca {

enum class LossKind { squared_hinge, logistic, least_squares };

// Smooth convex loss phi(z, y) with smoothness constant L.
//   squared hinge  (1 - y z)_+^2          L = 2
//   logistic       log(1 + exp(-y z))     L = 1/2 (1/4 is tight; 1/2 kept as
//                                         the default so bound checks use the
//                                         stated constant, override if wanted)
//   least squares  (y - z)^2 / 2          L = 1
struct LossModel {
  LossKind kind = LossKind::squared_hinge;
  double smoothness = 2.0;
};

LossModel make_loss(LossKind kind);
const char* loss_name(LossKind kind);
LossKind loss_from_name(std::string_view name);

// g(w) = lambda/2 ||w||^2. The kind tag leaves room for other strongly
// convex regularizers behind the same interface; only l2 is implemented.
enum class RegularizerKind { l2 };
struct Regularizer {
  double lambda = 1e-3;
  RegularizerKind kind = RegularizerKind::l2;
};

double loss_value(const LossModel& loss, double z, double y);
double loss_grad(const LossModel& loss, double z, double y);

// phi*(-a), the conjugate evaluated at -a as it appears in the dual
// objective. Logistic requires a*y in [0, 1] and throws DomainError outside.
// Squared hinge uses the unconstrained quadratic form -a y + a^2/4.
double conjugate_neg(const LossModel& loss, double a, double y);

// The single-coordinate dual maximization
//   max_d  -phi*(-(alpha + d)) - d * margin - scale/(2 lambda n) d^2 ||x||^2
struct IncrementProblem {
  double alpha = 0;      // current dual variable
  double margin = 0;     // x . u against the relevant primal vector
  double x_norm_sq = 1;  // ||x||^2, expected in [0, 1]
  double scale = 1;      // 1 (orthogonal), K (practical), m K (naive)
  double lambda = 1e-3;
  std::int64_t n = 1;
  double y = 1;  // label
  bool clip_to_conjugate_domain = false;  // squared hinge only
};

// Objective of the 1-D problem at a candidate step. Used by tests/oracles.
double increment_objective(const LossModel& loss, const IncrementProblem& p,
                           double delta);

// Returns the maximizing step d. Closed forms for squared hinge and least
// squares; safeguarded Newton with bisection fallback for logistic
// (gradient tolerance 1e-12, at most 100 iterations).
double dual_increment(const LossModel& loss, const IncrementProblem& p);

// w = grad g*(v) = v / lambda for the l2 regularizer.
std::vector<double> primal_from_dual(const Regularizer& reg,
                                     std::span<const double> v);

}  // namespace disdca
