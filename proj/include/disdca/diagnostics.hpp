#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "disdca/data.hpp"
#include "disdca/loss.hpp"
#include "disdca/types.hpp"

namespace disdca {

// One row of a run trace. j = -1 marks a round-level record; inner-step
// records carry j in 1..m (j = 0 is the state right after the reduce).
// R and S exist only when per-step diagnostics ran (simulated lockstep);
// epsilon and dist_to_opt only when a reference optimum was supplied.
struct TraceRecord {
  int t = 0;
  int j = -1;
  double dual_obj = 0;
  double primal_obj = 0;
  double gap = 0;
  std::optional<double> epsilon;
  std::optional<double> R;
  std::optional<double> S;
  std::optional<double> dist_to_opt;
};

// Output of the high-accuracy single-machine run; anchors epsilon and
// ||w - w*|| measurements.
struct Reference {
  std::vector<double> w;
  std::vector<double> alpha;
  double dual_obj = 0;
  double gap_tol = 1e-10;
};

// P(w) = 1/n sum phi(x_i . w, y_i) + lambda/2 ||w||^2
double primal_objective(const Dataset& ds, std::span<const double> w,
                        const LossModel& loss, const Regularizer& reg);

// D(alpha) = 1/n sum -phi*(-alpha_i) - 1/(2 lambda) ||1/n sum alpha_i x_i||^2
double dual_objective(const Dataset& ds, std::span<const double> alpha,
                      const LossModel& loss, const Regularizer& reg);

struct BoundParams {
  double L = 2;
  double lambda = 1e-3;
  std::int64_t n = 1;
  int m = 1;
  int K = 1;
  double epsilon0 = 0;
  Variant variant = Variant::naive;

  double condition_number() const { return L / lambda; }
};

struct BoundValue {
  double dual_bound = 0;
  double gap_bound = 0;
};

// Convergence certificates after t rounds:
//   naive       dual (1 - 1/(c + n/(mK)))^t e0,   gap (c + n/(mK)) x dual
//   orthogonal  dual (1 - K/(c + n))^{mt} e0,     gap (c + n)/K x dual
// No closed bound exists for the practical variant.
BoundValue theorem_bound(const BoundParams& params, int t);

// sum_{j=1..m} mu^{m-j} r[j-1]
double accumulate_S(std::span<const double> r, double mu);

// Per-worker pieces of the deviation term at one inner step: omega is the
// negated loss gradient at the virtual global primal, x_dot_u and x_dot_w are
// the example's margins against the worker-local and global primals before
// the step.
struct InnerStepTerm {
  double omega = 0;
  double alpha = 0;
  double delta_alpha = 0;
  double x_dot_u = 0;
  double x_dot_w = 0;
};

// R = 1/n sum_k (s (omega_k - alpha_k) - delta_k)(x_k.u_k - x_k.w)
double residual_R(std::span<const InnerStepTerm> terms, double s,
                  std::int64_t n);

// Observed per-round decay ratios eps^{(t)}/eps^{(t-1)} and, where S was
// recorded, S^{(t,m)}/eps^{(t)}. Purely observational.
struct EpsilonFit {
  std::vector<int> rounds;
  std::vector<double> decay_ratio;
  std::vector<double> s_over_eps;
  std::vector<int> s_rounds;
};

EpsilonFit epsilon_fit(std::span<const TraceRecord> trace);

std::string format_double(double v);  // %.17g

// Columns: t,j,dual_obj,primal_obj,gap,epsilon,R,S,dist_to_opt. Header row
// mandatory; absent optionals serialize as empty fields; config lines are
// emitted first as `# key=value`.
void write_trace_csv(
    std::ostream& out, std::span<const TraceRecord> trace,
    std::span<const std::pair<std::string, std::string>> config);

}  // namespace disdca
