#include "disdca/diagnostics.hpp"

#include <cmath>
#include <cstdio>

namespace disdca {

double primal_objective(const Dataset& ds, std::span<const double> w,
                        const LossModel& loss, const Regularizer& reg) {
  const double n = static_cast<double>(ds.count());
  double sum = 0;
  for (std::size_t i = 0; i < ds.count(); ++i)
    sum += loss_value(loss, ds.x[i].dot(w), ds.y[i]);
  return sum / n + 0.5 * reg.lambda * dense_norm_sq(w);
}

double dual_objective(const Dataset& ds, std::span<const double> alpha,
                      const LossModel& loss, const Regularizer& reg) {
  const double n = static_cast<double>(ds.count());
  double conj = 0;
  std::vector<double> v(ds.dim, 0.0);
  for (std::size_t i = 0; i < ds.count(); ++i) {
    try {
      conj += -conjugate_neg(loss, alpha[i], ds.y[i]);
    } catch (const DomainError& e) {
      throw DomainError("dual variable " + std::to_string(i) + ": " + e.what());
    }
    ds.x[i].axpy(alpha[i] / n, v);
  }
  return conj / n - dense_norm_sq(v) / (2.0 * reg.lambda);
}

BoundValue theorem_bound(const BoundParams& params, int t) {
  const double c = params.condition_number();
  const double n = static_cast<double>(params.n);
  switch (params.variant) {
    case Variant::naive: {
      const double denom = c + n / (static_cast<double>(params.m) * params.K);
      const double dual = std::pow(1.0 - 1.0 / denom, t) * params.epsilon0;
      return {dual, denom * dual};
    }
    case Variant::orthogonal: {
      const double rate = 1.0 - params.K / (c + n);
      const double dual =
          std::pow(rate, static_cast<double>(params.m) * t) * params.epsilon0;
      return {dual, (c + n) / params.K * dual};
    }
    case Variant::practical:
      throw ConfigError("no closed-form bound for the practical variant");
  }
  return {};
}

double accumulate_S(std::span<const double> r, double mu) {
  double s = 0;
  for (double v : r) s = mu * s + v;
  return s;
}

double residual_R(std::span<const InnerStepTerm> terms, double s,
                  std::int64_t n) {
  double sum = 0;
  for (const InnerStepTerm& term : terms)
    sum += (s * (term.omega - term.alpha) - term.delta_alpha) *
           (term.x_dot_u - term.x_dot_w);
  return sum / static_cast<double>(n);
}

EpsilonFit epsilon_fit(std::span<const TraceRecord> trace) {
  EpsilonFit fit;
  const TraceRecord* prev = nullptr;
  for (const TraceRecord& rec : trace) {
    if (rec.j != -1 || !rec.epsilon) continue;
    if (prev && *prev->epsilon > 0) {
      fit.rounds.push_back(rec.t);
      fit.decay_ratio.push_back(std::max(*rec.epsilon, 0.0) / *prev->epsilon);
    }
    if (rec.S && *rec.epsilon > 0) {
      fit.s_rounds.push_back(rec.t);
      fit.s_over_eps.push_back(*rec.S / *rec.epsilon);
    }
    prev = &rec;
  }
  return fit;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_trace_csv(
    std::ostream& out, std::span<const TraceRecord> trace,
    std::span<const std::pair<std::string, std::string>> config) {
  for (const auto& [key, value] : config) out << "# " << key << '=' << value << '\n';
  out << "t,j,dual_obj,primal_obj,gap,epsilon,R,S,dist_to_opt\n";
  const auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (const TraceRecord& r : trace) {
    out << r.t << ',' << r.j << ',' << format_double(r.dual_obj) << ','
        << format_double(r.primal_obj) << ',' << format_double(r.gap) << ','
        << opt(r.epsilon) << ',' << opt(r.R) << ',' << opt(r.S) << ','
        << opt(r.dist_to_opt) << '\n';
  }
}

}  // namespace disdca
