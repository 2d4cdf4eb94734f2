#include "disdca/solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "disdca/rng.hpp"

namespace disdca {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::naive:
      return "naive";
    case Variant::practical:
      return "practical";
    case Variant::orthogonal:
      return "orthogonal";
  }
  return "?";
}

Variant variant_from_name(std::string_view name) {
  if (name == "naive") return Variant::naive;
  if (name == "practical") return Variant::practical;
  if (name == "orthogonal") return Variant::orthogonal;
  throw ConfigError("unknown variant: " + std::string(name));
}

const char* sampling_name(Sampling s) {
  return s == Sampling::with_replacement ? "with_replacement"
                                         : "without_replacement";
}

Sampling sampling_from_name(std::string_view name) {
  if (name == "with_replacement") return Sampling::with_replacement;
  if (name == "without_replacement") return Sampling::without_replacement_per_round;
  throw ConfigError("unknown sampling mode: " + std::string(name));
}

namespace {

struct StepInfo {
  std::uint32_t global_idx = 0;
  double margin = 0;
  double alpha_before = 0;
  double delta = 0;
};

// Per-worker state: dual block, local primal u (also the margin source for
// the naive variant, where it simply stays at the round-start w), and the
// private sampling stream seeded with cfg.seed + worker id.
class WorkerRuntime {
 public:
  WorkerRuntime(const Dataset& ds, const SolverConfig& cfg,
                const std::vector<std::uint32_t>& shard,
                const std::vector<double>& x_norm_sq, int worker_id)
      : ds_(ds),
        cfg_(cfg),
        shard_(shard),
        x_norm_sq_(x_norm_sq),
        alpha_(shard.size(), 0.0),
        u_(ds.dim, 0.0),
        w_local_(ds.dim, 0.0),
        rng_(cfg.seed + static_cast<std::uint64_t>(worker_id)) {
    const double n = static_cast<double>(ds.count());
    scale_ = cfg.scale();
    u_coef_ = cfg.variant == Variant::naive
                  ? 0.0
                  : cfg.w_scale() / (cfg.lambda * n);
    w_coef_ = cfg.w_scale() / (cfg.lambda * n);
    if (cfg.sampling == Sampling::without_replacement_per_round) {
      order_.resize(shard.size());
      for (std::size_t i = 0; i < shard.size(); ++i)
        order_[i] = static_cast<std::uint32_t>(i);
    }
  }

  void begin_round(std::span<const double> w_global) {
    u_.assign(w_global.begin(), w_global.end());
    samples_.resize(cfg_.m);
    if (cfg_.sampling == Sampling::with_replacement) {
      for (int j = 0; j < cfg_.m; ++j)
        samples_[j] = static_cast<std::uint32_t>(rng_.below(shard_.size()));
    } else {
      order_pos_ = order_.size();  // fresh permutation every round
      for (int j = 0; j < cfg_.m; ++j) {
        if (order_pos_ == order_.size()) {
          rng_.shuffle(order_);
          order_pos_ = 0;
        }
        samples_[j] = order_[order_pos_++];
      }
    }
  }

  StepInfo inner_step(int j) {
    const std::uint32_t li = samples_[j];
    const std::uint32_t gi = shard_[li];
    const SparseVector& x = ds_.x[gi];
    StepInfo info;
    info.global_idx = gi;
    info.margin = x.dot(u_);
    info.alpha_before = alpha_[li];
    IncrementProblem p;
    p.alpha = alpha_[li];
    p.margin = info.margin;
    p.x_norm_sq = x_norm_sq_[gi];
    p.scale = scale_;
    p.lambda = cfg_.lambda;
    p.n = static_cast<std::int64_t>(ds_.count());
    p.y = ds_.y[gi];
    p.clip_to_conjugate_domain = cfg_.clip_squared_hinge;
    info.delta = dual_increment(cfg_.loss, p);
    alpha_[li] += info.delta;
    if (u_coef_ != 0.0 && info.delta != 0.0) x.axpy(u_coef_ * info.delta, u_);
    return info;
  }

  void recompute_w_local() {
    std::fill(w_local_.begin(), w_local_.end(), 0.0);
    for (std::size_t i = 0; i < shard_.size(); ++i)
      ds_.x[shard_[i]].axpy(w_coef_ * alpha_[i], w_local_);
  }

  double conj_sum() const {
    double s = 0;
    for (std::size_t i = 0; i < shard_.size(); ++i)
      s += -conjugate_neg(cfg_.loss, alpha_[i], ds_.y[shard_[i]]);
    return s;
  }

  const std::vector<double>& w_local() const { return w_local_; }
  const std::vector<double>& alpha() const { return alpha_; }
  const std::vector<double>& u() const { return u_; }
  const std::vector<std::uint32_t>& shard() const { return shard_; }

 private:
  const Dataset& ds_;
  const SolverConfig& cfg_;
  const std::vector<std::uint32_t>& shard_;
  const std::vector<double>& x_norm_sq_;
  std::vector<double> alpha_;
  std::vector<double> u_;
  std::vector<double> w_local_;
  std::vector<std::uint32_t> samples_;
  std::vector<std::uint32_t> order_;
  std::size_t order_pos_ = 0;
  Rng rng_;
  double scale_ = 1, u_coef_ = 0, w_coef_ = 0;
};

std::vector<double> example_norms(const Dataset& ds) {
  std::vector<double> norms(ds.count());
  for (std::size_t i = 0; i < ds.count(); ++i) norms[i] = ds.x[i].norm_sq();
  return norms;
}

void check_preconditions(const SolverConfig& cfg, const Dataset& ds,
                         const Partition& p,
                         const std::vector<double>& x_norm_sq) {
  if (cfg.K != p.K)
    throw ConfigError("partition has K=" + std::to_string(p.K) +
                      " but config has K=" + std::to_string(cfg.K));
  if (cfg.K < 1 || cfg.m < 1 || cfg.T < 0) throw ConfigError("bad K/m/T");
  if (!(cfg.lambda > 0)) throw ConfigError("lambda must be positive");
  for (double nsq : x_norm_sq)
    if (nsq > 1.0 + 1e-8)
      throw ConfigError("dataset not normalized to the unit ball");
  if (cfg.loss.kind == LossKind::logistic)
    for (double y : ds.y)
      if (y != 1.0 && y != -1.0)
        throw ConfigError("logistic loss requires labels in {-1,+1}");
  if (cfg.variant == Variant::orthogonal) {
    const double residual = orthogonality_residual(ds, p);
    if (residual > cfg.orth_tol)
      throw ConfigError("orthogonal variant requires cross-shard orthogonality; "
                        "residual=" + format_double(residual));
  }
}

// D via the reduced w: conj_total/n - lambda/2 ||w||^2. Shared by the
// simulated and TCP paths so their traces agree bit for bit.
TraceRecord round_record(int t, const Dataset& ds, const SolverConfig& cfg,
                         std::span<const double> w, double conj_total,
                         const Reference* ref) {
  const double n = static_cast<double>(ds.count());
  TraceRecord rec;
  rec.t = t;
  rec.j = -1;
  rec.dual_obj = conj_total / n - 0.5 * cfg.lambda * dense_norm_sq(w);
  rec.primal_obj =
      primal_objective(ds, w, cfg.loss, Regularizer{cfg.lambda});
  rec.gap = rec.primal_obj - rec.dual_obj;
  if (ref) {
    rec.epsilon = ref->dual_obj - rec.dual_obj;
    rec.dist_to_opt = dense_dist(w, ref->w);
  }
  if (!all_finite(w) || !std::isfinite(rec.dual_obj) ||
      !std::isfinite(rec.primal_obj))
    throw NumericalError("non-finite value in round " + std::to_string(t));
  return rec;
}

std::vector<double> make_payload(const WorkerRuntime& wk) {
  std::vector<double> payload = wk.w_local();
  payload.push_back(wk.conj_sum());
  return payload;
}

double payload_conj_total(const std::vector<double>& reduced, ReduceOp op, int K) {
  const double slot = reduced.back();
  return op == ReduceOp::average ? slot * K : slot;
}

void gather_alpha(const std::vector<WorkerRuntime>& workers,
                  std::size_t n, std::vector<double>* out) {
  out->assign(n, 0.0);
  for (const WorkerRuntime& wk : workers)
    for (std::size_t i = 0; i < wk.shard().size(); ++i)
      (*out)[wk.shard()[i]] = wk.alpha()[i];
}

SolverResult run_lockstep(const SolverConfig& cfg, const Dataset& ds,
                          const Partition& p, const RunHooks& hooks,
                          const std::vector<double>& x_norm_sq) {
  const std::size_t d = ds.dim;
  const double n = static_cast<double>(ds.count());
  const Regularizer reg{cfg.lambda};
  const ReduceOp op = cfg.reduce_op();

  std::vector<WorkerRuntime> workers;
  workers.reserve(cfg.K);
  for (int k = 0; k < cfg.K; ++k)
    workers.emplace_back(ds, cfg, p.shards[k], x_norm_sq, k);

  SolverResult result;
  std::vector<double> w(d, 0.0);  // w^0 = grad g*(0) = 0
  result.trace.push_back(round_record(0, ds, cfg, w, 0.0, hooks.reference));

  // per-step diagnostics state
  const double c = cfg.loss.smoothness / cfg.lambda;
  const double s_factor = n / (c * cfg.K + n);
  const double mu = 1.0 - s_factor * cfg.K / n;
  // written exactly like the workers' u coefficient so that on orthogonal
  // data u_k and the virtual w^{t,j} agree bit for bit on each shard
  const double inner_coef = 1.0 / (cfg.lambda * n);
  std::vector<double> w_inner;
  double conj_total = 0;
  std::vector<InnerStepTerm> terms(cfg.K);

  const auto inner_record = [&](int t, int j) {
    TraceRecord rec;
    rec.t = t;
    rec.j = j;
    rec.dual_obj = conj_total / n - 0.5 * cfg.lambda * dense_norm_sq(w_inner);
    rec.primal_obj = primal_objective(ds, w_inner, cfg.loss, reg);
    rec.gap = rec.primal_obj - rec.dual_obj;
    if (hooks.reference) {
      rec.epsilon = hooks.reference->dual_obj - rec.dual_obj;
      rec.dist_to_opt = dense_dist(w_inner, hooks.reference->w);
    }
    if (!std::isfinite(rec.dual_obj))
      throw NumericalError("non-finite dual objective at inner step");
    return rec;
  };

  std::vector<std::vector<double>> payloads(cfg.K);
  std::vector<StepInfo> infos(cfg.K);
  std::vector<double> alpha_snapshot;

  for (int t = 1; t <= cfg.T; ++t) {
    for (auto& wk : workers) wk.begin_round(w);

    double S_round = 0;
    if (hooks.inner_records) {
      w_inner = w;
      conj_total = 0;
      for (auto& wk : workers) conj_total += wk.conj_sum();
      result.trace.push_back(inner_record(t, 0));
    }

    for (int j = 0; j < cfg.m; ++j) {
      for (int k = 0; k < cfg.K; ++k) infos[k] = workers[k].inner_step(j);

      if (hooks.inner_records) {
        // all terms are measured against w^{t,j-1}, before this step's
        // updates are folded into the virtual global primal
        for (int k = 0; k < cfg.K; ++k) {
          const StepInfo& info = infos[k];
          const SparseVector& x = ds.x[info.global_idx];
          InnerStepTerm& term = terms[k];
          term.x_dot_w = x.dot(w_inner);
          term.omega = -loss_grad(cfg.loss, term.x_dot_w, ds.y[info.global_idx]);
          term.alpha = info.alpha_before;
          term.delta_alpha = info.delta;
          term.x_dot_u = info.margin;
        }
        const double R = residual_R(terms, s_factor, ds.count());
        for (int k = 0; k < cfg.K; ++k) {
          const StepInfo& info = infos[k];
          const SparseVector& x = ds.x[info.global_idx];
          x.axpy(info.delta * inner_coef, w_inner);
          conj_total +=
              -conjugate_neg(cfg.loss, info.alpha_before + info.delta,
                             ds.y[info.global_idx]) +
              conjugate_neg(cfg.loss, info.alpha_before, ds.y[info.global_idx]);
        }
        S_round = mu * S_round + R;
        TraceRecord rec = inner_record(t, j + 1);
        rec.R = R;
        rec.S = S_round;
        result.trace.push_back(rec);
      }
    }

    for (int k = 0; k < cfg.K; ++k) {
      workers[k].recompute_w_local();
      payloads[k] = make_payload(workers[k]);
    }
    const std::vector<double> reduced = reduce_in_order(payloads, op);
    w.assign(reduced.begin(), reduced.end() - 1);
    TraceRecord rec = round_record(t, ds, cfg, w,
                                   payload_conj_total(reduced, op, cfg.K),
                                   hooks.reference);
    if (hooks.inner_records) rec.S = S_round;
    result.trace.push_back(rec);

    if (hooks.on_round) {
      gather_alpha(workers, ds.count(), &alpha_snapshot);
      hooks.on_round(t, w, alpha_snapshot);
    }
  }

  result.w = std::move(w);
  gather_alpha(workers, ds.count(), &result.alpha);
  result.rounds_run = cfg.T;
  return result;
}

SolverResult run_threads(const SolverConfig& cfg, const Dataset& ds,
                         const Partition& p, const RunHooks& hooks,
                         const std::vector<double>& x_norm_sq) {
  InProcessChannel channel(cfg.K);
  std::vector<WorkerRuntime> workers;
  workers.reserve(cfg.K);
  for (int k = 0; k < cfg.K; ++k)
    workers.emplace_back(ds, cfg, p.shards[k], x_norm_sq, k);

  SolverResult result;
  result.trace.push_back(
      round_record(0, ds, cfg, std::vector<double>(ds.dim, 0.0), 0.0,
                   hooks.reference));

  std::vector<std::exception_ptr> errors(cfg.K);
  std::vector<std::thread> threads;
  const ReduceOp op = cfg.reduce_op();

  for (int k = 0; k < cfg.K; ++k) {
    threads.emplace_back([&, k] {
      try {
        std::vector<double> w(ds.dim, 0.0);
        for (int t = 1; t <= cfg.T; ++t) {
          workers[k].begin_round(w);
          for (int j = 0; j < cfg.m; ++j) workers[k].inner_step(j);
          workers[k].recompute_w_local();
          const std::vector<double> reduced = channel.reduce(
              k, make_payload(workers[k]), op, static_cast<std::uint32_t>(t - 1));
          w.assign(reduced.begin(), reduced.end() - 1);
          if (k == 0) {
            result.trace.push_back(
                round_record(t, ds, cfg, w,
                             payload_conj_total(reduced, op, cfg.K),
                             hooks.reference));
          }
        }
        if (k == 0) result.w = std::move(w);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);

  gather_alpha(workers, ds.count(), &result.alpha);
  result.rounds_run = cfg.T;
  if (cfg.T == 0) result.w.assign(ds.dim, 0.0);
  return result;
}

}  // namespace

SolverResult run_disdca(const SolverConfig& cfg, const Dataset& ds,
                        const Partition& p, const RunHooks& hooks) {
  const std::vector<double> x_norm_sq = example_norms(ds);
  check_preconditions(cfg, ds, p, x_norm_sq);
  if (hooks.inner_records && cfg.exec != ExecMode::lockstep)
    throw ConfigError("per-step diagnostics require the lockstep driver");
  if (cfg.exec == ExecMode::threads)
    return run_threads(cfg, ds, p, hooks, x_norm_sq);
  return run_lockstep(cfg, ds, p, hooks, x_norm_sq);
}

SolverResult run_disdca_tcp(const SolverConfig& cfg, const Dataset& ds,
                            const Partition& p, int worker_id,
                            TcpChannel& channel, const RunHooks& hooks) {
  const std::vector<double> x_norm_sq = example_norms(ds);
  check_preconditions(cfg, ds, p, x_norm_sq);
  if (hooks.inner_records)
    throw ConfigError("per-step diagnostics are unavailable in TCP mode");
  if (worker_id < 0 || worker_id >= cfg.K)
    throw ConfigError("worker id out of range");

  WorkerRuntime worker(ds, cfg, p.shards[worker_id], x_norm_sq, worker_id);
  const ReduceOp op = cfg.reduce_op();

  SolverResult result;
  std::vector<double> w(ds.dim, 0.0);
  result.trace.push_back(round_record(0, ds, cfg, w, 0.0, hooks.reference));

  for (int t = 1; t <= cfg.T; ++t) {
    worker.begin_round(w);
    for (int j = 0; j < cfg.m; ++j) worker.inner_step(j);
    worker.recompute_w_local();
    const std::vector<double> reduced = channel.reduce(
        make_payload(worker), op, static_cast<std::uint32_t>(t - 1));
    w.assign(reduced.begin(), reduced.end() - 1);
    result.trace.push_back(round_record(
        t, ds, cfg, w, payload_conj_total(reduced, op, cfg.K), hooks.reference));
  }
  channel.done();

  result.w = std::move(w);
  result.alpha.assign(ds.count(), 0.0);
  for (std::size_t i = 0; i < worker.shard().size(); ++i)
    result.alpha[worker.shard()[i]] = worker.alpha()[i];
  result.rounds_run = cfg.T;
  return result;
}

SolverResult run_one_communication(const SolverConfig& cfg, const Dataset& ds,
                                   const Partition& p, const RunHooks& hooks) {
  if (hooks.inner_records)
    throw ConfigError("per-step diagnostics are not defined for "
                      "one-communication runs");
  const std::vector<double> x_norm_sq = example_norms(ds);
  {
    SolverConfig checked = cfg;
    checked.variant = Variant::practical;  // skip the orthogonality gate here
    check_preconditions(checked, ds, p, x_norm_sq);
  }
  const double n = static_cast<double>(ds.count());
  const bool block = p.scheme == PartitionScheme::block;
  // block partitions run the scale=1 updates and sum the models; random
  // partitions run the scale=K updates and average
  const double scale = block ? 1.0 : static_cast<double>(cfg.K);
  const ReduceOp op = block ? ReduceOp::sum : ReduceOp::average;
  const double u_coef = scale / (cfg.lambda * n);

  SolverResult result;
  result.locally_converged = true;
  result.rounds_run = 0;
  std::vector<std::vector<double>> models(p.K);
  result.alpha.assign(ds.count(), 0.0);

  for (int k = 0; k < p.K; ++k) {
    const std::vector<std::uint32_t>& shard = p.shards[k];
    const std::size_t nk = shard.size();
    std::vector<double> alpha(nk, 0.0);
    std::vector<double> u(ds.dim, 0.0);
    std::vector<double> wk(ds.dim, 0.0);
    Rng rng(cfg.seed + static_cast<std::uint64_t>(k));
    std::int64_t epochs = 0;
    bool converged = false;

    while (!converged && epochs < cfg.one_comm_max_epochs) {
      for (std::size_t step = 0; step < nk; ++step) {
        const std::uint32_t li = static_cast<std::uint32_t>(rng.below(nk));
        const std::uint32_t gi = shard[li];
        IncrementProblem prob;
        prob.alpha = alpha[li];
        prob.margin = ds.x[gi].dot(u);
        prob.x_norm_sq = x_norm_sq[gi];
        prob.scale = scale;
        prob.lambda = cfg.lambda;
        prob.n = static_cast<std::int64_t>(ds.count());
        prob.y = ds.y[gi];
        prob.clip_to_conjugate_domain = cfg.clip_squared_hinge;
        const double delta = dual_increment(cfg.loss, prob);
        alpha[li] += delta;
        if (delta != 0.0) ds.x[gi].axpy(u_coef * delta, u);
      }
      ++epochs;

      std::fill(wk.begin(), wk.end(), 0.0);
      for (std::size_t i = 0; i < nk; ++i)
        ds.x[shard[i]].axpy(u_coef * alpha[i], wk);
      u = wk;
      if (!all_finite(wk))
        throw NumericalError("non-finite local model on worker " +
                             std::to_string(k));

      // shard sub-problem with global-n scaling: the K pieces sum to the
      // full dual exactly when the shards are orthogonal
      double conj = 0, loss_sum = 0;
      for (std::size_t i = 0; i < nk; ++i) {
        conj += -conjugate_neg(cfg.loss, alpha[i], ds.y[shard[i]]);
        loss_sum += loss_value(cfg.loss, ds.x[shard[i]].dot(wk), ds.y[shard[i]]);
      }
      const double reg_term = 0.5 * cfg.lambda / scale * dense_norm_sq(wk);
      const double local_dual = conj / n - reg_term;
      const double local_primal = loss_sum / n + reg_term;
      converged = local_primal - local_dual <= cfg.local_gap_tol;
    }

    if (!converged) result.locally_converged = false;
    result.rounds_run = std::max(result.rounds_run, static_cast<int>(epochs));
    models[k] = wk;
    for (std::size_t i = 0; i < nk; ++i) result.alpha[shard[i]] = alpha[i];
  }

  result.w = reduce_in_order(models, op);

  TraceRecord rec;
  rec.t = 1;
  rec.j = -1;
  rec.dual_obj =
      dual_objective(ds, result.alpha, cfg.loss, Regularizer{cfg.lambda});
  rec.primal_obj =
      primal_objective(ds, result.w, cfg.loss, Regularizer{cfg.lambda});
  rec.gap = rec.primal_obj - rec.dual_obj;
  if (hooks.reference) {
    rec.epsilon = hooks.reference->dual_obj - rec.dual_obj;
    rec.dist_to_opt = dense_dist(result.w, hooks.reference->w);
  }
  result.trace.push_back(rec);
  return result;
}

Reference run_sdca_reference(const Dataset& ds, double lambda,
                             const LossModel& loss, double gap_tol,
                             std::uint64_t seed, std::int64_t max_epochs) {
  const std::size_t n = ds.count();
  const double dn = static_cast<double>(n);
  const std::vector<double> x_norm_sq = example_norms(ds);
  for (double nsq : x_norm_sq)
    if (nsq > 1.0 + 1e-8)
      throw ConfigError("dataset not normalized to the unit ball");

  std::vector<double> alpha(n, 0.0);
  std::vector<double> u(ds.dim, 0.0);
  std::vector<double> w(ds.dim, 0.0);
  Rng rng(seed);
  const Regularizer reg{lambda};

  for (std::int64_t epoch = 0; epoch < max_epochs; ++epoch) {
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t i = static_cast<std::size_t>(rng.below(n));
      IncrementProblem p;
      p.alpha = alpha[i];
      p.margin = ds.x[i].dot(u);
      p.x_norm_sq = x_norm_sq[i];
      p.scale = 1.0;
      p.lambda = lambda;
      p.n = static_cast<std::int64_t>(n);
      p.y = ds.y[i];
      p.clip_to_conjugate_domain = true;
      const double delta = dual_increment(loss, p);
      alpha[i] += delta;
      if (delta != 0.0) ds.x[i].axpy(delta / (lambda * dn), u);
    }
    // resync u to the exact primal image of alpha once per epoch
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      ds.x[i].axpy(alpha[i] / (lambda * dn), w);
    u = w;
    if (!all_finite(w)) throw NumericalError("reference run diverged");

    const double dual = dual_objective(ds, alpha, loss, reg);
    const double primal = primal_objective(ds, w, loss, reg);
    if (primal - dual <= gap_tol) {
      Reference ref;
      ref.w = std::move(w);
      ref.alpha = std::move(alpha);
      ref.dual_obj = dual;
      ref.gap_tol = gap_tol;
      return ref;
    }
  }
  throw NumericalError("reference not converged to gap " +
                       format_double(gap_tol) + " within " +
                       std::to_string(max_epochs) + " epochs");
}

}  // namespace disdca
