#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "disdca/comm.hpp"
#include "disdca/data.hpp"
#include "disdca/diagnostics.hpp"
#include "disdca/loss.hpp"

namespace disdca {

enum class Sampling { with_replacement, without_replacement_per_round };
enum class ExecMode { lockstep, threads };

struct SolverConfig {
  Variant variant = Variant::practical;
  int K = 1;
  int m = 1;
  int T = 1;
  double lambda = 1e-3;
  LossModel loss = LossModel{LossKind::squared_hinge, 2.0};
  std::uint64_t seed = 0;
  Sampling sampling = Sampling::with_replacement;
  ExecMode exec = ExecMode::lockstep;
  // orthogonal-variant gate: cross-shard residual must sit below this
  double orth_tol = 1e-12;
  // keep squared-hinge duals inside the true conjugate domain (alpha y >= 0);
  // the measured gap certifies suboptimality only there
  bool clip_squared_hinge = true;
  // one-communication stopping
  double local_gap_tol = 1e-6;
  std::int64_t one_comm_max_epochs = 100000;

  // quadratic-term coefficient: mK (naive), K (practical), 1 (orthogonal)
  double scale() const {
    switch (variant) {
      case Variant::naive:
        return static_cast<double>(m) * K;
      case Variant::practical:
        return K;
      case Variant::orthogonal:
        return 1.0;
    }
    return 1.0;
  }

  // w_k = w_scale/(lambda n) sum_i alpha_i x_i
  double w_scale() const {
    return variant == Variant::orthogonal ? 1.0 : static_cast<double>(K);
  }

  ReduceOp reduce_op() const {
    return variant == Variant::orthogonal ? ReduceOp::sum : ReduceOp::average;
  }
};

const char* variant_name(Variant v);
Variant variant_from_name(std::string_view name);
const char* sampling_name(Sampling s);
Sampling sampling_from_name(std::string_view name);

struct SolverResult {
  std::vector<double> w;
  std::vector<double> alpha;  // over all n examples
  std::vector<TraceRecord> trace;
  int rounds_run = 0;
  bool locally_converged = true;  // one-communication only
};

struct RunHooks {
  const Reference* reference = nullptr;
  // per-inner-step records with R and S; requires the lockstep driver, which
  // is the only mode where the virtual global primal w^{t,j} exists
  bool inner_records = false;
  // called after each reduce with the reduced model and the full dual vector
  // (lockstep driver only)
  std::function<void(int t, std::span<const double> w,
                     std::span<const double> alpha)>
      on_round;
};

// Simulated run: all K workers driven in this process. ExecMode::lockstep
// interleaves workers step by step on one thread; ExecMode::threads runs one
// thread per worker with a collective reduce and produces identical results.
SolverResult run_disdca(const SolverConfig& cfg, const Dataset& ds,
                        const Partition& p, const RunHooks& hooks = {});

// One worker of a TCP run; the reduce goes through the coordinator. Trace
// records are computed locally from the reduced state and match the
// simulated run exactly. result.alpha is filled on this worker's shard only.
SolverResult run_disdca_tcp(const SolverConfig& cfg, const Dataset& ds,
                            const Partition& p, int worker_id,
                            TcpChannel& channel, const RunHooks& hooks = {});

// Every worker solves its shard sub-problem to local_gap_tol (block
// partitions use the scale=1 updates, random partitions the scale=K ones),
// then a single reduce (sum for block, average for random) forms the final
// model. locally_converged reports whether every worker met the tolerance
// before the epoch cap.
SolverResult run_one_communication(const SolverConfig& cfg, const Dataset& ds,
                                   const Partition& p,
                                   const RunHooks& hooks = {});

// High-accuracy single-machine SDCA (K=1 practical run) used as the
// reference optimum for epsilon and distance diagnostics.
Reference run_sdca_reference(const Dataset& ds, double lambda,
                             const LossModel& loss, double gap_tol = 1e-10,
                             std::uint64_t seed = 12345,
                             std::int64_t max_epochs = 1000000);

}  // namespace disdca
