// Experiment driver: solve / one-comm / check-bounds / synth / diagnose plus
// the coordinator and worker daemons for TCP runs. All outputs are CSV with
// the resolved config embedded as comment lines.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "disdca/config.hpp"
#include "disdca/diagnostics.hpp"
#include "disdca/solver.hpp"

namespace {

using namespace disdca;

constexpr int kExitBoundViolation = 6;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("-c,--config", args->config_path, "config file (key=value)");
  cmd->add_option("-s,--set", args->overrides, "override, key=value")
      ->take_all();
  cmd->add_option("-o,--output", args->output, "output CSV path");
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg = args.config_path.empty()
                             ? ExperimentConfig()
                             : ExperimentConfig::from_file(args.config_path);
  for (const std::string& pair : args.overrides) cfg.set_pair(pair);
  if (!args.output.empty()) cfg.set("output.path", args.output);
  return cfg;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

// trace_m100.csv style suffix when sweeping several m values
std::string suffixed_path(const std::string& path, int m, bool multiple) {
  if (!multiple) return path;
  const auto dot = path.rfind('.');
  const std::string tag = "_m" + std::to_string(m);
  if (dot == std::string::npos || path.find('/', dot) != std::string::npos)
    return path + tag;
  return path.substr(0, dot) + tag + path.substr(dot);
}

std::optional<Reference> maybe_reference(const ExperimentConfig& cfg,
                                         const Dataset& ds, bool force) {
  if (!force && !cfg.get_bool("diagnostics.reference")) return std::nullopt;
  const SolverConfig sc = cfg.solver();
  return run_sdca_reference(ds, sc.lambda, sc.loss,
                            cfg.get_double("diagnostics.reference_tol"),
                            sc.seed);
}

int cmd_solve(const CommonArgs& args, bool diagnose) {
  ExperimentConfig cfg = load_config(args);
  if (cfg.comm_mode() == CommMode::tcp)
    throw ConfigError("comm.mode=tcp runs use the coordinator/worker subcommands");
  const Dataset ds = cfg.build_dataset();
  const Partition part = cfg.build_partition(ds);

  const std::optional<Reference> ref = maybe_reference(cfg, ds, diagnose);
  RunHooks hooks;
  if (ref) hooks.reference = &*ref;
  hooks.inner_records = diagnose || cfg.get_bool("diagnostics.enabled");

  const std::vector<int> ms = cfg.m_list();
  for (int m : ms) {
    SolverConfig sc = cfg.solver();
    sc.m = m;
    const SolverResult result = run_disdca(sc, ds, part, hooks);

    ExperimentConfig resolved = cfg;
    resolved.set("m", std::to_string(m));
    const std::string path = suffixed_path(cfg.output_path(), m, ms.size() > 1);
    std::ofstream out = open_output(path);
    write_trace_csv(out, result.trace, resolved.resolved());

    const TraceRecord& last = result.trace.back();
    std::cout << "m=" << m << " rounds=" << result.rounds_run
              << " dual=" << format_double(last.dual_obj)
              << " gap=" << format_double(last.gap);
    if (last.epsilon) std::cout << " epsilon=" << format_double(*last.epsilon);
    std::cout << " -> " << path << "\n";

    if (diagnose) {
      const EpsilonFit fit = epsilon_fit(result.trace);
      std::printf("%6s %14s %14s\n", "t", "eps_ratio", "S/eps");
      for (std::size_t i = 0; i < fit.rounds.size(); ++i) {
        std::printf("%6d %14.6g", fit.rounds[i], fit.decay_ratio[i]);
        const auto it = std::find(fit.s_rounds.begin(), fit.s_rounds.end(),
                                  fit.rounds[i]);
        if (it != fit.s_rounds.end())
          std::printf(" %14.6g",
                      fit.s_over_eps[it - fit.s_rounds.begin()]);
        std::printf("\n");
      }
    }
  }
  return 0;
}

int cmd_one_comm(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args);
  const Dataset ds = cfg.build_dataset();
  const Reference ref = *maybe_reference(cfg, ds, /*force=*/true);

  std::ofstream out = open_output(cfg.output_path());
  for (const auto& [key, value] : cfg.resolved())
    out << "# " << key << '=' << value << '\n';
  out << "K,scheme,dist_to_opt,gap\n";

  RunHooks hooks;
  hooks.reference = &ref;
  for (int K : cfg.one_comm_K()) {
    for (PartitionScheme scheme : cfg.one_comm_schemes()) {
      const Partition part = make_partition(
          ds, K, scheme,
          static_cast<std::uint64_t>(cfg.get_int("partition.seed")));
      SolverConfig sc = cfg.solver();
      sc.K = K;
      const SolverResult result = run_one_communication(sc, ds, part, hooks);
      if (!result.locally_converged)
        std::cerr << "warning: K=" << K << " scheme=" << scheme_name(scheme)
                  << " hit the epoch cap before reaching local_gap_tol\n";
      const TraceRecord& rec = result.trace.back();
      out << K << ',' << scheme_name(scheme) << ','
          << format_double(*rec.dist_to_opt) << ',' << format_double(rec.gap)
          << '\n';
      std::cout << "K=" << K << " scheme=" << scheme_name(scheme)
                << " dist=" << format_double(*rec.dist_to_opt)
                << " gap=" << format_double(rec.gap) << "\n";
    }
  }
  return 0;
}

int cmd_check_bounds(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args);
  const SolverConfig sc = cfg.solver();
  if (sc.variant == Variant::practical)
    throw ConfigError("check-bounds needs variant naive or orthogonal "
                      "(no closed-form bound for practical)");
  const Dataset ds = cfg.build_dataset();
  const Partition part = cfg.build_partition(ds);
  const Reference ref = *maybe_reference(cfg, ds, /*force=*/true);

  const std::vector<double> zeros(ds.count(), 0.0);
  BoundParams params;
  params.L = sc.loss.smoothness;
  params.lambda = sc.lambda;
  params.n = static_cast<std::int64_t>(ds.count());
  params.m = sc.m;
  params.K = sc.K;
  params.variant = sc.variant;
  params.epsilon0 =
      ref.dual_obj - dual_objective(ds, zeros, sc.loss, Regularizer{sc.lambda});

  RunHooks hooks;
  hooks.reference = &ref;
  const SolverResult result = run_disdca(sc, ds, part, hooks);

  const double slack = 1e-9 + ref.gap_tol;
  bool ok = true;
  std::ofstream out = open_output(cfg.output_path());
  for (const auto& [key, value] : cfg.resolved())
    out << "# " << key << '=' << value << '\n';
  out << "t,epsilon,dual_bound,gap,gap_bound\n";
  for (const TraceRecord& rec : result.trace) {
    if (rec.j != -1) continue;
    const BoundValue bound = theorem_bound(params, rec.t);
    out << rec.t << ',' << format_double(*rec.epsilon) << ','
        << format_double(bound.dual_bound) << ',' << format_double(rec.gap)
        << ',' << format_double(bound.gap_bound) << '\n';
    if (*rec.epsilon > bound.dual_bound + slack) ok = false;
  }
  std::cout << (ok ? "bounds hold" : "BOUND VIOLATION") << " for variant "
            << variant_name(sc.variant) << " over " << sc.T << " rounds -> "
            << cfg.output_path() << "\n";
  return ok ? 0 : kExitBoundViolation;
}

int cmd_synth(int groups, int group_dim, int points, std::uint64_t seed,
              const std::string& labels, double u_value,
              const std::string& out_path) {
  SyntheticSpec spec;
  spec.groups = groups;
  spec.group_dim = group_dim;
  spec.points_per_group = points;
  spec.seed = seed;
  spec.u_value = u_value;
  Dataset ds = generate_synthetic(spec);
  if (labels == "sign")
    sign_labels_inplace(ds);
  else if (labels != "raw")
    throw ConfigError("--labels must be raw or sign");
  save_libsvm(ds, out_path);
  std::cout << "wrote " << ds.count() << " examples, dim " << ds.dim << " to "
            << out_path << "\n";
  return 0;
}

int cmd_coordinator(const CommonArgs& args, const std::string& listen,
                    int workers, std::int64_t dim, const std::string& op,
                    double timeout_s) {
  CoordinatorOptions opts;
  if (!args.config_path.empty() || !args.overrides.empty()) {
    const ExperimentConfig cfg = load_config(args);
    const auto [host, port] = cfg.listen_endpoint();
    opts.host = host;
    opts.port = port;
    opts.workers = static_cast<int>(cfg.get_int("K"));
    opts.dim = cfg.data_dim() + 1;  // model plus the bookkeeping slot
    opts.op = cfg.solver().reduce_op();
    opts.timeout_s = cfg.get_double("comm.timeout_s");
  }
  if (!listen.empty()) {
    const auto [host, port] = parse_endpoint(listen);
    opts.host = host;
    opts.port = port;
  }
  if (workers > 0) opts.workers = workers;
  if (dim > 0) opts.dim = static_cast<std::uint32_t>(dim);
  if (!op.empty()) opts.op = reduce_op_from_name(op);
  if (timeout_s > 0) opts.timeout_s = timeout_s;

  CoordinatorServer server(opts);
  std::cout << "listening " << opts.host << ":" << server.port() << std::endl;
  server.serve();
  std::cout << "all workers done\n";
  return 0;
}

int cmd_worker(const CommonArgs& args, const std::string& connect,
               std::int64_t worker_id) {
  ExperimentConfig cfg = load_config(args);
  if (!connect.empty()) cfg.set("comm.connect", connect);
  if (worker_id >= 0) cfg.set("comm.worker_id", std::to_string(worker_id));

  const Dataset ds = cfg.build_dataset();
  const Partition part = cfg.build_partition(ds);
  const std::optional<Reference> ref = maybe_reference(cfg, ds, false);
  RunHooks hooks;
  if (ref) hooks.reference = &*ref;

  const auto [host, port] = cfg.connect_endpoint();
  TcpOptions topts;
  topts.host = host;
  topts.port = port;
  topts.timeout_s = cfg.get_double("comm.timeout_s");
  const int id = static_cast<int>(cfg.get_int("comm.worker_id"));
  TcpChannel channel(topts, static_cast<std::uint32_t>(id), ds.dim + 1);

  const SolverResult result =
      run_disdca_tcp(cfg.solver(), ds, part, id, channel, hooks);
  std::ofstream out = open_output(cfg.output_path());
  write_trace_csv(out, result.trace, cfg.resolved());
  const TraceRecord& last = result.trace.back();
  std::cout << "worker " << id << " done, gap=" << format_double(last.gap)
            << " -> " << cfg.output_path() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed stochastic dual coordinate ascent experiments"};
  app.require_subcommand(1);

  CommonArgs solve_args, diag_args, onecomm_args, bounds_args, coord_args,
      worker_args;

  CLI::App* solve = app.add_subcommand("solve", "run DisDCA and write a trace");
  add_common(solve, &solve_args);

  CLI::App* diagnose = app.add_subcommand(
      "diagnose", "solve with per-step diagnostics (R, S, epsilon ratios)");
  add_common(diagnose, &diag_args);

  CLI::App* onecomm = app.add_subcommand(
      "one-comm", "one-communication runs over a list of K and schemes");
  add_common(onecomm, &onecomm_args);

  CLI::App* bounds = app.add_subcommand(
      "check-bounds", "compare measured suboptimality against the rate bound");
  add_common(bounds, &bounds_args);

  int synth_groups = 50, synth_group_dim = 5, synth_points = 5000;
  std::uint64_t synth_seed = 1;
  std::string synth_labels = "raw", synth_out = "synthetic.libsvm";
  double synth_u = 1.0;
  CLI::App* synth =
      app.add_subcommand("synth", "generate the synthetic regression dataset");
  synth->add_option("--groups", synth_groups, "feature groups");
  synth->add_option("--group-dim", synth_group_dim, "features per group");
  synth->add_option("--points-per-group", synth_points, "examples per group");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--labels", synth_labels, "raw or sign");
  synth->add_option("--u-value", synth_u, "response vector constant");
  synth->add_option("--out", synth_out, "output libsvm path");

  std::string coord_listen;
  int coord_workers = 0;
  std::int64_t coord_dim = 0;
  std::string coord_op;
  double coord_timeout = 0;
  CLI::App* coordinator =
      app.add_subcommand("coordinator", "serve the allreduce for TCP workers");
  add_common(coordinator, &coord_args);
  coordinator->add_option("--listen", coord_listen, "host:port (port 0 = pick)");
  coordinator->add_option("--workers", coord_workers, "number of workers K");
  coordinator->add_option("--dim", coord_dim,
                          "wire vector length (data dim + 1)");
  coordinator->add_option("--op", coord_op, "average or sum");
  coordinator->add_option("--timeout-s", coord_timeout, "inactivity timeout");

  std::string worker_connect;
  std::int64_t worker_id = -1;
  CLI::App* worker =
      app.add_subcommand("worker", "run one DisDCA worker against a coordinator");
  add_common(worker, &worker_args);
  worker->add_option("--connect", worker_connect, "coordinator host:port");
  worker->add_option("--worker-id", worker_id, "this worker's id in 0..K-1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (solve->parsed()) return cmd_solve(solve_args, false);
    if (diagnose->parsed()) return cmd_solve(diag_args, true);
    if (onecomm->parsed()) return cmd_one_comm(onecomm_args);
    if (bounds->parsed()) return cmd_check_bounds(bounds_args);
    if (synth->parsed())
      return cmd_synth(synth_groups, synth_group_dim, synth_points, synth_seed,
                       synth_labels, synth_u, synth_out);
    if (coordinator->parsed())
      return cmd_coordinator(coord_args, coord_listen, coord_workers, coord_dim,
                             coord_op, coord_timeout);
    if (worker->parsed()) return cmd_worker(worker_args, worker_connect, worker_id);
  } catch (const disdca::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  }
  return 0;
}
