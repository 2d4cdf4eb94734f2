// Python bindings for the main operations: data generation and IO, the
// solver variants, the reference run, and the diagnostics evaluators.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "disdca/config.hpp"
#include "disdca/solver.hpp"

namespace py = pybind11;
using namespace disdca;

namespace {

SolverResult py_run_disdca(const SolverConfig& cfg, const Dataset& ds,
                           const Partition& p, const Reference* reference,
                           bool inner_records) {
  RunHooks hooks;
  hooks.reference = reference;
  hooks.inner_records = inner_records;
  return run_disdca(cfg, ds, p, hooks);
}

SolverResult py_run_one_communication(const SolverConfig& cfg,
                                      const Dataset& ds, const Partition& p,
                                      const Reference* reference) {
  RunHooks hooks;
  hooks.reference = reference;
  return run_one_communication(cfg, ds, p, hooks);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "distributed stochastic dual coordinate ascent solvers and "
            "diagnostics";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<IoError>(m, "IoError");
  py::register_exception<TransportError>(m, "TransportError");
  py::register_exception<NumericalError>(m, "NumericalError");

  py::enum_<LossKind>(m, "LossKind")
      .value("squared_hinge", LossKind::squared_hinge)
      .value("logistic", LossKind::logistic)
      .value("least_squares", LossKind::least_squares);

  py::enum_<Variant>(m, "Variant")
      .value("naive", Variant::naive)
      .value("practical", Variant::practical)
      .value("orthogonal", Variant::orthogonal);

  py::enum_<PartitionScheme>(m, "PartitionScheme")
      .value("block", PartitionScheme::block)
      .value("random", PartitionScheme::random);

  py::enum_<Sampling>(m, "Sampling")
      .value("with_replacement", Sampling::with_replacement)
      .value("without_replacement_per_round",
             Sampling::without_replacement_per_round);

  py::enum_<ExecMode>(m, "ExecMode")
      .value("lockstep", ExecMode::lockstep)
      .value("threads", ExecMode::threads);

  py::class_<LossModel>(m, "LossModel")
      .def(py::init([](LossKind kind) { return make_loss(kind); }),
           py::arg("kind"))
      .def_readwrite("kind", &LossModel::kind)
      .def_readwrite("smoothness", &LossModel::smoothness);

  py::class_<SparseVector>(m, "SparseVector")
      .def_readonly("idx", &SparseVector::idx)
      .def_readonly("val", &SparseVector::val)
      .def("norm_sq", &SparseVector::norm_sq);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("dim", &Dataset::dim)
      .def_readonly("y", &Dataset::y)
      .def_readonly("x", &Dataset::x)
      .def("count", &Dataset::count)
      .def("__len__", &Dataset::count);

  py::class_<Partition>(m, "Partition")
      .def_readonly("K", &Partition::K)
      .def_readonly("scheme", &Partition::scheme)
      .def_readonly("shards", &Partition::shards)
      .def_readonly("owner", &Partition::owner);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("variant", &SolverConfig::variant)
      .def_readwrite("K", &SolverConfig::K)
      .def_readwrite("m", &SolverConfig::m)
      .def_readwrite("T", &SolverConfig::T)
      .def_readwrite("lambda_", &SolverConfig::lambda)
      .def_readwrite("loss", &SolverConfig::loss)
      .def_readwrite("seed", &SolverConfig::seed)
      .def_readwrite("sampling", &SolverConfig::sampling)
      .def_readwrite("exec", &SolverConfig::exec)
      .def_readwrite("orth_tol", &SolverConfig::orth_tol)
      .def_readwrite("clip_squared_hinge", &SolverConfig::clip_squared_hinge)
      .def_readwrite("local_gap_tol", &SolverConfig::local_gap_tol)
      .def_readwrite("one_comm_max_epochs", &SolverConfig::one_comm_max_epochs)
      .def("scale", &SolverConfig::scale);

  py::class_<TraceRecord>(m, "TraceRecord")
      .def_readonly("t", &TraceRecord::t)
      .def_readonly("j", &TraceRecord::j)
      .def_readonly("dual_obj", &TraceRecord::dual_obj)
      .def_readonly("primal_obj", &TraceRecord::primal_obj)
      .def_readonly("gap", &TraceRecord::gap)
      .def_readonly("epsilon", &TraceRecord::epsilon)
      .def_readonly("R", &TraceRecord::R)
      .def_readonly("S", &TraceRecord::S)
      .def_readonly("dist_to_opt", &TraceRecord::dist_to_opt);

  py::class_<Reference>(m, "Reference")
      .def_readonly("w", &Reference::w)
      .def_readonly("alpha", &Reference::alpha)
      .def_readonly("dual_obj", &Reference::dual_obj)
      .def_readonly("gap_tol", &Reference::gap_tol);

  py::class_<SolverResult>(m, "SolverResult")
      .def_readonly("w", &SolverResult::w)
      .def_readonly("alpha", &SolverResult::alpha)
      .def_readonly("trace", &SolverResult::trace)
      .def_readonly("rounds_run", &SolverResult::rounds_run)
      .def_readonly("locally_converged", &SolverResult::locally_converged);

  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("groups", &SyntheticSpec::groups)
      .def_readwrite("group_dim", &SyntheticSpec::group_dim)
      .def_readwrite("points_per_group", &SyntheticSpec::points_per_group)
      .def_readwrite("seed", &SyntheticSpec::seed)
      .def_readwrite("u_value", &SyntheticSpec::u_value);

  m.def("generate_synthetic", &generate_synthetic, py::arg("spec"));
  m.def("load_libsvm", &load_libsvm, py::arg("path"));
  m.def("save_libsvm", &save_libsvm, py::arg("dataset"), py::arg("path"));
  m.def("normalize_unit_ball", &normalize_unit_ball, py::arg("dataset"));
  m.def("sign_labels",
        [](Dataset ds) {
          sign_labels_inplace(ds);
          return ds;
        },
        py::arg("dataset"));
  m.def("make_partition", &make_partition, py::arg("dataset"), py::arg("K"),
        py::arg("scheme"), py::arg("seed"));
  m.def("orthogonality_residual", &orthogonality_residual, py::arg("dataset"),
        py::arg("partition"), py::arg("max_pairs") = 1000000);

  m.def("run_disdca", &py_run_disdca, py::arg("config"), py::arg("dataset"),
        py::arg("partition"), py::arg("reference") = nullptr,
        py::arg("inner_records") = false,
        py::call_guard<py::gil_scoped_release>());
  m.def("run_one_communication", &py_run_one_communication, py::arg("config"),
        py::arg("dataset"), py::arg("partition"),
        py::arg("reference") = nullptr,
        py::call_guard<py::gil_scoped_release>());
  m.def("run_sdca_reference", &run_sdca_reference, py::arg("dataset"),
        py::arg("lambda_"), py::arg("loss"), py::arg("gap_tol") = 1e-10,
        py::arg("seed") = 12345, py::arg("max_epochs") = 1000000,
        py::call_guard<py::gil_scoped_release>());

  m.def("loss_value", &loss_value, py::arg("loss"), py::arg("z"), py::arg("y"));
  m.def("loss_grad", &loss_grad, py::arg("loss"), py::arg("z"), py::arg("y"));
  m.def("conjugate_neg", &conjugate_neg, py::arg("loss"), py::arg("a"),
        py::arg("y"));
  m.def("dual_increment",
        [](const LossModel& loss, double alpha, double margin,
           double x_norm_sq, double scale, double lambda, std::int64_t n,
           double y, bool clip) {
          IncrementProblem p{alpha, margin, x_norm_sq, scale, lambda, n, y,
                             clip};
          return dual_increment(loss, p);
        },
        py::arg("loss"), py::arg("alpha"), py::arg("margin"),
        py::arg("x_norm_sq"), py::arg("scale"), py::arg("lambda_"),
        py::arg("n"), py::arg("y"), py::arg("clip") = false);
  m.def("primal_from_dual",
        [](double lambda, const std::vector<double>& v) {
          return primal_from_dual(Regularizer{lambda}, v);
        },
        py::arg("lambda_"), py::arg("v"));

  m.def("primal_objective",
        [](const Dataset& ds, const std::vector<double>& w,
           const LossModel& loss, double lambda) {
          return primal_objective(ds, w, loss, Regularizer{lambda});
        },
        py::arg("dataset"), py::arg("w"), py::arg("loss"), py::arg("lambda_"));
  m.def("dual_objective",
        [](const Dataset& ds, const std::vector<double>& alpha,
           const LossModel& loss, double lambda) {
          return dual_objective(ds, alpha, loss, Regularizer{lambda});
        },
        py::arg("dataset"), py::arg("alpha"), py::arg("loss"),
        py::arg("lambda_"));
  m.def("theorem_bound",
        [](Variant variant, double L, double lambda, std::int64_t n, int mm,
           int K, double epsilon0, int t) {
          BoundParams params{L, lambda, n, mm, K, epsilon0, variant};
          const BoundValue b = theorem_bound(params, t);
          return py::make_tuple(b.dual_bound, b.gap_bound);
        },
        py::arg("variant"), py::arg("L"), py::arg("lambda_"), py::arg("n"),
        py::arg("m"), py::arg("K"), py::arg("epsilon0"), py::arg("t"));
  m.def("accumulate_S",
        [](const std::vector<double>& r, double mu) {
          return accumulate_S(r, mu);
        },
        py::arg("r"), py::arg("mu"));
  m.def("epsilon_fit",
        [](const std::vector<TraceRecord>& trace) {
          const EpsilonFit fit = epsilon_fit(trace);
          py::dict out;
          out["rounds"] = fit.rounds;
          out["decay_ratio"] = fit.decay_ratio;
          out["s_rounds"] = fit.s_rounds;
          out["s_over_eps"] = fit.s_over_eps;
          return out;
        },
        py::arg("trace"));
}
