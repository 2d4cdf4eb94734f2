"""Distributed stochastic dual coordinate ascent: solvers, synthetic data,
and convergence diagnostics. The heavy lifting lives in the compiled
extension; this package just re-exports it."""

from disdca._core import (  # noqa: F401
    ConfigError,
    Dataset,
    ExecMode,
    IoError,
    LossKind,
    LossModel,
    NumericalError,
    Partition,
    PartitionScheme,
    Reference,
    Sampling,
    SolverConfig,
    SolverResult,
    SparseVector,
    SyntheticSpec,
    TraceRecord,
    TransportError,
    Variant,
    accumulate_S,
    conjugate_neg,
    dual_increment,
    dual_objective,
    epsilon_fit,
    generate_synthetic,
    load_libsvm,
    loss_grad,
    loss_value,
    make_partition,
    normalize_unit_ball,
    orthogonality_residual,
    primal_from_dual,
    primal_objective,
    run_disdca,
    run_one_communication,
    run_sdca_reference,
    save_libsvm,
    sign_labels,
    theorem_bound,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
