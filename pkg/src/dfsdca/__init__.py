"""Parallel dual coordinate ascent with importance sampling over buckets.

The solver trains L2-regularized linear models (logistic or square loss)
by dual-free SDCA steps over mini-batches. Sampling plans assign each
example a probability inside its bucket; matching update coefficients come
from closed forms certified by enumeration oracles, and the stepsize they
induce governs both the theory and the measured pass counts.
"""

from .data import (
    Dataset,
    ParseError,
    SparseColumnMatrix,
    build_matrix,
    generate_synthetic,
    parse_libsvm,
    to_libsvm,
)
from .eso import (
    AlternatingResult,
    EsoBundle,
    SpeedupReport,
    alternating_optimization_plan,
    bucket_bundle,
    lambda_rule,
    practical_importance_plan,
    serial_importance_bundle,
    serial_importance_probs,
    serial_uniform_bundle,
    speedup_report,
    tau_nice_bundle,
    theta,
    uniform_bucket_bundle,
    v_bucket,
    v_bucket_conservative,
    v_serial,
    v_tau_nice,
    v_uniform_bucket,
)
from .estimator import DfSdcaClassifier
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    dataset_summary,
    load_dataset,
    run_experiment,
    verify_mode,
)
from .losses import LossModel, make_loss
from .oracle import (
    check_eso,
    check_lemma1,
    check_lemma2_lemma3,
    enumerate_bucket_sampling,
    enumerate_tau_nice,
    exact_eso_lhs,
    lambda_prime,
    reconstruct_v,
)
from .sampling import (
    BucketPlan,
    Partition,
    SamplingSpec,
    bucket_plan,
    bucket_sampling,
    make_partition,
    serial_importance_sampling,
    serial_uniform_sampling,
    tau_nice_sampling,
    uniform_bucket_plan,
)
from .solver import (
    DivergenceError,
    ReferenceSolution,
    SolverState,
    Trace,
    dfsdca_step,
    initial_state,
    objective,
    reference_solution,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "AlternatingResult",
    "BucketPlan",
    "Dataset",
    "DfSdcaClassifier",
    "DivergenceError",
    "EsoBundle",
    "ExperimentConfig",
    "ExperimentResult",
    "LossModel",
    "ParseError",
    "Partition",
    "ReferenceSolution",
    "SamplingSpec",
    "SolverState",
    "SparseColumnMatrix",
    "SpeedupReport",
    "Trace",
    "alternating_optimization_plan",
    "bucket_bundle",
    "bucket_plan",
    "bucket_sampling",
    "build_matrix",
    "check_eso",
    "check_lemma1",
    "check_lemma2_lemma3",
    "dataset_summary",
    "dfsdca_step",
    "enumerate_bucket_sampling",
    "enumerate_tau_nice",
    "exact_eso_lhs",
    "generate_synthetic",
    "initial_state",
    "lambda_prime",
    "lambda_rule",
    "load_dataset",
    "make_loss",
    "make_partition",
    "objective",
    "parse_libsvm",
    "practical_importance_plan",
    "reconstruct_v",
    "reference_solution",
    "run_experiment",
    "serial_importance_bundle",
    "serial_importance_probs",
    "serial_uniform_bundle",
    "serial_uniform_sampling",
    "solve",
    "speedup_report",
    "tau_nice_bundle",
    "tau_nice_sampling",
    "theta",
    "to_libsvm",
    "uniform_bucket_bundle",
    "uniform_bucket_plan",
    "v_bucket",
    "v_bucket_conservative",
    "v_serial",
    "v_tau_nice",
    "v_uniform_bucket",
    "verify_mode",
]
