"""Aggregate variance bounds, stepsizes, and importance probabilities.

For a sampling with marginals p and coefficients v satisfying

    E || sum_{i in S} h_i X_:i ||^2  <=  sum_i p_i v_i h_i^2   for all h,

the solver's stepsize is theta = min_i p_i * n*lam*gamma / (v_i + n*lam*gamma),
and 1/theta bounds the iteration count per unit of log-accuracy. This module
computes v for the supported samplings, the stepsizes, and the probability
plans that tilt p toward expensive examples.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .data import Dataset
from .sampling import (
    BucketPlan,
    Partition,
    bucket_intersection_counts,
    bucket_plan,
    uniform_bucket_plan,
)

ALTERNATING_TOL = 1e-10
ALTERNATING_MAX_ITER = 200
THETA_DUALITY_TOL = 1e-12


def max_over_mean(values) -> float:
    """Ratio of the largest entry to the mean; the serial speedup predictor."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) == 0:
        raise ValueError("empty input")
    return float(values.max() / values.mean())


def lambda_rule(dataset: Dataset) -> float:
    """Default regularization: max_i ||X_:i|| / n."""
    return float(np.sqrt(dataset.L.max()) / dataset.n)


def _digest(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()[:16]


class ThetaResult(NamedTuple):
    theta: float
    inv_theta: float
    argmin: int


def theta(p, v, n: int, lambda_gamma: float) -> ThetaResult:
    """Largest admissible stepsize for marginals p and coefficients v.

    theta = min_i p_i * C / (v_i + C) with C = n*lam*gamma. The reciprocal is
    recomputed independently as max_i (1/p_i + v_i / (p_i * C)) and both
    routes must agree to 1e-12; a mismatch means corrupt inputs.
    """
    p = np.asarray(p, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if lambda_gamma <= 0:
        raise ValueError("lambda_gamma must be positive")
    C = n * lambda_gamma
    ratios = p * C / (v + C)
    k = int(np.argmin(ratios))
    th = float(ratios[k])
    inv = float((1.0 / p + v / (p * C)).max())
    if abs(th * inv - 1.0) > THETA_DUALITY_TOL:
        raise AssertionError(f"stepsize duality violated: theta*inv_theta = {th * inv!r}")
    if th > 1.0:  # cannot happen for valid p, v >= 0; guard anyway
        raise AssertionError(f"theta = {th!r} exceeds 1")
    return ThetaResult(th, inv, k)


def v_serial(dataset: Dataset) -> np.ndarray:
    """Serial sampling: v_i = ||X_:i||^2 (tight, any marginals)."""
    return dataset.L.copy()


def v_tau_nice(dataset: Dataset, tau: int) -> np.ndarray:
    """Uniform size-tau subsets: v_i = sum_j (1 + (|J_j|-1)(tau-1)/(n-1)) X_ji^2."""
    n = dataset.n
    if not 1 <= tau <= n:
        raise ValueError(f"tau must lie in [1, {n}], got {tau}")
    if n == 1:
        return dataset.L.copy()
    counts = dataset.features.counts
    mult = 1.0 + (counts - 1.0) * (tau - 1.0) / (n - 1.0)
    return _fold_feature_multipliers(dataset, mult)


def _fold_feature_multipliers(dataset: Dataset, mult: np.ndarray) -> np.ndarray:
    """v_i = sum_j mult_j X_ji^2, folded over the sparse columns."""
    X = dataset.X
    contrib = mult[X.rows] * X.vals * X.vals
    return np.add.reduceat(contrib, X.indptr[:-1])


def _support_mass(dataset: Dataset, p: np.ndarray) -> np.ndarray:
    """delta_j = sum_{i in J_j} p_i for every feature."""
    f = dataset.features
    return np.add.reduceat(p[f.fidx], f.fptr[:-1])


def v_bucket(dataset: Dataset, plan: BucketPlan) -> np.ndarray:
    """Bucket sampling: v_i = sum_j (1 + (1 - 1/omega_j) delta_j) X_ji^2.

    omega_j counts the buckets feature j's support touches and delta_j is
    the probability mass on that support. Valid for any plan probabilities.
    """
    omega = bucket_intersection_counts(plan.partition, dataset.features)
    delta = _support_mass(dataset, plan.p)
    mult = 1.0 + (1.0 - 1.0 / omega) * delta
    return _fold_feature_multipliers(dataset, mult)


def v_bucket_conservative(dataset: Dataset, plan: BucketPlan) -> np.ndarray:
    """Partition-free variant: omega_j replaced by its upper bound tau."""
    delta = _support_mass(dataset, plan.p)
    mult = 1.0 + (1.0 - 1.0 / plan.tau) * delta
    return _fold_feature_multipliers(dataset, mult)


def v_uniform_bucket(dataset: Dataset, partition: Partition) -> np.ndarray:
    """v_bucket specialized to p_i = 1/|B_l|; delta_j = sum_{i in J_j} 1/|B_l(i)|.

    For equal bucket sizes this is the familiar tau*|J_j|/n mass.
    """
    omega = bucket_intersection_counts(partition, dataset.features)
    inv_sizes = np.repeat(1.0 / partition.sizes, partition.sizes)
    p = np.empty(partition.n)
    p[partition.bucket_idx] = inv_sizes
    delta = _support_mass(dataset, p)
    mult = 1.0 + (1.0 - 1.0 / omega) * delta
    return _fold_feature_multipliers(dataset, mult)


def serial_importance_probs(v, lambda_gamma: float) -> np.ndarray:
    """Serial marginals proportional to v_i + n*lam*gamma."""
    v = np.asarray(v, dtype=np.float64)
    w = v + len(v) * lambda_gamma
    return w / w.sum()


def _bucket_normalize(partition: Partition, weights: np.ndarray) -> np.ndarray:
    """Normalize positive weights to sum to one within every bucket."""
    w = weights[partition.bucket_idx]
    sums = np.add.reduceat(w, partition.bucket_ptr[:-1])
    p = np.empty(partition.n)
    p[partition.bucket_idx] = w / np.repeat(sums, partition.sizes)
    return p


@dataclass(frozen=True)
class EsoBundle:
    """A sampling's marginals and coefficients, with the resulting stepsize."""

    kind: str
    n: int
    tau: int
    lambda_gamma: float
    p: np.ndarray
    v: np.ndarray
    theta: float
    inv_theta: float
    extras: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "n": self.n,
            "tau": self.tau,
            "lambda_gamma": self.lambda_gamma,
            "theta": self.theta,
            "inv_theta": self.inv_theta,
            "p_digest": _digest(self.p),
            "v_digest": _digest(self.v),
        }
        for k, val in sorted(self.extras.items()):
            out[k] = val
        return out


def _bundle(kind, tau, lambda_gamma, p, v, n, **extras) -> EsoBundle:
    th = theta(p, v, n, lambda_gamma)
    return EsoBundle(kind, n, tau, lambda_gamma, p, v, th.theta, th.inv_theta, extras)


def serial_uniform_bundle(dataset: Dataset, lam: float, gamma: float) -> EsoBundle:
    n = dataset.n
    return _bundle(
        "serial-uniform", 1, lam * gamma, np.full(n, 1.0 / n), v_serial(dataset), n
    )


def serial_importance_bundle(dataset: Dataset, lam: float, gamma: float) -> EsoBundle:
    v = v_serial(dataset)
    p = serial_importance_probs(v, lam * gamma)
    return _bundle("serial-importance", 1, lam * gamma, p, v, dataset.n)


def tau_nice_bundle(dataset: Dataset, tau: int, lam: float, gamma: float) -> EsoBundle:
    n = dataset.n
    p = np.full(n, tau / n)
    return _bundle("tau-nice", tau, lam * gamma, p, v_tau_nice(dataset, tau), n)


def uniform_bucket_bundle(
    dataset: Dataset, partition: Partition, lam: float, gamma: float
) -> tuple[BucketPlan, EsoBundle]:
    plan = uniform_bucket_plan(partition)
    v = v_uniform_bucket(dataset, partition)
    return plan, _bundle(
        "uniform-bucket", partition.tau, lam * gamma, plan.p, v, dataset.n
    )


def bucket_bundle(
    dataset: Dataset, plan: BucketPlan, lam: float, gamma: float, conservative=False
) -> EsoBundle:
    v = (v_bucket_conservative if conservative else v_bucket)(dataset, plan)
    kind = "bucket-conservative" if conservative else "bucket"
    return _bundle(kind, plan.tau, lam * gamma, plan.p, v, dataset.n)


def practical_importance_plan(
    dataset: Dataset, partition: Partition, lam: float, gamma: float
) -> tuple[BucketPlan, EsoBundle]:
    """One-shot importance probabilities from the uniform-plan coefficients.

    p*_i is (C + v^unif_i) bucket-normalized (C = n*lam*gamma); the bundle
    carries the refreshed coefficients s = v_bucket at p* and, per bucket,
    the price beta_l = max_{i in B_l} (C + s_i)/(C + v^unif_i) of reusing the
    uniform coefficients to build p*.
    """
    C = dataset.n * lam * gamma
    v_unif = v_uniform_bucket(dataset, partition)
    p_star = _bucket_normalize(partition, C + v_unif)
    plan = bucket_plan(partition, p_star)
    s = v_bucket(dataset, plan)
    ratios = (C + s) / (C + v_unif)
    beta = [
        float(ratios[partition.bucket(l)].max()) for l in range(partition.tau)
    ]
    bundle = _bundle(
        "practical-importance",
        partition.tau,
        lam * gamma,
        p_star,
        s,
        dataset.n,
        beta=beta,
    )
    return plan, bundle


@dataclass(frozen=True)
class AlternatingResult:
    converged: bool
    iterations: int
    residual: float
    fixed_point_complexity: float  # max_l (|B_l| + sum_{i in B_l} v_i / C)


def alternating_optimization_plan(
    dataset: Dataset,
    partition: Partition,
    lam: float,
    gamma: float,
    tol: float = ALTERNATING_TOL,
    max_iter: int = ALTERNATING_MAX_ITER,
) -> tuple[BucketPlan, EsoBundle, AlternatingResult]:
    """Alternate v <- v_bucket(p) and p <- bucket-normalized (C + v).

    Starts from the uniform plan and stops when the sup-norm p-update falls
    below tol. At the fixed point 1/theta equals
    max_l (|B_l| + sum_{i in B_l} v_i / C), the bucket-balanced complexity.
    """
    C = dataset.n * lam * gamma
    p = uniform_bucket_plan(partition).p
    converged = False
    iterations = 0
    residual = np.inf
    for iterations in range(1, max_iter + 1):
        v = v_bucket(dataset, bucket_plan(partition, p))
        p_new = _bucket_normalize(partition, C + v)
        residual = float(np.abs(p_new - p).max())
        p = p_new
        if residual < tol:
            converged = True
            break
    plan = bucket_plan(partition, p)
    v = v_bucket(dataset, plan)
    bundle = _bundle("alternating", partition.tau, lam * gamma, p, v, dataset.n)
    per_bucket = np.add.reduceat(v[partition.bucket_idx], partition.bucket_ptr[:-1]) / C
    complexity = float((partition.sizes + per_bucket).max())
    return plan, bundle, AlternatingResult(converged, iterations, residual, complexity)


@dataclass(frozen=True)
class SpeedupReport:
    """Predicted importance-vs-uniform gain for one dataset and partition."""

    tau: int
    lam: float
    gamma: float
    sigma: float  # max-over-mean of the squared column norms
    theta_nice: float
    theta_importance: float
    theoretical_ratio: float
    beta: list

    def to_json_dict(self) -> dict:
        return {
            "tau": self.tau,
            "lam": self.lam,
            "gamma": self.gamma,
            "sigma": self.sigma,
            "theta_nice": self.theta_nice,
            "theta_importance": self.theta_importance,
            "ratio": self.theoretical_ratio,
            "beta": self.beta,
        }


def speedup_report(
    dataset: Dataset, partition: Partition, lam: float | None = None, gamma: float = 4.0
) -> SpeedupReport:
    """Compare the importance plan's stepsize against uniform subsets."""
    if lam is None:
        lam = lambda_rule(dataset)
    nice = tau_nice_bundle(dataset, partition.tau, lam, gamma)
    _, imp = practical_importance_plan(dataset, partition, lam, gamma)
    return SpeedupReport(
        partition.tau,
        lam,
        gamma,
        max_over_mean(dataset.L),
        nice.theta,
        imp.theta,
        imp.theta / nice.theta,
        imp.extras["beta"],
    )
