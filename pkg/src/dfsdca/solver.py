"""dfSDCA: dual-free stochastic dual coordinate ascent.

State is a primal vector w and per-example scalars alpha tied by the
identity w = (1/(lam*n)) sum_i alpha_i X_:i. One iteration draws a set S,
computes Delta_i = phi_i'(X_:i^T w) + alpha_i against the pre-update iterate
for every i in S, then moves alpha_i by -theta/p_i * Delta_i and w by the
matching sparse combination. With theta from the eso module the expected
potential lam/2 ||w - w*||^2 + gamma/(2n) ||alpha - alpha*||^2 contracts by
e^{-theta} per iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .data import Dataset
from .eso import EsoBundle
from .losses import LossModel
from .sampling import SamplingSpec

P_CONSISTENCY_TOL = 1e-12
DRIFT_TOL = 1e-8
GAP_FLOOR = 1e-16


class DivergenceError(RuntimeError):
    """The iterate escaped: non-finite update or gap beyond 1e10."""

    def __init__(self, message: str, provenance: dict):
        super().__init__(f"{message}; provenance: {provenance}")
        self.provenance = provenance


@dataclass(frozen=True)
class Trace:
    """Checkpoint log: iteration count, axis position, gap, potential, drift."""

    iterations: np.ndarray
    effective_passes: np.ndarray
    gap: np.ndarray
    potential: np.ndarray
    drift: np.ndarray

    def __len__(self) -> int:
        return len(self.iterations)


@dataclass(frozen=True)
class SolverState:
    w: np.ndarray
    alpha: np.ndarray
    t: int
    theta: float
    p: np.ndarray
    trace: Trace | None = None
    metadata: dict = field(default_factory=dict)


def effective_passes(t: int, tau: int, n: int) -> float:
    """Data touched, normalized: (t*tau/n) passes shared across tau cores."""
    return (t * tau / n) / tau


def objective(dataset: Dataset, loss: LossModel, lam: float, w) -> float:
    """P(w) = (1/n) sum_i phi_i(X_:i^T w) + lam/2 ||w||^2."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    w = np.asarray(w, dtype=np.float64)
    X = dataset.X
    margins = np.add.reduceat(X.vals * w[X.rows], X.indptr[:-1])
    return float(loss.value(margins, dataset.y).mean() + 0.5 * lam * (w @ w))


def initial_state(dataset: Dataset, theta: float, p) -> SolverState:
    """alpha = 0 and the matching w = 0; the identity holds trivially."""
    return SolverState(
        w=np.zeros(dataset.d),
        alpha=np.zeros(dataset.n),
        t=0,
        theta=theta,
        p=np.asarray(p, dtype=np.float64),
    )


def dfsdca_step(
    state: SolverState, S, dataset: Dataset, loss: LossModel, lam: float
) -> SolverState:
    """One iteration over the index set S, in plain numpy.

    This is the readable twin of the compiled loop and the unit against
    which it is tested. Every Delta_i is evaluated at the incoming w.
    """
    S = np.asarray(S, dtype=np.int64)
    if len(np.unique(S)) != len(S):
        raise ValueError("sampled set contains repeats")
    n = dataset.n
    w = state.w.copy()
    alpha = state.alpha.copy()

    deltas = np.empty(len(S))
    for k, i in enumerate(S):
        rows, vals = dataset.X.col(i)
        margin = float(vals @ w[rows])
        deltas[k] = loss.derivative(margin, dataset.y[i]) + alpha[i]
        if not np.isfinite(deltas[k]):
            raise DivergenceError(
                "non-finite update",
                {"iteration": state.t + 1, "example": int(i), "theta": state.theta},
            )
    for k, i in enumerate(S):
        step = state.theta / state.p[i] * deltas[k]
        alpha[i] -= step
        rows, vals = dataset.X.col(i)
        w[rows] -= step / (n * lam) * vals

    return SolverState(w, alpha, state.t + 1, state.theta, state.p, None, state.metadata)


@dataclass(frozen=True)
class ReferenceSolution:
    """A high-accuracy optimum: w*, alpha* = -phi'(margins*), and P(w*)."""

    w: np.ndarray
    alpha: np.ndarray
    p_star: float
    grad_norm: float
    iterations: int

    def initial_potential(self, lam: float, gamma: float) -> float:
        """Potential of the zero start (alpha = 0, w = 0)."""
        n = len(self.alpha)
        return float(
            0.5 * lam * (self.w @ self.w) + 0.5 * gamma / n * (self.alpha @ self.alpha)
        )


def reference_solution(
    dataset: Dataset,
    loss: LossModel,
    lam: float,
    tol: float = 1e-12,
    max_iter: int = 500,
) -> ReferenceSolution:
    """Drive the full gradient below tol with damped Newton steps.

    Deterministic: dense Hessian solves with Armijo backtracking while
    objective decreases are representable in float64, then pure Newton
    polish judged on the gradient norm. If tol sits below the arithmetic
    floor of the instance the best iterate is returned and its achieved
    gradient norm is recorded in the result; only a gradient stuck above
    1e-8 raises.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    X = dataset.X
    if X.d * X.n > 5 * 10**7:
        raise ValueError("instance too large for the dense reference path")
    Xd = X.to_dense()
    y = dataset.y
    n = X.n

    def sparse_margins(wv):
        return np.add.reduceat(X.vals * wv[X.rows], X.indptr[:-1])

    def objective(margins_v, wv):
        return float(loss.value(margins_v, y).mean() + 0.5 * lam * (wv @ wv))

    def gradient(margins_v, wv):
        return Xd @ loss.derivative(margins_v, y) / n + lam * wv

    w = np.zeros(X.d)
    margins = sparse_margins(w)
    value = objective(margins, w)
    grad = gradient(margins, w)
    grad_norm = float(np.linalg.norm(grad))
    best = (grad_norm, w, margins, value)
    plateau = 0
    it = 0
    while grad_norm > tol and it < max_iter and plateau < 25:
        ddphi = loss.second_derivative(margins, y)
        H = (Xd * ddphi) @ Xd.T / n + lam * np.eye(X.d)
        direction = np.linalg.solve(H, -grad)
        slope = float(grad @ direction)
        step = 1.0
        accepted = False
        for _ in range(60):
            w_new = w + step * direction
            margins_new = sparse_margins(w_new)
            value_new = objective(margins_new, w_new)
            if value_new <= value + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # sufficient decrease is no longer representable; try the
            # undamped step and keep it only if the gradient shrinks
            w_new = w + direction
            margins_new = sparse_margins(w_new)
            value_new = objective(margins_new, w_new)
        grad_new = gradient(margins_new, w_new)
        gn = float(np.linalg.norm(grad_new))
        if not accepted and gn >= grad_norm:
            break
        w, margins, value = w_new, margins_new, value_new
        grad, grad_norm = grad_new, gn
        if grad_norm < best[0]:
            best = (grad_norm, w, margins, value)
            plateau = 0
        elif best[0] <= 1e-6:
            plateau += 1
        it += 1

    grad_norm, w, margins, value = best
    if grad_norm > max(tol, 1e-8):
        raise RuntimeError(
            f"reference solve stalled at gradient norm {grad_norm:.3e} after {it} iterations"
        )

    alpha = -loss.derivative(margins, y)
    return ReferenceSolution(w, alpha, value, grad_norm, it)


def _kernel_sampling_arrays(sampling: SamplingSpec):
    """Map a SamplingSpec onto the compiled loop's mode and tables."""
    empty_i = np.zeros(1, dtype=np.int64)
    empty_f = np.zeros(1)
    if sampling.kind in ("tau-nice", "serial-uniform"):
        return _kernel.MODE_TAU_NICE, empty_i, empty_i, empty_f
    if sampling.kind == "serial-importance":
        p = sampling.implied_probabilities()
        ptr = np.array([0, sampling.n], dtype=np.int64)
        items = np.arange(sampling.n, dtype=np.int64)
        cum = np.cumsum(p)
        cum[-1] = 1.0
        return _kernel.MODE_BUCKET, ptr, items, cum
    plan = sampling.plan
    return (
        _kernel.MODE_BUCKET,
        plan.partition.bucket_ptr,
        plan.partition.bucket_idx,
        plan.cum,
    )


def solve(
    dataset: Dataset,
    loss: LossModel,
    lam: float,
    sampling: SamplingSpec,
    eso: EsoBundle,
    epochs: float,
    log_every: int | None = None,
    seed: int = 0,
    reference: ReferenceSolution | None = None,
    stop_gap: float | None = None,
) -> SolverState:
    """Run ceil(epochs * n / tau) iterations of dfSDCA from the zero start.

    Checkpoints land every log_every iterations (default ceil(n/(10 tau)),
    ten per pass) and log the axis position t/n, the gap P(w) - P* clamped
    at 1e-16 (when a reference is supplied, along with the potential), and
    the relative drift of w from its alpha-reconstruction, which must stay
    within 1e-8. stop_gap, if given, ends the run at the first checkpoint
    at or below it; by default the iteration count is exact.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if epochs <= 0:
        raise ValueError("epochs must be positive")
    n, tau = dataset.n, sampling.tau
    if sampling.n != n:
        raise ValueError("sampling built for a different n")
    p = sampling.implied_probabilities()
    if np.abs(p - eso.p).max() > P_CONSISTENCY_TOL:
        raise ValueError("eso bundle probabilities do not match the sampling")
    if abs(eso.lambda_gamma - lam * loss.gamma) > 1e-12 * lam * loss.gamma:
        raise ValueError("eso bundle was built for a different lam*gamma")

    total_iters = math.ceil(epochs * n / tau)
    if log_every is None:
        log_every = math.ceil(n / (10 * tau))
    if log_every < 1:
        raise ValueError("log_every must be at least 1")

    mode, bucket_ptr, bucket_items, bucket_cum = _kernel_sampling_arrays(sampling)
    have_ref = reference is not None
    p_star = reference.p_star if have_ref else 0.0
    w_star = reference.w if have_ref else np.zeros(1)
    alpha_star = reference.alpha if have_ref else np.zeros(1)

    w = np.zeros(dataset.d)
    alpha = np.zeros(n)
    cap = total_iters // log_every + 3
    cp_iter = np.zeros(cap, dtype=np.int64)
    cp_gap = np.zeros(cap)
    cp_pot = np.zeros(cap)
    cp_drift = np.zeros(cap)

    status, ncp, bad_example, bad_iter = _kernel.run_solver(
        dataset.X.indptr,
        dataset.X.rows,
        dataset.X.vals,
        dataset.y,
        loss.code,
        lam,
        loss.gamma,
        eso.theta,
        p,
        mode,
        tau,
        bucket_ptr,
        bucket_items,
        bucket_cum,
        total_iters,
        log_every,
        seed,
        have_ref,
        p_star,
        w_star,
        alpha_star,
        0.0 if stop_gap is None else float(stop_gap),
        w,
        alpha,
        cp_iter,
        cp_gap,
        cp_pot,
        cp_drift,
    )

    metadata = {
        "seed": seed,
        "theta": eso.theta,
        "sampling": sampling.kind,
        "eso_kind": eso.kind,
        "tau": tau,
        "lam": lam,
        "gamma": loss.gamma,
        "loss": loss.kind,
        "dataset_digest": dataset.digest(),
        "iterations": int(cp_iter[ncp - 1]),
        "gap_clamp": GAP_FLOOR,
        "stopped_early": status == _kernel.STATUS_DONE_EARLY,
    }
    if status in (_kernel.STATUS_NONFINITE, _kernel.STATUS_GAP_BLOWN):
        why = "non-finite update" if status == _kernel.STATUS_NONFINITE else "gap beyond 1e10"
        raise DivergenceError(
            why, {**metadata, "iteration": int(bad_iter), "example": int(bad_example)}
        )

    it = cp_iter[:ncp]
    trace = Trace(
        iterations=it.copy(),
        effective_passes=it / n,
        gap=cp_gap[:ncp].copy(),
        potential=cp_pot[:ncp].copy(),
        drift=cp_drift[:ncp].copy(),
    )
    worst_drift = float(trace.drift.max())
    if worst_drift > DRIFT_TOL:
        raise DivergenceError(
            f"w drifted from its alpha reconstruction by {worst_drift:g}", metadata
        )
    return SolverState(w, alpha, int(it[-1]), eso.theta, p, trace, metadata)
