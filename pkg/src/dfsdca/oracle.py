"""Exact small-instance verification by exhaustive enumeration.

Everything here recomputes quantities straight from definitions: expectations
are literal sums over every possible draw. It is the slow, trustworthy side
of every check; the fast closed forms live elsewhere and are validated
against this module at desk scale.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .sampling import BucketPlan, Partition

ENUMERATION_LIMIT = 10**6
LAMBDA_PRIME_LIMIT = 64
PSD_TOL = -1e-10


@dataclass(frozen=True)
class EnumeratedSampling:
    """All outcomes of a finite sampling with their probabilities."""

    outcomes: np.ndarray  # (K, tau) int64, each row one draw
    probs: np.ndarray  # (K,)

    def marginals(self, n: int) -> np.ndarray:
        """Prob(i in S) for every example, by direct summation."""
        out = np.zeros(n)
        for S, pr in zip(self.outcomes, self.probs):
            out[np.unique(S)] += pr
        return out

    def pair_matrix(self, n: int) -> np.ndarray:
        """P[i,j] = Prob(i in S and j in S), by direct summation."""
        P = np.zeros((n, n))
        for S, pr in zip(self.outcomes, self.probs):
            u = np.unique(S)
            P[np.ix_(u, u)] += pr
        return P


def enumerate_bucket_sampling(plan: BucketPlan) -> EnumeratedSampling:
    """Every bucket-sampling outcome: the cartesian product over buckets."""
    part = plan.partition
    total = 1
    for s in part.sizes:
        total *= int(s)
        if total > ENUMERATION_LIMIT:
            raise ValueError(
                f"enumeration would need {total}+ outcomes "
                f"(limit {ENUMERATION_LIMIT})"
            )
    buckets = part.buckets()
    outcomes = np.array(list(itertools.product(*buckets)), dtype=np.int64)
    probs = np.ones(len(outcomes))
    for k, S in enumerate(outcomes):
        for i in S:
            probs[k] *= plan.p[i]
    return EnumeratedSampling(outcomes, probs)


def enumerate_tau_nice(n: int, tau: int) -> EnumeratedSampling:
    """Every size-tau subset of {0..n-1}, equally likely."""
    from math import comb

    if comb(n, tau) > ENUMERATION_LIMIT:
        raise ValueError(f"C({n},{tau}) exceeds the enumeration limit")
    outcomes = np.array(list(itertools.combinations(range(n), tau)), dtype=np.int64)
    probs = np.full(len(outcomes), 1.0 / len(outcomes))
    return EnumeratedSampling(outcomes, probs)


def _dense(X) -> np.ndarray:
    if isinstance(X, Dataset):
        return X.X.to_dense()
    return np.asarray(X, dtype=np.float64)


def exact_eso_lhs(X, sampling: EnumeratedSampling, h) -> float:
    """E ||sum_{i in S} h_i X_:i||^2 as a literal sum over outcomes."""
    Xd = _dense(X)
    h = np.asarray(h, dtype=np.float64)
    total = 0.0
    for S, pr in zip(sampling.outcomes, sampling.probs):
        agg = Xd[:, S] @ h[S]
        total += pr * float(agg @ agg)
    return total


@dataclass(frozen=True)
class EsoCheckReport:
    max_violation: float  # relative; positive means the bound failed
    min_slack_ratio: float  # min over h of rhs/lhs; 1.0 means tight
    trials: int

    @property
    def passed(self) -> bool:
        return self.max_violation <= 1e-10


def check_eso(
    X,
    sampling: EnumeratedSampling,
    p,
    v,
    trials: int = 100,
    rng: np.random.Generator | None = None,
) -> EsoCheckReport:
    """Test E||sum_{i in S} h_i X_:i||^2 <= sum_i p_i v_i h_i^2 exhaustively.

    Runs `trials` standard normal h vectors plus every unit vector. The
    left side is exact (enumeration); violations are reported relative to
    the right side.
    """
    Xd = _dense(X)
    n = Xd.shape[1]
    p = np.asarray(p, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    rng = rng or np.random.default_rng(0)
    H = np.concatenate([np.eye(n), rng.standard_normal((trials, n))], axis=0)

    # batch the lhs over all h at once, outcome by outcome
    lhs = np.zeros(len(H))
    for S, pr in zip(sampling.outcomes, sampling.probs):
        agg = H[:, S] @ Xd[:, S].T  # (num_h, d)
        lhs += pr * np.einsum("ij,ij->i", agg, agg)
    rhs = (H * H) @ (p * v)

    scale = np.maximum(rhs, np.finfo(float).tiny)
    max_violation = float(((lhs - rhs) / scale).max())
    pos = lhs > 0
    min_slack = float((rhs[pos] / lhs[pos]).min()) if pos.any() else np.inf
    return EsoCheckReport(max_violation, min_slack, len(H))


def lambda_prime(M) -> float:
    """max{h' M h : h' Diag(M) h <= 1} for PSD M, restricted to the support.

    Equals the largest eigenvalue of D^{-1/2} M D^{-1/2} over coordinates
    with positive diagonal; 0 for the zero matrix.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.shape[0] != M.shape[1]:
        raise ValueError("square matrix expected")
    if M.shape[0] > LAMBDA_PRIME_LIMIT:
        raise ValueError(f"matrix too large (limit {LAMBDA_PRIME_LIMIT})")
    keep = np.diag(M) > 0
    if not keep.any():
        return 0.0
    Ms = M[np.ix_(keep, keep)]
    dinv = 1.0 / np.sqrt(np.diag(Ms))
    return float(np.linalg.eigvalsh(dinv[:, None] * Ms * dinv[None, :]).max())


def reconstruct_v(X, plan: BucketPlan, features) -> np.ndarray:
    """The per-feature-eigenvalue aggregate bound, from enumeration.

    v_i = sum_j lambda'(P(J_j intersect S)) X_ji^2 where P restricted to a
    feature's support comes from the enumerated pair-probability matrix.
    This is the tightest separable bound of this shape; closed forms must
    dominate it entrywise.
    """
    Xd = _dense(X)
    d, n = Xd.shape
    P = enumerate_bucket_sampling(plan).pair_matrix(n)
    v = np.zeros(n)
    for j in range(d):
        J = features.examples_of(j) if features is not None else np.flatnonzero(Xd[j])
        if len(J) == 0:
            continue
        mask = np.zeros((n, n))
        mask[np.ix_(J, J)] = 1.0
        lam = lambda_prime(P * mask)
        v += lam * Xd[j] * Xd[j]
    return v


def min_eigenvalue(M) -> float:
    return float(np.linalg.eigvalsh(np.asarray(M, dtype=np.float64)).min())


def check_lemma1(plan: BucketPlan, tol: float = 1e-12) -> float:
    """Pair-probability matrix: enumeration vs the closed form.

    Closed form: p_i p_j off-diagonal across buckets, 0 within a bucket,
    p_i on the diagonal. Returns the max absolute deviation (must be <= tol).
    """
    from .sampling import probability_matrix

    got = enumerate_bucket_sampling(plan).pair_matrix(plan.n)
    want = probability_matrix(plan)
    err = float(np.abs(got - want).max())
    if err > tol:
        raise AssertionError(f"pair-probability closed form off by {err:g}")
    return err


@dataclass(frozen=True)
class LemmaReport:
    omega: int
    min_eig_bucket_bound: float  # Lemma: ones(J) o B - (1/omega) ones(J) is PSD
    min_eig_diag_bound: float  # Lemma: (sum_J p) Diag(P(J cap S)) - ones(J) o pp' is PSD

    @property
    def passed(self) -> bool:
        return (
            self.min_eig_bucket_bound >= PSD_TOL and self.min_eig_diag_bound >= PSD_TOL
        )


def check_lemma2_lemma3(J, plan: BucketPlan) -> LemmaReport:
    """PSD certificates behind the bucket-sampling aggregate bound.

    With E_J the all-ones matrix on J, B the same-bucket indicator, p the
    plan probabilities and P the pair-probability matrix:

      (2)  E_J o B  >=  (1/omega_J) E_J          (omega_J = buckets J touches)
      (3)  (sum_{i in J} p_i) Diag(P restricted to J)  >=  E_J o pp'
    """
    J = np.asarray(J, dtype=np.int64)
    if len(J) == 0:
        raise ValueError("J must be nonempty")
    n = plan.n
    part = plan.partition
    EJ = np.zeros((n, n))
    EJ[np.ix_(J, J)] = 1.0
    B = (part.assignment[:, None] == part.assignment[None, :]).astype(float)
    omega = len(np.unique(part.assignment[J]))

    m2 = min_eigenvalue(EJ * B - EJ / omega)

    P = enumerate_bucket_sampling(plan).pair_matrix(n)
    maskJ = np.zeros(n, dtype=bool)
    maskJ[J] = True
    diag = np.where(maskJ, np.diag(P), 0.0)
    m3 = min_eigenvalue(plan.p[J].sum() * np.diag(diag) - EJ * np.outer(plan.p, plan.p))

    return LemmaReport(omega, m2, m3)
