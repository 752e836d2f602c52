"""Bucket partitions and minibatch samplings over examples."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .data import FeatureIndex

MIN_PROBABILITY = 1e-15
BUCKET_SUM_TOL = 1e-12
DENSE_MATRIX_LIMIT = 4096


@dataclass(frozen=True)
class Partition:
    """A partition of {0..n-1} into tau buckets of near-equal size.

    Buckets are contiguous blocks of a base ordering (the identity unless a
    shuffle seed is given); sizes differ by at most one, larger blocks first.
    """

    n: int
    tau: int
    bucket_ptr: np.ndarray  # (tau+1,) offsets into bucket_idx
    bucket_idx: np.ndarray  # (n,) example ids, bucket by bucket
    assignment: np.ndarray  # (n,) bucket id of each example
    shuffle_seed: int | None

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.bucket_ptr)

    def bucket(self, l: int) -> np.ndarray:
        return self.bucket_idx[self.bucket_ptr[l] : self.bucket_ptr[l + 1]]

    def buckets(self) -> list[np.ndarray]:
        return [self.bucket(l) for l in range(self.tau)]


def make_partition(n: int, tau: int, shuffle_seed: int | None = None) -> Partition:
    """Split examples into tau buckets, optionally shuffling first."""
    if not 1 <= tau <= n:
        raise ValueError(f"tau must lie in [1, {n}], got {tau}")
    order = np.arange(n, dtype=np.int64)
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(n).astype(np.int64)
    big = n % tau
    base = n // tau
    sizes = np.full(tau, base, dtype=np.int64)
    sizes[:big] += 1
    bucket_ptr = np.zeros(tau + 1, dtype=np.int64)
    np.cumsum(sizes, out=bucket_ptr[1:])
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.repeat(np.arange(tau, dtype=np.int64), sizes)
    return Partition(n, tau, bucket_ptr, order, assignment, shuffle_seed)


@dataclass(frozen=True)
class BucketPlan:
    """A bucket sampling: one example drawn per bucket, example i with p[i].

    Probabilities sum to one within every bucket. cum holds per-bucket
    cumulative tables aligned with partition.bucket_idx, so a draw is one
    uniform and a binary search per bucket.
    """

    partition: Partition
    p: np.ndarray
    cum: np.ndarray

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def tau(self) -> int:
        return self.partition.tau

    def provenance(self) -> dict:
        return {
            "tau": int(self.tau),
            "bucket_sizes": [int(s) for s in self.partition.sizes],
            "p_digest": hashlib.sha256(self.p.tobytes()).hexdigest()[:16],
            "shuffle_seed": self.partition.shuffle_seed,
        }


def bucket_plan(partition: Partition, p) -> BucketPlan:
    """Validate probabilities against the partition and build draw tables."""
    p = np.ascontiguousarray(p, dtype=np.float64)
    if p.shape != (partition.n,):
        raise ValueError(f"expected {partition.n} probabilities, got {p.shape}")
    if (p < MIN_PROBABILITY).any():
        i = int(np.argmin(p))
        raise ValueError(f"p[{i}]={p[i]:g} below the {MIN_PROBABILITY:g} floor")
    sums = np.add.reduceat(p[partition.bucket_idx], partition.bucket_ptr[:-1])
    bad = np.abs(sums - 1.0) > BUCKET_SUM_TOL
    if bad.any():
        l = int(np.flatnonzero(bad)[0])
        raise ValueError(f"bucket {l} probabilities sum to {sums[l]!r}, not 1")
    # per-bucket cumulative tables: restart the running sum at each boundary
    cum = np.cumsum(p[partition.bucket_idx])
    offsets = np.zeros(partition.tau)
    offsets[1:] = cum[partition.bucket_ptr[1:-1] - 1]
    cum = cum - np.repeat(offsets, partition.sizes)
    cum[partition.bucket_ptr[1:] - 1] = 1.0  # exact right endpoints
    return BucketPlan(partition, p, cum)


def uniform_bucket_plan(partition: Partition) -> BucketPlan:
    """p[i] = 1/|B_l| within each bucket."""
    p = np.empty(partition.n)
    p[partition.bucket_idx] = np.repeat(1.0 / partition.sizes, partition.sizes)
    return bucket_plan(partition, p)


def draw_bucket_sample(plan: BucketPlan, rng: np.random.Generator) -> np.ndarray:
    """One example per bucket by inverse-CDF search; returns tau indices."""
    part = plan.partition
    out = np.empty(part.tau, dtype=np.int64)
    u = rng.random(part.tau)
    for l in range(part.tau):
        a, b = part.bucket_ptr[l], part.bucket_ptr[l + 1]
        k = a + np.searchsorted(plan.cum[a:b], u[l], side="right")
        out[l] = part.bucket_idx[min(k, b - 1)]
    return out


def draw_tau_nice(n: int, tau: int, rng: np.random.Generator) -> np.ndarray:
    """A uniformly random size-tau subset of {0..n-1}."""
    if not 1 <= tau <= n:
        raise ValueError(f"tau must lie in [1, {n}], got {tau}")
    return np.sort(rng.choice(n, size=tau, replace=False).astype(np.int64))


def probability_matrix(plan: BucketPlan) -> np.ndarray:
    """Dense P with P[i,j] = Prob(i and j both sampled).

    Diagonal p_i; p_i p_j across buckets; zero inside a bucket (at most one
    draw per bucket). Guarded to small n: use the enumeration oracle beyond.
    """
    n = plan.n
    if n > DENSE_MATRIX_LIMIT:
        raise ValueError(
            f"n={n} exceeds the dense limit {DENSE_MATRIX_LIMIT}; "
            "this closed form is for desk-scale verification"
        )
    P = np.outer(plan.p, plan.p)
    same = plan.partition.assignment[:, None] == plan.partition.assignment[None, :]
    P[same] = 0.0
    np.fill_diagonal(P, plan.p)
    return P


def bucket_intersection_counts(
    partition: Partition, features: FeatureIndex
) -> np.ndarray:
    """For each feature j, how many buckets its support touches."""
    b = partition.assignment[features.fidx]
    feat = np.repeat(np.arange(features.d, dtype=np.int64), features.counts)
    order = np.lexsort((b, feat))
    feat, b = feat[order], b[order]
    new = np.ones(len(feat), dtype=bool)
    new[1:] = (feat[1:] != feat[:-1]) | (b[1:] != b[:-1])
    return np.bincount(feat[new], minlength=features.d).astype(np.int64)


@dataclass(frozen=True)
class SamplingSpec:
    """What the solver draws each iteration.

    kind is one of 'serial-uniform', 'serial-importance', 'tau-nice',
    'bucket'. Serial kinds draw a single index (probabilities uniform or
    explicit); tau-nice draws a uniform subset of size tau; bucket draws one
    index per bucket of a BucketPlan.
    """

    kind: str
    n: int
    tau: int
    probabilities: np.ndarray | None = None
    plan: BucketPlan | None = None

    def __post_init__(self):
        if self.kind not in ("serial-uniform", "serial-importance", "tau-nice", "bucket"):
            raise ValueError(f"unknown sampling kind {self.kind!r}")
        if self.kind.startswith("serial") and self.tau != 1:
            raise ValueError("serial sampling has tau=1")
        if self.kind == "serial-importance" and self.probabilities is None:
            raise ValueError("serial-importance needs explicit probabilities")
        if self.kind == "bucket" and self.plan is None:
            raise ValueError("bucket sampling needs a BucketPlan")
        if not 1 <= self.tau <= self.n:
            raise ValueError(f"tau must lie in [1, {self.n}], got {self.tau}")

    def implied_probabilities(self) -> np.ndarray:
        """Marginal inclusion probabilities p_i = Prob(i in S)."""
        if self.kind == "serial-uniform":
            return np.full(self.n, 1.0 / self.n)
        if self.kind == "serial-importance":
            return np.asarray(self.probabilities, dtype=np.float64)
        if self.kind == "tau-nice":
            return np.full(self.n, self.tau / self.n)
        return self.plan.p


def serial_uniform_sampling(n: int) -> SamplingSpec:
    return SamplingSpec("serial-uniform", n, 1)

def serial_importance_sampling(p) -> SamplingSpec:
    p = np.ascontiguousarray(p, dtype=np.float64)
    if abs(p.sum() - 1.0) > BUCKET_SUM_TOL:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    if (p < MIN_PROBABILITY).any():
        raise ValueError(f"probabilities below the {MIN_PROBABILITY:g} floor")
    return SamplingSpec("serial-importance", len(p), 1, probabilities=p)

def tau_nice_sampling(n: int, tau: int) -> SamplingSpec:
    return SamplingSpec("tau-nice", n, tau)

def bucket_sampling(plan: BucketPlan) -> SamplingSpec:
    return SamplingSpec("bucket", plan.n, plan.tau, plan=plan)
