"""Shared builders for the randomized tests."""

import numpy as np

from dfsdca.data import Dataset
from dfsdca.sampling import bucket_plan, make_partition


def random_dataset(rng, n, d, density=0.6):
    """Dense-backed random dataset; every column guaranteed nonempty."""
    X = rng.standard_normal((d, n)) * (rng.random((d, n)) < density)
    for i in range(n):
        if not X[:, i].any():
            X[int(rng.integers(d)), i] = float(rng.standard_normal()) or 1.0
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return Dataset.from_dense(X, y)


def random_probabilities(rng, partition):
    w = rng.random(partition.n) + 0.05
    p = np.empty(partition.n)
    for B in partition.buckets():
        p[B] = w[B] / w[B].sum()
    return p


def random_plan(rng, n, tau):
    part = make_partition(n, tau, shuffle_seed=int(rng.integers(2**31)))
    return part, bucket_plan(part, random_probabilities(rng, part))
