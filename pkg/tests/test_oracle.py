import numpy as np
import pytest

from dfsdca.data import Dataset
from dfsdca.eso import v_bucket, v_bucket_conservative
from dfsdca.oracle import (
    check_eso,
    check_lemma1,
    check_lemma2_lemma3,
    enumerate_bucket_sampling,
    enumerate_tau_nice,
    exact_eso_lhs,
    lambda_prime,
    min_eigenvalue,
    reconstruct_v,
)
from dfsdca.sampling import draw_bucket_sample, make_partition, uniform_bucket_plan

from helpers import random_dataset, random_plan


def test_enumeration_marginals_match_plan():
    rng = np.random.default_rng(0)
    for _ in range(25):
        n = int(rng.integers(2, 11))
        tau = int(rng.integers(1, min(n, 4) + 1))
        _, plan = random_plan(rng, n, tau)
        enum = enumerate_bucket_sampling(plan)
        assert abs(enum.probs.sum() - 1.0) < 1e-12
        np.testing.assert_allclose(enum.marginals(n), plan.p, atol=1e-12)
        assert enum.outcomes.shape[1] == tau


def test_enumeration_tau_nice():
    enum = enumerate_tau_nice(5, 2)
    assert len(enum.probs) == 10
    np.testing.assert_allclose(enum.probs, 0.1)
    np.testing.assert_allclose(enum.marginals(5), 0.4, atol=1e-14)


def test_pair_matrix_matches_closed_form():
    rng = np.random.default_rng(1)
    for _ in range(25):
        n = int(rng.integers(2, 12))
        tau = int(rng.integers(1, min(n, 4) + 1))
        _, plan = random_plan(rng, n, tau)
        assert check_lemma1(plan) <= 1e-12


def test_exact_lhs_against_monte_carlo():
    rng = np.random.default_rng(2)
    ds = random_dataset(rng, 8, 4)
    _, plan = random_plan(rng, 8, 3)
    h = rng.standard_normal(8)
    exact = exact_eso_lhs(ds, enumerate_bucket_sampling(plan), h)

    Xd = ds.X.to_dense()
    draws = 20_000
    vals = np.empty(draws)
    for k in range(draws):
        S = draw_bucket_sample(plan, rng)
        agg = Xd[:, S] @ h[S]
        vals[k] = agg @ agg
    se = vals.std() / np.sqrt(draws)
    assert abs(vals.mean() - exact) < 4 * se + 1e-9


def test_check_eso_accepts_correct_coefficients():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = int(rng.integers(3, 9))
        ds = random_dataset(rng, n, int(rng.integers(2, 6)))
        tau = int(rng.integers(1, min(n, 3) + 1))
        _, plan = random_plan(rng, n, tau)
        rep = check_eso(ds, enumerate_bucket_sampling(plan), plan.p, v_bucket(ds, plan), rng=rng)
        assert rep.passed, rep


def test_check_eso_rejects_too_small_v():
    # two identical fully-correlated columns, always both sampled
    X = np.ones((2, 2))
    ds = Dataset.from_dense(X, [1.0, -1.0])
    part = make_partition(2, 2)
    plan = uniform_bucket_plan(part)
    enum = enumerate_bucket_sampling(plan)
    # per-column norms alone ignore the cross term: lhs for h=(1,1) is 8, rhs 4
    rep = check_eso(ds, enum, plan.p, ds.L)
    assert not rep.passed
    assert rep.max_violation > 0.5


def test_lambda_prime_examples():
    assert lambda_prime(np.zeros((3, 3))) == 0.0
    np.testing.assert_allclose(lambda_prime(np.eye(4)), 1.0, atol=1e-12)
    np.testing.assert_allclose(lambda_prime(np.ones((5, 5))), 5.0, atol=1e-10)
    # support restriction: padding with zero rows/cols changes nothing
    M = np.ones((3, 3))
    P = np.zeros((5, 5))
    P[:3, :3] = M
    np.testing.assert_allclose(lambda_prime(P), 3.0, atol=1e-10)


def test_lambda_prime_scale_invariance():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((4, 6))
    M = A @ A.T
    s = rng.random(4) + 0.1
    scaled = M * np.outer(s, s)
    np.testing.assert_allclose(
        lambda_prime(scaled), lambda_prime(M), rtol=1e-10
    )


def test_lemma_psd_certificates():
    rng = np.random.default_rng(5)
    for _ in range(40):
        n = int(rng.integers(3, 13))
        tau = int(rng.integers(1, min(n, 4) + 1))
        _, plan = random_plan(rng, n, tau)
        k = int(rng.integers(1, n + 1))
        J = np.sort(rng.choice(n, size=k, replace=False))
        rep = check_lemma2_lemma3(J, plan)
        assert rep.passed, (J, rep)


def test_reconstructed_v_is_tighter_and_valid():
    rng = np.random.default_rng(6)
    for _ in range(10):
        n = int(rng.integers(3, 9))
        ds = random_dataset(rng, n, int(rng.integers(2, 5)))
        tau = int(rng.integers(1, min(n, 3) + 1))
        _, plan = random_plan(rng, n, tau)
        exact_v = reconstruct_v(ds, plan, ds.features)
        loose_v = v_bucket(ds, plan)
        assert (exact_v <= loose_v + 1e-10).all()
        assert (loose_v <= v_bucket_conservative(ds, plan) + 1e-10).all()
        rep = check_eso(ds, enumerate_bucket_sampling(plan), plan.p, exact_v, rng=rng)
        assert rep.passed, rep


def test_min_eigenvalue_agrees_with_numpy():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((6, 6))
    M = A + A.T
    np.testing.assert_allclose(
        min_eigenvalue(M), np.linalg.eigvalsh(M).min(), rtol=1e-10
    )


def test_enumeration_size_guard():
    part = make_partition(64, 16)
    plan = uniform_bucket_plan(part)
    with pytest.raises(ValueError):
        enumerate_bucket_sampling(plan)
