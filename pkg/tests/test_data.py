import numpy as np
import pytest

from dfsdca.data import (
    Dataset,
    ParseError,
    build_matrix,
    draw_squared_norms,
    generate_synthetic,
    parse_libsvm,
    to_libsvm,
)

from helpers import random_dataset


def write(tmp_path, text, name="data.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_parse_basic(tmp_path):
    path = write(tmp_path, "+1 1:0.5 3:2.0\n-1 2:1.5\n")
    ds = parse_libsvm(path)
    assert ds.n == 2 and ds.d == 3
    dense = ds.X.to_dense()
    np.testing.assert_allclose(dense[:, 0], [0.5, 0.0, 2.0])
    np.testing.assert_allclose(dense[:, 1], [0.0, 1.5, 0.0])
    np.testing.assert_allclose(ds.y, [1.0, -1.0])
    np.testing.assert_allclose(ds.L, [0.25 + 4.0, 2.25])


def test_parse_zero_one_labels(tmp_path):
    ds = parse_libsvm(write(tmp_path, "0 1:1\n1 1:2\n"))
    np.testing.assert_array_equal(ds.y, [-1.0, 1.0])


def test_parse_one_two_labels(tmp_path):
    ds = parse_libsvm(write(tmp_path, "2 1:1\n1 1:2\n"))
    np.testing.assert_array_equal(ds.y, [1.0, -1.0])


def test_parse_rejects_other_label_sets(tmp_path):
    with pytest.raises(ParseError):
        parse_libsvm(write(tmp_path, "3 1:1\n-1 1:2\n"))


def test_parse_error_reports_line_numbers(tmp_path):
    cases = [
        ("+1 1:1\nnope 1:2\n", "2"),  # unreadable label
        ("+1 1:1\n-1 banana\n", "2"),  # token without idx:value
        ("+1 0:1\n", "1"),  # indices are 1-based
        ("+1 2:1 2:3\n", "1"),  # duplicate index
        ("+1 3:1 2:1\n", "1"),  # decreasing indices
        ("+1 1:1\n-1\n", "2"),  # example with no features
    ]
    for text, lineno in cases:
        path = write(tmp_path, text)
        with pytest.raises(ParseError, match=rf"{lineno}:"):
            parse_libsvm(path)


def test_parse_empty_file(tmp_path):
    with pytest.raises(ParseError):
        parse_libsvm(write(tmp_path, ""))


def test_parse_compacts_unused_features(tmp_path):
    # feature 2 never appears; indices past it shift down
    ds = parse_libsvm(write(tmp_path, "+1 1:1 3:1\n-1 3:2\n"))
    assert ds.d == 2
    np.testing.assert_array_equal(ds.feature_ids, [0, 2])


def test_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    ds = random_dataset(rng, 17, 9)
    path = tmp_path / "out.txt"
    to_libsvm(ds, path)
    back = parse_libsvm(str(path))
    np.testing.assert_array_equal(back.y, ds.y)
    np.testing.assert_allclose(back.X.to_dense(), ds.X.to_dense(), rtol=0, atol=0)
    assert back.digest() == ds.digest()


def test_build_matrix_drops_zeros():
    m, kept = build_matrix(3, 2, [0, 0, 1], [0, 1, 2], [1.0, 0.0, 2.0])
    assert m.nnz == 2
    assert m.d == 2  # feature 1 vanished with its only entry
    np.testing.assert_array_equal(kept, [0, 2])


def test_build_matrix_rejects_duplicates():
    with pytest.raises(ValueError):
        build_matrix(2, 2, [0, 0], [1, 1], [1.0, 2.0])


def test_from_matrix_rejects_empty_column():
    m, _ = build_matrix(2, 2, [0], [0], [1.0])
    with pytest.raises(ValueError):
        Dataset.from_matrix(m, [1.0, -1.0])


def test_feature_index():
    rng = np.random.default_rng(3)
    ds = random_dataset(rng, 12, 6)
    dense = ds.X.to_dense()
    for j in range(ds.d):
        np.testing.assert_array_equal(
            ds.features.examples_of(j), np.flatnonzero(dense[j])
        )
    assert ds.features.counts.sum() == ds.X.nnz


def test_synthetic_mean_density():
    for omega in (0.1, 0.3, 0.5, 0.8):
        for seed in range(3):
            ds = generate_synthetic(400, 60, omega, "uniform", seed)
            got = ds.X.nnz / (400 * ds.d)
            assert abs(got - omega) < 0.05, (omega, seed, got)


def test_synthetic_extreme_norms_exact():
    ds = generate_synthetic(300, 40, 0.4, "extreme", 0)
    L = np.sort(ds.L)
    np.testing.assert_allclose(L[:-1], 1.0, rtol=1e-9)
    np.testing.assert_allclose(L[-1], 1000.0, rtol=1e-9)
    np.testing.assert_allclose(ds.L, ds.X.column_squared_norms(), rtol=1e-12)


def test_synthetic_uniform_norm_range():
    ds = generate_synthetic(500, 50, 0.3, "uniform", 1)
    assert (ds.L > 0).all() and (ds.L <= 2.0).all()


def test_synthetic_deterministic():
    a = generate_synthetic(100, 20, 0.4, "chisq10", 5)
    b = generate_synthetic(100, 20, 0.4, "chisq10", 5)
    c = generate_synthetic(100, 20, 0.4, "chisq10", 6)
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()


def test_synthetic_repairs_empty_columns():
    # 2 features at minimal density across 80 examples: most columns start empty
    ds = generate_synthetic(80, 2, 0.01, "uniform", 2)
    assert ds.n == 80
    assert (ds.X.column_squared_norms() > 0).all()


def test_synthetic_labels_are_signs():
    ds = generate_synthetic(150, 25, 0.5, "chisq1", 9)
    assert set(np.unique(ds.y)) <= {-1.0, 1.0}


def test_draw_squared_norms_shapes():
    rng = np.random.default_rng(0)
    for dist in ("uniform", "extreme", "chisq1", "chisq10", "chisq100"):
        L = draw_squared_norms(dist, 1000, rng)
        assert L.shape == (1000,) and (L >= 0).all()
    with pytest.raises(ValueError):
        draw_squared_norms("cauchy", 10, rng)
