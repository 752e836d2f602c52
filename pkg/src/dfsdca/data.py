"""Column-major sparse datasets: LibSVM I/O and synthetic generators."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

DISTRIBUTIONS = ("uniform", "chisq1", "chisq10", "chisq100", "extreme")


class ParseError(ValueError):
    """Raised when a LibSVM file violates the expected format."""


def _as_int64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def _as_float64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


@dataclass(frozen=True)
class SparseColumnMatrix:
    """A d x n sparse matrix stored column-major.

    Column i is the feature vector of example i. Within a column, entries are
    sorted by row index; explicit zeros and duplicate rows are never stored.
    Instances are treated as immutable once built.
    """

    d: int
    n: int
    indptr: np.ndarray  # (n+1,) int64, column start offsets
    rows: np.ndarray  # (nnz,) int64
    vals: np.ndarray  # (nnz,) float64

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def col(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Row indices and values of column i (views, do not mutate)."""
        a, b = self.indptr[i], self.indptr[i + 1]
        return self.rows[a:b], self.vals[a:b]

    def col_ids(self) -> np.ndarray:
        """Column index of every stored entry, aligned with rows/vals."""
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.d, self.n))
        out[self.rows, self.col_ids()] = self.vals
        return out

    def column_squared_norms(self) -> np.ndarray:
        sq = self.vals * self.vals
        out = np.zeros(self.n)
        np.add.at(out, self.col_ids(), sq)
        return out


def build_matrix(
    d: int, n: int, col_ids, row_ids, vals
) -> tuple[SparseColumnMatrix, np.ndarray]:
    """Assemble a SparseColumnMatrix from unordered triplets.

    Sorts entries column-major, drops explicit zeros, and deletes features
    whose support becomes empty (compacting row indices). Returns the matrix
    together with the original indices of the retained features.

    Duplicate (row, col) pairs are rejected: the caller is expected to have
    resolved them (the parser reports them with a line number).
    """
    col_ids = _as_int64(col_ids)
    row_ids = _as_int64(row_ids)
    vals = _as_float64(vals)
    if not (len(col_ids) == len(row_ids) == len(vals)):
        raise ValueError("triplet arrays must have equal length")
    keep = vals != 0.0
    col_ids, row_ids, vals = col_ids[keep], row_ids[keep], vals[keep]
    if len(row_ids) and (row_ids.min() < 0 or row_ids.max() >= d):
        raise ValueError("row index out of range")
    if len(col_ids) and (col_ids.min() < 0 or col_ids.max() >= n):
        raise ValueError("column index out of range")

    order = np.lexsort((row_ids, col_ids))
    col_ids, row_ids, vals = col_ids[order], row_ids[order], vals[order]
    same = (col_ids[1:] == col_ids[:-1]) & (row_ids[1:] == row_ids[:-1])
    if same.any():
        k = int(np.flatnonzero(same)[0])
        raise ValueError(f"duplicate entry at row {row_ids[k]}, column {col_ids[k]}")

    kept_features = np.unique(row_ids) if len(row_ids) else np.arange(0)
    if len(kept_features) < d:
        remap = np.full(d, -1, dtype=np.int64)
        remap[kept_features] = np.arange(len(kept_features))
        row_ids = remap[row_ids]
    d_eff = len(kept_features)

    counts = np.bincount(col_ids, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return SparseColumnMatrix(d_eff, n, indptr, row_ids, vals), kept_features


@dataclass(frozen=True)
class FeatureIndex:
    """Per-feature support lists: which examples carry feature j.

    fptr/fidx mirror the CSC layout transposed; the examples of feature j are
    fidx[fptr[j]:fptr[j+1]], ascending. Every retained feature is nonempty.
    """

    d: int
    fptr: np.ndarray  # (d+1,) int64
    fidx: np.ndarray  # (nnz,) int64, example ids

    @property
    def counts(self) -> np.ndarray:
        """|J_j| for every feature."""
        return np.diff(self.fptr)

    def examples_of(self, j: int) -> np.ndarray:
        return self.fidx[self.fptr[j] : self.fptr[j + 1]]

    @staticmethod
    def from_matrix(m: SparseColumnMatrix) -> "FeatureIndex":
        order = np.argsort(m.rows, kind="stable")  # stable keeps example ids sorted
        fidx = m.col_ids()[order]
        counts = np.bincount(m.rows, minlength=m.d)
        fptr = np.zeros(m.d + 1, dtype=np.int64)
        np.cumsum(counts, out=fptr[1:])
        return FeatureIndex(m.d, fptr, fidx)


@dataclass(frozen=True)
class Dataset:
    """Sparse design matrix plus labels and cached column norms.

    X.d features by X.n examples; y in {-1,+1}; L[i] = ||X_:i||^2 > 0. The
    feature_ids field maps retained features back to their pre-compaction
    indices (identity unless empty features were dropped at ingestion).
    """

    X: SparseColumnMatrix
    y: np.ndarray
    L: np.ndarray
    features: FeatureIndex
    feature_ids: np.ndarray

    @property
    def n(self) -> int:
        return self.X.n

    @property
    def d(self) -> int:
        return self.X.d

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.array([self.d, self.n], dtype=np.int64).tobytes())
        h.update(self.X.indptr.tobytes())
        h.update(self.X.rows.tobytes())
        h.update(self.X.vals.tobytes())
        h.update(self.y.tobytes())
        return h.hexdigest()[:16]

    @staticmethod
    def from_matrix(
        m: SparseColumnMatrix, y, feature_ids=None, origin: str = "dataset"
    ) -> "Dataset":
        y = _as_float64(y)
        if y.shape != (m.n,):
            raise ValueError(f"{origin}: expected {m.n} labels, got {y.shape}")
        if not np.isfinite(y).all():
            raise ValueError(f"{origin}: labels must be finite")
        L = m.column_squared_norms()
        if (L <= 0).any():
            i = int(np.argmin(L))
            raise ValueError(f"{origin}: example {i} has no nonzero features")
        if feature_ids is None:
            feature_ids = np.arange(m.d, dtype=np.int64)
        return Dataset(m, y, L, FeatureIndex.from_matrix(m), feature_ids)

    @staticmethod
    def from_dense(X: np.ndarray, y) -> "Dataset":
        """Build from a dense d x n array (columns are examples)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("expected a 2-d array")
        rows, cols = np.nonzero(X)
        m, kept = build_matrix(X.shape[0], X.shape[1], cols, rows, X[rows, cols])
        return Dataset.from_matrix(m, y, kept)


def _normalize_labels(raw: np.ndarray, origin: str) -> np.ndarray:
    """Map {0,1} and {1,2} label conventions onto {-1,+1}."""
    distinct = set(np.unique(raw).tolist())
    if distinct == {0.0, 1.0}:
        return np.where(raw == 0.0, -1.0, 1.0)
    if distinct == {1.0, 2.0}:
        return np.where(raw == 1.0, -1.0, 1.0)
    if distinct <= {-1.0, 1.0}:
        return raw
    raise ParseError(f"{origin}: unsupported label set {sorted(distinct)}")


def parse_libsvm(path) -> Dataset:
    """Read a LibSVM text file into a Dataset.

    One example per line: `<label> <idx>:<value> ...` with 1-based, strictly
    increasing feature indices. Labels {0,1} or {1,2} are normalized onto
    {-1,+1}. Malformed tokens, duplicate or non-increasing indices, and
    featureless examples raise ParseError with the offending line number.
    """
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()

    labels: list[float] = []
    col_ids: list[int] = []
    row_ids: list[int] = []
    vals: list[float] = []
    n = 0
    for lineno, line in enumerate(lines, start=1):
        tokens = line.split()
        if not tokens:
            continue
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad label {tokens[0]!r}") from None
        prev = 0
        seen_any = False
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"{path}:{lineno}: bad token {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad token {tok!r}") from None
            if idx < 1:
                raise ParseError(f"{path}:{lineno}: feature index {idx} < 1")
            if idx == prev:
                raise ParseError(f"{path}:{lineno}: duplicate feature index {idx}")
            if idx < prev:
                raise ParseError(
                    f"{path}:{lineno}: feature indices must increase ({idx} after {prev})"
                )
            prev = idx
            if val != 0.0:
                col_ids.append(n)
                row_ids.append(idx - 1)
                vals.append(val)
                seen_any = True
        if not seen_any:
            raise ParseError(f"{path}:{lineno}: example has no nonzero features")
        labels.append(label)
        n += 1

    if n == 0:
        raise ParseError(f"{path}: empty file")
    d = max(row_ids) + 1
    y = _normalize_labels(np.array(labels), path)
    m, kept = build_matrix(d, n, col_ids, row_ids, vals)
    return Dataset.from_matrix(m, y, kept, origin=path)


def to_libsvm(dataset: Dataset, path) -> None:
    """Write a Dataset back out as LibSVM text (1-based indices)."""
    with open(str(path), "w", encoding="utf-8") as fh:
        for i in range(dataset.n):
            rows, vals = dataset.X.col(i)
            label = dataset.y[i]
            head = str(int(label)) if label == int(label) else repr(float(label))
            feats = " ".join(f"{r + 1}:{float(v)!r}" for r, v in zip(rows, vals))
            fh.write(f"{head} {feats}\n")


def draw_squared_norms(dist: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the target squared column norms for one synthetic instance."""
    if dist == "uniform":
        return 2.0 * rng.random(n)
    if dist == "extreme":
        L = np.ones(n)
        L[0] = 1000.0
        return L
    if dist.startswith("chisq"):
        k = int(dist[len("chisq") :])
        return rng.chisquare(k, n)
    raise ValueError(f"unknown distribution {dist!r}")


def generate_synthetic(
    n: int, d: int, omega_target: float, dist: str, seed: int
) -> Dataset:
    """Generate a random sparse instance with controlled norm imbalance.

    Each feature j receives a density drawn uniformly from an interval with
    mean omega_target (clipped to [1/n, 1]), and round(density*n) support
    examples chosen uniformly at random with standard normal values. Columns
    are then rescaled so that ||X_:i||^2 matches a draw from `dist`:

    - uniform:  2 * U(0,1)
    - chisqK:   chi-squared with K degrees of freedom
    - extreme:  all ones except the first column at 1000

    Labels are sign(X_:i^T wbar + 0.1 * noise) for a standard normal wbar.
    An example left with no features gets one standard normal entry at a
    uniformly drawn coordinate, so every column is nonempty.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if not 0.0 < omega_target <= 1.0:
        raise ValueError("omega_target must lie in (0, 1]")
    if dist not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {dist!r}")
    rng = np.random.default_rng(seed)

    lo = max(1.0 / n, 2.0 * omega_target - 1.0)
    hi = max(lo, min(1.0, 2.0 * omega_target))
    density = rng.uniform(lo, hi, size=d)
    support_sizes = np.clip(np.rint(density * n), 1, n).astype(np.int64)

    col_parts, row_parts, val_parts = [], [], []
    for j in range(d):
        k = support_sizes[j]
        col_parts.append(rng.choice(n, size=k, replace=False))
        row_parts.append(np.full(k, j, dtype=np.int64))
        val_parts.append(rng.standard_normal(k))
    col_ids = np.concatenate(col_parts)
    row_ids = np.concatenate(row_parts)
    vals = np.concatenate(val_parts)

    filled = np.zeros(n, dtype=bool)
    filled[col_ids] = True
    for i in np.flatnonzero(~filled):
        col_ids = np.append(col_ids, i)
        row_ids = np.append(row_ids, rng.integers(d))
        vals = np.append(vals, rng.standard_normal())

    L = draw_squared_norms(dist, n, rng)
    current = np.zeros(n)
    np.add.at(current, col_ids, vals * vals)
    vals = vals * np.sqrt(L / current)[col_ids]

    wbar = rng.standard_normal(d)
    margins = np.zeros(n)
    np.add.at(margins, col_ids, vals * wbar[row_ids])
    y = np.sign(margins + 0.1 * rng.standard_normal(n))
    y[y == 0.0] = 1.0

    m, kept = build_matrix(d, n, col_ids, row_ids, vals)
    return Dataset.from_matrix(m, y, kept, origin=f"synthetic:{dist}")
