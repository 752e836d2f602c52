"""Scikit-learn estimator facade over the dfSDCA solver."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_X_y

from .data import Dataset, build_matrix
from .eso import (
    alternating_optimization_plan,
    lambda_rule,
    practical_importance_plan,
    serial_importance_bundle,
    serial_uniform_bundle,
    tau_nice_bundle,
    uniform_bucket_bundle,
)
from .losses import make_loss
from .sampling import (
    bucket_sampling,
    make_partition,
    serial_importance_sampling,
    serial_uniform_sampling,
    tau_nice_sampling,
)
from .solver import solve

SAMPLINGS = (
    "uniform",
    "importance",
    "tau-nice",
    "tau-uniform",
    "tau-importance",
    "tau-alternating",
)


class DfSdcaClassifier(ClassifierMixin, BaseEstimator):
    """Binary linear classifier trained by dual-free SDCA.

    Parameters
    ----------
    loss : 'logistic' or 'square'.
    lam : L2 regularization strength; None picks max_i ||x_i|| / n.
    sampling : which minibatch sampling to run; the 'tau-*' kinds draw tau
        examples per iteration, with probabilities uniform ('tau-nice',
        'tau-uniform') or tilted toward hard examples ('tau-importance',
        'tau-alternating').
    tau : minibatch size for the 'tau-*' samplings.
    epochs : passes through the data.
    seed : RNG seed for the solver's draws.
    shuffle_seed : if set, examples are shuffled before being cut into
        buckets; by default buckets are contiguous index ranges.

    Attributes
    ----------
    coef_ : (n_features,) weight vector; classes_[1] scores positive.
    theta_ : stepsize used by the run.
    n_iter_ : iterations performed.
    """

    def __init__(
        self,
        loss: str = "logistic",
        lam: float | None = None,
        sampling: str = "tau-importance",
        tau: int = 8,
        epochs: float = 20.0,
        seed: int = 0,
        shuffle_seed: int | None = None,
    ):
        self.loss = loss
        self.lam = lam
        self.sampling = sampling
        self.tau = tau
        self.epochs = epochs
        self.seed = seed
        self.shuffle_seed = shuffle_seed

    def _build_dataset(self, X, y01) -> Dataset:
        cols = sp.coo_matrix(sp.csc_matrix(X).T)
        m, kept = build_matrix(
            cols.shape[0], cols.shape[1], cols.col, cols.row, cols.data
        )
        return Dataset.from_matrix(m, y01, kept, origin="fit")

    def fit(self, X, y):
        X, y = check_X_y(X, y, accept_sparse="csc")
        self.classes_ = np.unique(y)
        if len(self.classes_) != 2:
            raise ValueError(
                f"binary targets required, got {len(self.classes_)} classes"
            )
        ymap = np.where(y == self.classes_[0], -1.0, 1.0)
        dataset = self._build_dataset(X, ymap)

        loss = make_loss(self.loss)
        lam = self.lam if self.lam is not None else lambda_rule(dataset)
        n = dataset.n
        kind = self.sampling
        if kind not in SAMPLINGS:
            raise ValueError(f"unknown sampling {kind!r}; pick one of {SAMPLINGS}")
        tau = 1 if kind in ("uniform", "importance") else int(self.tau)
        if not 1 <= tau <= n:
            raise ValueError(f"tau must lie in [1, {n}], got {tau}")

        if kind == "uniform":
            bundle = serial_uniform_bundle(dataset, lam, loss.gamma)
            spec = serial_uniform_sampling(n)
        elif kind == "importance":
            bundle = serial_importance_bundle(dataset, lam, loss.gamma)
            spec = serial_importance_sampling(bundle.p)
        elif kind == "tau-nice":
            bundle = tau_nice_bundle(dataset, tau, lam, loss.gamma)
            spec = tau_nice_sampling(n, tau)
        else:
            partition = make_partition(n, tau, self.shuffle_seed)
            if kind == "tau-uniform":
                plan, bundle = uniform_bucket_bundle(dataset, partition, lam, loss.gamma)
            elif kind == "tau-importance":
                plan, bundle = practical_importance_plan(dataset, partition, lam, loss.gamma)
            else:
                plan, bundle, _ = alternating_optimization_plan(
                    dataset, partition, lam, loss.gamma
                )
            spec = bucket_sampling(plan)

        state = solve(
            dataset, loss, lam, spec, bundle, epochs=self.epochs, seed=self.seed
        )
        coef = np.zeros(X.shape[1])
        coef[dataset.feature_ids] = state.w
        self.coef_ = coef
        self.intercept_ = 0.0
        self.lam_ = lam
        self.theta_ = state.theta
        self.n_iter_ = state.t
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        if not hasattr(self, "coef_"):
            raise NotFittedError("call fit first")
        X = check_array(X, accept_sparse="csr")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return np.asarray(X @ self.coef_).ravel()

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[(scores >= 0).astype(int)]
