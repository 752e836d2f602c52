"""Smooth per-example losses phi_i(margin) with 1/gamma-Lipschitz gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOGISTIC_CODE = 0
SQUARE_CODE = 1
EXP_CLAMP = 500.0  # |y*margin| beyond this saturates the logistic derivative


@dataclass(frozen=True)
class LossModel:
    """A loss family: values, derivatives in the margin, and its gamma.

    gamma is the reciprocal of the gradient's Lipschitz constant; it scales
    both the admissible stepsize and the dual term of the solver potential.
    """

    kind: str
    gamma: float
    code: int

    def value(self, margin, y):
        margin = np.asarray(margin, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.code == LOGISTIC_CODE:
            return np.logaddexp(0.0, -y * margin)
        return 0.5 * (margin - y) ** 2

    def derivative(self, margin, y):
        margin = np.asarray(margin, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.code == LOGISTIC_CODE:
            t = np.clip(y * margin, -EXP_CLAMP, EXP_CLAMP)
            return -y / (1.0 + np.exp(t))
        return margin - y

    def second_derivative(self, margin, y):
        margin = np.asarray(margin, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.code == LOGISTIC_CODE:
            t = np.clip(y * margin, -EXP_CLAMP, EXP_CLAMP)
            s = 1.0 / (1.0 + np.exp(-t))
            return s * (1.0 - s)
        return np.ones_like(margin)


def make_loss(kind: str) -> LossModel:
    if kind == "logistic":
        return LossModel("logistic", 4.0, LOGISTIC_CODE)
    if kind == "square":
        return LossModel("square", 1.0, SQUARE_CODE)
    raise ValueError(f"unknown loss {kind!r}")
