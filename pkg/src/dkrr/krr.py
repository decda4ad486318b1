"""
Single-machine kernel ridge regression.

The dual coefficients solve ``(K + lam * n * I) alpha = y``, i.e. the 1/n
empirical-risk scaling is folded into the shift.  The fitted function is
``f(x) = sum_i alpha_i K(x, x_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .data import Dataset
from .errors import InvalidInputError, NumericalFailureError
from .kernel import KernelSpec, as_points, gram

__all__ = ["SpdFactor", "factor_spd", "solve_spd", "KrrModel", "fit", "predict", "shifted_gram_factor"]


@dataclass(frozen=True)
class SpdFactor:
    """A Cholesky factor of a symmetric positive-definite matrix, reusable across solves."""

    cho: tuple
    size: int
    jitter: float = 0.0

    def solve(self, B: np.ndarray) -> np.ndarray:
        return linalg.cho_solve(self.cho, B, check_finite=False)


def factor_spd(A: np.ndarray, lam: float | None = None) -> SpdFactor:
    """Cholesky-factor ``A``; on failure retry once with jitter 1e-12 * trace(A) / n."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    try:
        return SpdFactor(linalg.cho_factor(A, lower=True, check_finite=True), n)
    except linalg.LinAlgError:
        pass
    jitter = 1e-12 * float(np.trace(A)) / n
    try:
        cho = linalg.cho_factor(A + jitter * np.eye(n), lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailureError(
            f"Cholesky factorization failed for a {n}x{n} system (lambda={lam})", size=n, lam=lam
        ) from exc
    return SpdFactor(cho, n, jitter)


def solve_spd(A: np.ndarray, B: np.ndarray, lam: float | None = None) -> np.ndarray:
    """Solve ``A X = B`` for symmetric positive-definite ``A``."""
    B = np.asarray(B, dtype=np.float64)
    return factor_spd(A, lam).solve(B)


def shifted_gram_factor(K: np.ndarray, lam: float) -> SpdFactor:
    """Factor of ``K + lam * n * I`` for an n x n Gram matrix ``K``."""
    n = K.shape[0]
    A = K + (lam * n) * np.eye(n)
    return factor_spd(A, lam)


@dataclass
class KrrModel:
    anchors: np.ndarray
    alpha: np.ndarray
    lam: float

    def __post_init__(self):
        if self.anchors.shape[0] != self.alpha.shape[0]:
            raise InvalidInputError("anchors and alpha must have equal length")
        if not self.lam > 0:
            raise InvalidInputError(f"lambda must be positive, got {self.lam}")


def fit(data: Dataset, kernel: KernelSpec, lam: float, K: np.ndarray | None = None) -> KrrModel:
    """Fit KRR on ``data``.  A precomputed Gram matrix ``K`` may be passed to skip kernel evaluation."""
    if not lam > 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    if len(data) < 1:
        raise InvalidInputError("cannot fit on an empty dataset")
    if K is None:
        K = gram(kernel, data.inputs)
    alpha = shifted_gram_factor(K, lam).solve(data.outputs)
    return KrrModel(data.inputs, alpha, float(lam))


def predict(model: KrrModel, query, kernel: KernelSpec) -> np.ndarray:
    Q = as_points(query, dim=model.anchors.shape[1])
    return gram(kernel, Q, model.anchors) @ model.alpha
