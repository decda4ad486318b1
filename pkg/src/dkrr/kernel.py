"""
Mercer kernels and Gram matrices.

Two fixed kernels are provided for the synthetic benchmarks:

* ``MinKernel``      K(x, x') = 1 + min(x, x')          on [0, 1]
* ``WendlandKernel`` K(x, x') = h(||x - x'||_2),  h(r) = (1 - r)^4 (4r + 1) for r <= 1, else 0

plus ``CustomKernel`` wrapping any symmetric PSD callable.  Every kernel is
evaluated in float64 on point arrays of shape ``(n, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "KernelSpec",
    "MinKernel",
    "WendlandKernel",
    "CustomKernel",
    "as_points",
    "evaluate",
    "gram",
    "kernel_from_name",
    "wendland_profile",
]


def as_points(x, dim: int | None = None) -> np.ndarray:
    """Coerce scalars, 1-D sequences or 2-D arrays to a float64 ``(n, d)`` array.

    A 1-D input is read as ``n`` one-dimensional points unless ``dim`` says
    otherwise, in which case it is read as a single point.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        if dim is not None and dim > 1 and arr.shape[0] == dim:
            arr = arr.reshape(1, dim)
        else:
            arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise InvalidInputError(f"points must be at most 2-D, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise InvalidInputError(f"expected points of dimension {dim}, got {arr.shape[1]}")
    return arr


def wendland_profile(r: np.ndarray) -> np.ndarray:
    """h(r) = (1-r)^4 (4r+1) on [0, 1], zero outside."""
    r = np.asarray(r, dtype=np.float64)
    s = np.clip(1.0 - r, 0.0, None)
    out = s**4 * (4.0 * r + 1.0)
    # r = 1 takes the polynomial branch; it evaluates to 0 anyway
    return np.where(r <= 1.0, out, 0.0)


class KernelSpec:
    """Base class: subclasses implement ``_matrix(X, Y)`` on validated arrays."""

    name: str = "abstract"

    def check_dim(self, dim: int) -> None:
        pass

    def _matrix(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, X, Y) -> np.ndarray:
        return gram(self, X, Y)


@dataclass(frozen=True)
class MinKernel(KernelSpec):
    """K1(x, x') = 1 + min(x, x') for one-dimensional inputs."""

    name: str = "min"

    def check_dim(self, dim: int) -> None:
        if dim != 1:
            raise InvalidInputError(f"the min kernel is defined for d = 1 only, got d = {dim}")

    def _matrix(self, X, Y):
        return 1.0 + np.minimum(X[:, 0][:, None], Y[:, 0][None, :])


@dataclass(frozen=True)
class WendlandKernel(KernelSpec):
    """K2(x, x') = h(||x - x'||_2) with compact support on the unit ball."""

    name: str = "wendland"

    def _matrix(self, X, Y):
        # accumulate per coordinate to keep the temporary at a x b, not a x b x d
        sq = np.zeros((X.shape[0], Y.shape[0]))
        for k in range(X.shape[1]):
            diff = X[:, k][:, None] - Y[:, k][None, :]
            sq += diff * diff
        return wendland_profile(np.sqrt(sq))


@dataclass(frozen=True)
class CustomKernel(KernelSpec):
    """User-supplied kernel.

    ``func(x, y)`` receives two 1-D points and returns a real.  It is trusted to
    be symmetric and positive semi-definite; nothing is checked at call time.
    """

    func: Callable[[np.ndarray, np.ndarray], float] = None  # type: ignore[assignment]
    name: str = "custom"

    def _matrix(self, X, Y):
        out = np.empty((X.shape[0], Y.shape[0]))
        for i in range(X.shape[0]):
            for j in range(Y.shape[0]):
                out[i, j] = self.func(X[i], Y[j])
        return out


def gram(kernel: KernelSpec, rows, cols=None) -> np.ndarray:
    """Matrix of kernel values, entry (i, j) = K(rows[i], cols[j]).

    With ``cols`` omitted (or the very same array object) the result is the
    square Gram matrix, made symmetric to exact bit equality.
    """
    X = as_points(rows)
    same = cols is None or cols is rows
    Y = X if same else as_points(cols)
    if X.shape[1] != Y.shape[1]:
        raise InvalidInputError(
            f"dimension mismatch: rows have d = {X.shape[1]}, cols have d = {Y.shape[1]}"
        )
    kernel.check_dim(X.shape[1])
    G = np.asarray(kernel._matrix(X, Y), dtype=np.float64)
    if same:
        upper = np.triu(G)
        G = upper + np.triu(G, 1).T
    return G


def evaluate(kernel: KernelSpec, x, x_prime) -> float:
    """K(x, x') for a single pair of points."""
    a = np.atleast_1d(np.asarray(x, dtype=np.float64))
    b = np.atleast_1d(np.asarray(x_prime, dtype=np.float64))
    if a.ndim != 1 or b.ndim != 1:
        raise InvalidInputError("evaluate expects two single points")
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    kernel.check_dim(a.shape[0])
    return float(kernel._matrix(a[None, :], b[None, :])[0, 0])


_NAMED = {
    "min": MinKernel,
    "k1": MinKernel,
    "wendland": WendlandKernel,
    "k2": WendlandKernel,
}


def kernel_from_name(name: str) -> KernelSpec:
    """Look up a built-in kernel by its config name (``"min"`` or ``"wendland"``)."""
    try:
        return _NAMED[name.lower()]()
    except KeyError:
        raise InvalidInputError(f"unknown kernel {name!r}; choose from {sorted(_NAMED)}") from None
