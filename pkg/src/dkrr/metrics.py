"""Error criteria, machine-count thresholds and spectral diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidInputError
from .kernel import KernelSpec, gram

__all__ = [
    "CRITERIA",
    "MetricsRecord",
    "mse",
    "relative_error",
    "max_machines",
    "effective_dimension",
    "empirical_effective_dimension",
    "diag_quantities",
    "contraction_estimate",
    "CONVERGENCE_FLOOR",
]

# GMSE/AE/AEC/RE/REC are the core criteria; the rest are emitted by the
# motivation and complexity experiments.
CRITERIA = (
    "GMSE",
    "AE",
    "AEC",
    "RE",
    "REC",
    "LOCAL",
    "lambda",
    "mbar_B",
    "mhat_B",
    "m_star",
    "m_star_hat",
    "omega_dkrr",
    "omega_dkrr_ell",
)

CONVERGENCE_FLOOR = 1e-12


@dataclass
class MetricsRecord:
    simulation: str
    task: str
    kernel: str
    N: int
    m: int
    ell: int
    lam: float
    trial: int
    seed: int
    criterion: str
    value: float
    wall_time_s: float = 0.0
    diverged: bool = False
    comm_floats: int = 0

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise InvalidInputError(f"unknown criterion {self.criterion!r}")
        if not self.diverged and not (self.value >= 0):
            raise InvalidInputError(f"{self.criterion} value must be >= 0, got {self.value}")


def mse(predictions, truths) -> float:
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    t = np.asarray(truths, dtype=np.float64).reshape(-1)
    if p.shape != t.shape or p.size == 0:
        raise InvalidInputError(f"need equal non-empty lengths, got {p.size} and {t.size}")
    diff = p - t
    return float(np.mean(diff * diff))


def relative_error(dist_mse: float, gmse: float) -> float:
    """|dist_mse - gmse| / gmse; serves as both RE (from AE) and REC (from AEC)."""
    if not gmse > 0:
        raise InvalidInputError(f"gmse must be positive, got {gmse}")
    return abs(dist_mse - gmse) / gmse


def max_machines(re_values: Mapping[int, float], epsilon: float = 0.05) -> int | None:
    """Largest scanned m whose relative error is below ``epsilon``; ``None`` if there is none."""
    if not re_values:
        raise InvalidInputError("the machine grid is empty")
    ok = [m for m, re in re_values.items() if re < epsilon]
    return max(ok) if ok else None


def effective_dimension(gram_eigenvalues, lam: float, n: int | None = None) -> float:
    """sum_i s_i / (s_i + lam) over the eigenvalues s_i of the normalized Gram matrix K / n.

    ``n`` is accepted for bookkeeping only; the eigenvalues are expected to be
    normalized already.  Round-off negatives down to -1e-10 are clipped to 0.
    """
    if not lam > 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    s = np.asarray(gram_eigenvalues, dtype=np.float64)
    if np.any(s < -1e-10):
        raise InvalidInputError(f"eigenvalue {s.min()} is below -1e-10; kernel is not PSD")
    s = np.clip(s, 0.0, None)
    return float(np.sum(s / (s + lam)))


def empirical_effective_dimension(kernel: KernelSpec, inputs, lam: float) -> float:
    """Plug-in effective dimension from the spectrum of ``gram(inputs) / n``."""
    K = gram(kernel, inputs)
    n = K.shape[0]
    eig = np.linalg.eigvalsh(K / n)
    # relative round-off of eigvalsh scales with the largest eigenvalue
    floor = -max(1e-10, 1e-12 * float(np.abs(eig).max()))
    if eig.min() < floor:
        raise InvalidInputError(f"Gram matrix has eigenvalue {eig.min()}; kernel is not PSD")
    return effective_dimension(np.clip(eig, 0.0, None), lam, n)


def diag_quantities(n: int, lam: float, eff_dim: float) -> tuple[float, float]:
    """The two sample-size diagnostics.

    A = (1/sqrt(n)) (1/sqrt(n lam) + sqrt(N(lam)))
    B = (1 + log N(lam)) / (lam n) + sqrt((1 + log N(lam)) / (lam n))
    """
    if n < 1 or not lam > 0:
        raise InvalidInputError(f"need n >= 1 and lambda > 0, got n = {n}, lambda = {lam}")
    if not eff_dim >= 1:
        raise InvalidInputError(f"effective dimension must be >= 1, got {eff_dim}")
    a = (1.0 / math.sqrt(n)) * (1.0 / math.sqrt(n * lam) + math.sqrt(eff_dim))
    t = (1.0 + math.log(eff_dim)) / (lam * n)
    return a, t + math.sqrt(t)


def contraction_estimate(iterate_distances: Sequence[float], floor: float = CONVERGENCE_FLOOR) -> np.ndarray:
    """Per-round ratios d_l / d_{l-1}, stopping once the previous distance is under ``floor``."""
    d = np.asarray(iterate_distances, dtype=np.float64)
    ratios = []
    for ell in range(1, d.size):
        if d[ell - 1] < floor:
            break
        ratios.append(d[ell] / d[ell - 1])
    return np.asarray(ratios)
