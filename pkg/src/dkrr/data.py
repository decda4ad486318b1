"""Synthetic regression tasks, datasets and even partitions across machines."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .kernel import as_points

__all__ = [
    "SyntheticTask",
    "Dataset",
    "Partition",
    "target_value",
    "generate",
    "partition_even",
    "trial_rng",
    "save_dataset",
    "load_dataset",
]

DEFAULT_NOISE_VARIANCE = 0.2

_TARGET_DIMS = {"g1": 1, "g2": 3}


@dataclass(frozen=True)
class SyntheticTask:
    target: str
    dim: int | None = None
    noise_variance: float = DEFAULT_NOISE_VARIANCE

    def __post_init__(self):
        if self.target not in _TARGET_DIMS:
            raise InvalidInputError(f"unknown target {self.target!r}; expected 'g1' or 'g2'")
        required = _TARGET_DIMS[self.target]
        if self.dim is None:
            object.__setattr__(self, "dim", required)
        elif self.dim != required:
            raise InvalidInputError(f"{self.target} requires dim = {required}, got {self.dim}")
        if not self.noise_variance >= 0:
            raise InvalidInputError(f"noise_variance must be >= 0, got {self.noise_variance}")


@dataclass
class Dataset:
    """Inputs of shape ``(n, d)`` in [0, 1]^d and outputs of shape ``(n,)``."""

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        self.inputs = as_points(self.inputs)
        self.outputs = np.asarray(self.outputs, dtype=np.float64).reshape(-1)
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise InvalidInputError(
                f"{self.inputs.shape[0]} inputs but {self.outputs.shape[0]} outputs"
            )
        if np.any(self.inputs < 0.0) or np.any(self.inputs > 1.0):
            raise InvalidInputError("all input coordinates must lie in [0, 1]")

    def __len__(self) -> int:
        return self.outputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(self.inputs[idx], self.outputs[idx])


@dataclass
class Partition:
    """Disjoint index sets (0-based) whose union is ``range(n)``."""

    shards: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.shards = [np.asarray(s, dtype=np.intp) for s in self.shards]

    @property
    def m(self) -> int:
        return len(self.shards)

    @property
    def n(self) -> int:
        return int(sum(len(s) for s in self.shards))

    @property
    def sizes(self) -> list[int]:
        return [len(s) for s in self.shards]

    def weights(self) -> np.ndarray:
        """|D_j| / |D| for every shard."""
        sizes = np.asarray(self.sizes, dtype=np.float64)
        return sizes / sizes.sum()

    def validate(self, n: int | None = None) -> None:
        n = self.n if n is None else n
        if not self.shards or any(len(s) == 0 for s in self.shards):
            raise InvalidInputError("partition needs at least one non-empty shard")
        allidx = np.sort(np.concatenate(self.shards))
        if allidx.shape[0] != n or not np.array_equal(allidx, np.arange(n)):
            raise InvalidInputError("shards must be disjoint and cover range(n)")


def target_value(task: SyntheticTask, x) -> np.ndarray | float:
    """Noise-free regression function of ``task`` at one point or an ``(n, d)`` array.

    g1(x) = x on [0, 0.5] and 1 - x on (0.5, 1]; g2 is the Wendland-type bump
    (1-r)^6 (35 r^2 + 18 r + 3) of r = ||x||_2 for r <= 1 and zero beyond.
    A scalar is returned for scalar / single-point input.
    """
    raw = np.asarray(x, dtype=np.float64)
    single = raw.ndim == 0 or (raw.ndim == 1 and task.dim > 1)
    if raw.ndim == 1 and task.dim > 1 and raw.shape[0] != task.dim:
        raise InvalidInputError(f"{task.target} expects points of dimension {task.dim}")
    pts = as_points(raw, dim=task.dim)
    if task.target == "g1":
        t = pts[:, 0]
        val = np.where(t <= 0.5, t, 1.0 - t)
    else:
        r = np.sqrt(np.sum(pts * pts, axis=1))
        s = np.clip(1.0 - r, 0.0, None)
        val = np.where(r <= 1.0, s**6 * (35.0 * r * r + 18.0 * r + 3.0), 0.0)
    return float(val[0]) if single else val


def generate(task: SyntheticTask, n: int, noisy: bool, rng: np.random.Generator) -> Dataset:
    """Draw ``n`` inputs uniformly on [0, 1]^d; outputs are target plus optional Gaussian noise."""
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    inputs = rng.random((n, task.dim))
    outputs = target_value(task, inputs)
    if noisy:
        # draw even when the variance is zero so the stream position does not depend on it
        noise = rng.standard_normal(n) * np.sqrt(task.noise_variance)
        outputs = outputs + noise
    return Dataset(inputs, outputs)


def partition_even(n: int, m: int, rng: np.random.Generator) -> Partition:
    """Random permutation of ``range(n)`` cut into ``m`` blocks of sizes ceil/floor(n/m)."""
    if m < 1 or n < 1:
        raise InvalidInputError(f"need n >= 1 and m >= 1, got n = {n}, m = {m}")
    if m > n:
        raise InvalidInputError(f"cannot split {n} samples across {m} machines")
    perm = rng.permutation(n)
    return Partition(np.array_split(perm, m))


def trial_rng(base_seed: int, trial: int) -> np.random.Generator:
    """The RNG stream for one trial: seeded with ``base_seed + trial``."""
    return np.random.default_rng(base_seed + trial)


def save_dataset(data: Dataset, path) -> None:
    """One row per sample: the d input coordinates then the output."""
    table = np.column_stack([data.inputs, data.outputs])
    np.savetxt(Path(path), table, fmt="%.17g")


def load_dataset(path) -> Dataset:
    table = np.loadtxt(Path(path), dtype=np.float64, ndmin=2)
    return Dataset(table[:, :-1], table[:, -1])
