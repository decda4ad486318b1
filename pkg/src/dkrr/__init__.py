"""Distributed kernel ridge regression with Newton-type communication rounds."""

from .data import Dataset, Partition, SyntheticTask, generate, partition_even
from .distributed import DkrrModel, predict_dkrr, run_dkrr
from .errors import ConfigurationError, DkrrError, InvalidInputError, InvalidStateError, NumericalFailureError
from .kernel import CustomKernel, MinKernel, WendlandKernel, evaluate, gram, kernel_from_name
from .krr import KrrModel, fit, predict

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Partition",
    "SyntheticTask",
    "generate",
    "partition_even",
    "DkrrModel",
    "run_dkrr",
    "predict_dkrr",
    "KrrModel",
    "fit",
    "predict",
    "MinKernel",
    "WendlandKernel",
    "CustomKernel",
    "gram",
    "evaluate",
    "kernel_from_name",
    "DkrrError",
    "InvalidInputError",
    "InvalidStateError",
    "NumericalFailureError",
    "ConfigurationError",
]
