"""Heralded two-mode photonic state engineering toolkit."""

from .errors import (
    ConfigError,
    DomainError,
    HeraldImprobableError,
    HeraldkitError,
    TrainingDivergedError,
    TruncationInsufficientError,
)
from .fock import Experiment, HeraldResult, fidelity, run_experiment
from .targets import CATEGORIES, best_fidelity_over_grid, build_bank, default_grids

__version__ = "0.1.0"

__all__ = [
    "CATEGORIES",
    "ConfigError",
    "DomainError",
    "Experiment",
    "HeraldImprobableError",
    "HeraldResult",
    "HeraldkitError",
    "TrainingDivergedError",
    "TruncationInsufficientError",
    "best_fidelity_over_grid",
    "build_bank",
    "default_grids",
    "fidelity",
    "run_experiment",
    "__version__",
]
