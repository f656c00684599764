"""Metarounding: turn a fractional point into a dominated distribution over combinatorial vectors."""

from .engine import (
    ColumnSet,
    MetaroundingConfig,
    MetaroundingResult,
    corrective_step,
    gap,
    metaround,
    refine,
    sample,
)
from .estimator import MetaRounder
from .exceptions import (
    CertificateError,
    DimensionMismatch,
    EmptyPolytope,
    GenerationFailed,
    IterationLimit,
    IterationLimitExceeded,
    MetaroundingError,
    NotInPolytope,
    TooLarge,
)
from .geometry import build_polytope, entropy, grad_hstar, hstar_value, linear_max
from .online import OnlineConfig, OnlineMetaroundingPlayer, alpha_regret, run_fpl_baseline, run_online

__version__ = "0.1.0"

__all__ = [
    "CertificateError",
    "ColumnSet",
    "DimensionMismatch",
    "EmptyPolytope",
    "GenerationFailed",
    "IterationLimit",
    "IterationLimitExceeded",
    "MetaRounder",
    "MetaroundingConfig",
    "MetaroundingError",
    "MetaroundingResult",
    "NotInPolytope",
    "OnlineConfig",
    "OnlineMetaroundingPlayer",
    "TooLarge",
    "alpha_regret",
    "build_polytope",
    "corrective_step",
    "entropy",
    "gap",
    "grad_hstar",
    "hstar_value",
    "linear_max",
    "metaround",
    "refine",
    "run_fpl_baseline",
    "run_online",
    "sample",
]
