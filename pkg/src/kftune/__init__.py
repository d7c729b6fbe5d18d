"""Kalman-filter tuning toolkit: gradient optimization of the SPD noise
matrices Q and R through the filter recursion, with the simulators,
estimators, tracking harness, and evaluation machinery needed to compare
optimization against classical noise estimation."""

from .errors import (
    ConfigError,
    ContractError,
    DefinitenessError,
    InsufficientDataError,
    KftuneError,
    ParseError,
    ShapeError,
    SingularityError,
    TrainingError,
    UnavailableError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ContractError",
    "DefinitenessError",
    "InsufficientDataError",
    "KftuneError",
    "ParseError",
    "ShapeError",
    "SingularityError",
    "TrainingError",
    "UnavailableError",
    "__version__",
]
