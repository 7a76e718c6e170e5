"""Distributed-order subordinators built by Lévy mixing of Bernstein families."""

from . import certify, diffusion, families, measures, mixing, operators, sampler, transforms
from .errors import (
    AssumptionError,
    ConfigError,
    DomainError,
    HorizonError,
    LevymixError,
    NumericError,
    ParameterError,
    PreconditionError,
)
from .mixing import MixedExponent

__version__ = "0.1.0"

__all__ = [
    "AssumptionError",
    "ConfigError",
    "DomainError",
    "HorizonError",
    "LevymixError",
    "MixedExponent",
    "NumericError",
    "ParameterError",
    "PreconditionError",
    "certify",
    "diffusion",
    "families",
    "measures",
    "mixing",
    "operators",
    "sampler",
    "transforms",
]
