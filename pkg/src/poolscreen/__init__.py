"""Pooled-testing engine.

Adaptive identification strategies, nonadaptive testing matrices,
worst-case correlation analysis, infection-rate classification, and an
interactive session service for lab use.
"""

__version__ = "0.1.0"

from .core import (
    InfectionVector,
    Pool,
    TestOutcome,
    IidPrior,
    ExplicitPrior,
    NoiseModel,
    StrategyTrace,
    InputError,
    ProtocolViolation,
    InternalError,
    oracle_test,
    run_strategy,
)

__all__ = [
    "InfectionVector",
    "Pool",
    "TestOutcome",
    "IidPrior",
    "ExplicitPrior",
    "NoiseModel",
    "StrategyTrace",
    "InputError",
    "ProtocolViolation",
    "InternalError",
    "oracle_test",
    "run_strategy",
    "__version__",
]
