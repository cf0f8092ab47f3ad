"""Simulation lab for indifferentiability of constructions over subverted random oracles."""

from .errors import (BudgetError, ConfigError, ContractViolation, CrookLabError, DomainError,
                     GraphCorruptionError, SaturationError, SizeLimitError)
from .oracle_core import LazyFunctionTable, Point, Transcript
from .subversion import ImplementationHandle, SubverterSpec, evaluate_subverted, run_first_stage

__version__ = "0.1.0"

__all__ = ["BudgetError", "ConfigError", "ContractViolation", "CrookLabError", "DomainError",
           "GraphCorruptionError", "SaturationError", "SizeLimitError", "LazyFunctionTable",
           "Point", "Transcript", "ImplementationHandle", "SubverterSpec",
           "evaluate_subverted", "run_first_stage", "__version__"]
