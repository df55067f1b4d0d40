"""Mean-field laser model near a pump-induced exceptional point with
polarization-correlation decay, plus an exact two-molecule Lindblad check."""

from pumpep.core import (
    DerivedRates,
    MeanFieldState,
    ModelParams,
    StationaryTriple,
    derive_rates,
    mean_field_rhs,
    default_params,
    pump_from_d0,
    residual_norm,
    stationary_exact,
    stationary_closed_form,
)
from pumpep.errors import (
    DegeneratePumpError,
    DomainError,
    NoEPError,
    OracleMismatch,
    PositivityError,
    RankDeficiencyError,
    SingularSystemError,
    StepUnderflowError,
)

__version__ = "0.1.0"

__all__ = [
    "DerivedRates",
    "MeanFieldState",
    "ModelParams",
    "StationaryTriple",
    "derive_rates",
    "mean_field_rhs",
    "default_params",
    "pump_from_d0",
    "residual_norm",
    "stationary_exact",
    "stationary_closed_form",
    "DegeneratePumpError",
    "DomainError",
    "NoEPError",
    "OracleMismatch",
    "PositivityError",
    "RankDeficiencyError",
    "SingularSystemError",
    "StepUnderflowError",
]
