"""Prospective reserves for Markov jump processes on hybrid state spaces.

Backward Euler solvers for the generalised Thiele equation (finite-state,
onset-dependent disability, random spouse) with an independent Monte Carlo
estimator of the same reserves.
"""

__version__ = "0.1.0"

from .backend import kernels
from .discrete import (
    DiscreteModel,
    ReserveTable,
    TransitionMatrixPath,
    reserve_via_probabilities,
    solve_kolmogorov_forward,
    solve_reserves_discrete,
)
from .duration import (
    DisabilityReserveSurface,
    RehabRates,
    default_rates,
    disability_model,
    emit_figures,
    solve_disability,
)
from .measure import SpouseModel, solve_spouse_reserves, spouse_insurance_model
from .model import (
    ACTIVE,
    DEAD,
    Discount,
    DomainError,
    IntensityKernel,
    InsuranceModel,
    Label,
    NumericError,
    PaymentSpec,
    State,
    total_rate,
)
from .simulator import McEstimate, PathSample, sample_next_jump, simulate_pv

__all__ = [
    "ACTIVE", "DEAD", "DisabilityReserveSurface", "Discount", "DiscreteModel", "DomainError",
    "IntensityKernel", "InsuranceModel", "Label", "McEstimate", "NumericError", "PathSample",
    "PaymentSpec", "RehabRates", "ReserveTable", "SpouseModel", "State", "TransitionMatrixPath",
    "default_rates", "disability_model", "emit_figures", "kernels", "reserve_via_probabilities",
    "sample_next_jump", "simulate_pv", "solve_disability", "solve_kolmogorov_forward",
    "solve_reserves_discrete", "solve_spouse_reserves", "spouse_insurance_model", "total_rate",
]
