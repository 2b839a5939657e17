"""Second-order limits and finite-blocklength bounds for the AWGN channel under several cost constraints."""

from .channel import ChannelSpec, ShellSpec, capacity, capacity_derivative, dispersion
from .constraints import (
    ConstraintSet,
    DiscreteDistribution,
    OneSidedSquare,
    PositivePart,
    PowerLaw,
    SmoothedStep,
    Square,
    StepIndicator,
)
from .optimizer import SearchOptions, asymptotic_limit, finite_n_converse_value, minimize_over_distributions
from .specfn import RngStream

__all__ = [
    "ChannelSpec",
    "ShellSpec",
    "capacity",
    "capacity_derivative",
    "dispersion",
    "ConstraintSet",
    "DiscreteDistribution",
    "OneSidedSquare",
    "PositivePart",
    "PowerLaw",
    "SmoothedStep",
    "Square",
    "StepIndicator",
    "SearchOptions",
    "asymptotic_limit",
    "finite_n_converse_value",
    "minimize_over_distributions",
    "RngStream",
]
