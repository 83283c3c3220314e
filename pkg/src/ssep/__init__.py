"""Simulation and verification lab for the one-dimensional symmetric simple
exclusion process with slow non-reversible boundary reservoirs."""

__version__ = "0.1.0"

from .params import (BoundaryDensities, BoundaryRates, Configuration, ModelParams,
                     alpha_from_params, apply_transition, boundary_densities,
                     boundary_rates, enumerate_transitions, load_params,
                     total_jump_rate)
from .profiles import InitialProfile

__all__ = [
    "BoundaryDensities", "BoundaryRates", "Configuration", "InitialProfile",
    "ModelParams", "alpha_from_params", "apply_transition", "boundary_densities",
    "boundary_rates", "enumerate_transitions", "load_params", "total_jump_rate",
    "__version__",
]
