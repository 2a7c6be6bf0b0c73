"""Drifted Brownian motion killed on a moving cone: compensation-series harmonic
functions, exit densities, transition kernel asymptotics and a Monte Carlo oracle."""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import ConsistencyError, ConvergenceError, DomainError, QuadratureError
from .geometry import (
    CompensationSequence,
    ModelParams,
    ParabolaPoint,
    branch_P,
    branch_Q,
    comp_point,
    drift_direction,
    kernel_K,
    saddle_point,
)
from .harmonics import (
    boundary_laplace_L1,
    conditioned_exit_functional,
    exit_prob_edge,
    h_alpha,
    h_edge,
    h_interior,
    persistence_probability,
    unconditioned_exit_probabilities,
)
from .densities import (
    exit_density_f1,
    exit_density_f2,
    exit_time_density,
    green_asymptotic,
    green_function,
    survival_probability,
    transition_kernel,
)
from .numerics import QuadControl, SeriesControl

__all__ = [
    "__version__",
    "CompensationSequence", "ConsistencyError", "ConvergenceError", "DomainError", "ModelParams",
    "ParabolaPoint", "QuadControl", "QuadratureError", "SeriesControl",
    "boundary_laplace_L1", "branch_P", "branch_Q", "comp_point", "conditioned_exit_functional",
    "drift_direction", "exit_density_f1", "exit_density_f2", "exit_prob_edge", "exit_time_density",
    "green_asymptotic", "green_function", "h_alpha", "h_edge", "h_interior", "kernel_K",
    "persistence_probability", "saddle_point", "survival_probability", "transition_kernel",
    "unconditioned_exit_probabilities",
]
