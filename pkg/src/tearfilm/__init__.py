"""Evaporation-driven tear-film thinning and breakup in two dimensions.

Fourier spectral collocation in space, adaptive NDF time stepping of the
resulting mass-matrix DAE, POD model reduction, and 1D radial/streak
companion solvers.
"""

from .dae import IntegratorConfig, SolutionRecord, integrate, relative_error
from .kernels import BACKEND as kernel_backend
from .model import (
    EvaporationPeak,
    FieldState,
    ModelParams,
    dimensionalize,
    eval_J,
    fl_intensity,
    mechanism_terms,
    total_solute,
    uniform_state,
    velocities,
)
from .spectral import PeriodicGrid, PeriodicLine

__version__ = "0.1.0"

__all__ = [
    "EvaporationPeak",
    "FieldState",
    "IntegratorConfig",
    "ModelParams",
    "PeriodicGrid",
    "PeriodicLine",
    "SolutionRecord",
    "dimensionalize",
    "eval_J",
    "fl_intensity",
    "integrate",
    "kernel_backend",
    "mechanism_terms",
    "relative_error",
    "total_solute",
    "uniform_state",
    "velocities",
    "__version__",
]
