"""Spectral simulation and verification of fractional drift-diffusion systems."""
from .diagnostics import DiagnosticsConfig, DiagnosticsRecord, RateFit, fit_decay_rate
from .driftmatrix import DriftMatrix, check_and_decompose
from .exceptions import ConfigError, NumericalAbort
from .integrator import SolverConfig, Trajectory, initial_density, run, step
from .kernels import heat_kernel
from .models import ModelKind, ModelSpec
from .spectral import Field, GridSpec

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DiagnosticsConfig",
    "DiagnosticsRecord",
    "DriftMatrix",
    "Field",
    "GridSpec",
    "ModelKind",
    "ModelSpec",
    "NumericalAbort",
    "RateFit",
    "SolverConfig",
    "Trajectory",
    "check_and_decompose",
    "fit_decay_rate",
    "heat_kernel",
    "initial_density",
    "run",
    "step",
]
