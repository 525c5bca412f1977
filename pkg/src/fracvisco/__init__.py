"""Fractional Kelvin-Voigt viscoelastic wave equation in one space dimension.

Modules
-------
fracops      discrete Riemann-Liouville and Caputo operators
fracspace    Fourier-side fractional Sobolev norms and identities
assembly     Galerkin matrices, loads and hypothesis checks
volterra     Volterra-form time integration
diagnostics  energy, dissipation, a-priori and weak-form checks
cli          command-line driver
"""

from .assembly import GalerkinSystem, MaterialModel, ProblemSpec, SpaceGrid, assemble, build_basis
from .errors import FracViscoError
from .fracops import TimeGrid, TimeSeries, gamma_fn
from .volterra import FieldHistory, SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "FieldHistory",
    "FracViscoError",
    "GalerkinSystem",
    "MaterialModel",
    "ProblemSpec",
    "SolverConfig",
    "SpaceGrid",
    "TimeGrid",
    "TimeSeries",
    "assemble",
    "build_basis",
    "gamma_fn",
    "solve",
]
