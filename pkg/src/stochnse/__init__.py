"""Spectral Galerkin simulation of the 2D stochastic Navier-Stokes equations on the torus.

A tamed exponential Euler scheme on divergence-free trigonometric modes, with
exact Ornstein-Uhlenbeck noise, coupled multi-resolution Monte Carlo and
executable versions of the structural estimates on the nonlinearity.
"""

from ._kernels import BACKEND
from .fields import GridField, SpectralField, analyze, embed, norm_Hr, partial_derivative, project, synthesize
from .noise import NoiseParams, OUPath, restrict, simulate_ou
from .nonlinearity import F, NonlinearityParams
from .scheme import SchemeParams, Trajectory, run_trajectory
from .spectral_basis import E001, ModeIndex, ModeSet, SpectralParams, Variant, build_mode_set

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "E001",
    "F",
    "GridField",
    "ModeIndex",
    "ModeSet",
    "NoiseParams",
    "NonlinearityParams",
    "OUPath",
    "SchemeParams",
    "SpectralField",
    "SpectralParams",
    "Trajectory",
    "Variant",
    "analyze",
    "build_mode_set",
    "embed",
    "norm_Hr",
    "partial_derivative",
    "project",
    "restrict",
    "run_trajectory",
    "simulate_ou",
    "synthesize",
]
