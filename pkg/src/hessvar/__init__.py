"""Radial variational toolkit for the k-Hessian operator.

Submodules
----------
hessian       exact algebra: symmetric polynomials, Garding cone, radial spectra
radial        grids, profiles, weighted quadrature, energies, critical exponents
nonlinearity  source terms f(x, u) with weights, primitives, regularizations
sharp         extremal profiles and the sharp Hardy-Sobolev constant machinery
flow          descent gradient flow with per-step energy/admissibility control
spectral      weighted principal eigenvalue by inverse iteration
shooting      divergence-form radial two-point solver and comparison problems
drivers       end-to-end sublinear / superlinear / nonexistence instantiations
cli           command-line front end with reproducible sweeps
"""

__version__ = "0.1.0"

from .errors import (
    AdmissibilityError,
    BracketError,
    ConfigError,
    ConvergenceError,
    HessvarError,
    NumericalError,
    ResolutionError,
    StuckFlowError,
    TruncationError,
)
from .radial import ProblemParams, QuotientReport, RadialGrid, RadialProfile, make_grid

__all__ = [
    "__version__",
    "AdmissibilityError",
    "BracketError",
    "ConfigError",
    "ConvergenceError",
    "HessvarError",
    "NumericalError",
    "ResolutionError",
    "StuckFlowError",
    "TruncationError",
    "ProblemParams",
    "QuotientReport",
    "RadialGrid",
    "RadialProfile",
    "make_grid",
]
