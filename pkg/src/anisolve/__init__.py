"""
anisolve Package

Constructive solvers for anisotropic p(u)-Laplacian problems on uniform tensor
grids over (0,1)^d, d in {1, 2}.

Main Components:
- spaces: modulars, Luxemburg norms, Hölder pairing
- expr: expression language for exponents, sources and initial data
- grid: grids, grid functions, discrete energy and its gradient
- frozen: damped Newton solve of one frozen-exponent problem
- elliptic: Picard iteration inside eps-continuation, problem validation
- parabolic: Rothe steps with a scalar fixed point on b(u)
- cli: run / convergence / verify front end
"""

from .config import CONTINUATION, NEWTON, PARABOLIC
from .elliptic import (
    ContinuationParams,
    EllipticProblem,
    ExponentSpec,
    freeze,
    solve_elliptic,
    validate,
)
from .expr import evaluate, parse, to_source
from .frozen import NewtonParams, epsilon_scaling_check, solve_frozen
from .grid import (
    FrozenProblem,
    Grid,
    GridFunction,
    edge_derivative,
    energy,
    monotonicity_gap,
    residual,
)
from .parabolic import (
    NonlocalMap,
    ParabolicParams,
    ParabolicProblem,
    Trajectory,
    b_eval,
    solve_parabolic,
    steklov_average,
    step,
    validate_parabolic,
)
from .spaces import (
    ExponentField,
    ScalarExponent,
    anisotropic_modular,
    holder_pairing,
    luxemburg_norm,
    modular,
)

__version__ = "0.1.0"

__all__ = [
    # Function spaces
    "ExponentField",
    "ScalarExponent",
    "modular",
    "luxemburg_norm",
    "anisotropic_modular",
    "holder_pairing",
    # Expressions
    "parse",
    "evaluate",
    "to_source",
    # Grid
    "Grid",
    "GridFunction",
    "FrozenProblem",
    "edge_derivative",
    "energy",
    "residual",
    "monotonicity_gap",
    # Solvers
    "NewtonParams",
    "solve_frozen",
    "epsilon_scaling_check",
    "ExponentSpec",
    "EllipticProblem",
    "ContinuationParams",
    "freeze",
    "solve_elliptic",
    "validate",
    "NonlocalMap",
    "ParabolicProblem",
    "ParabolicParams",
    "Trajectory",
    "steklov_average",
    "b_eval",
    "step",
    "solve_parabolic",
    "validate_parabolic",
    # Configuration
    "NEWTON",
    "CONTINUATION",
    "PARABOLIC",
]
