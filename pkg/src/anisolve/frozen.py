"""
Frozen Solver Module

Solves one frozen-exponent problem by damped Newton minimization of its
strictly convex discrete energy. Each iteration takes a sparse Newton step,
backtracks until the Armijo condition holds, and falls back once to the
steepest-descent direction when the Newton direction cannot be accepted.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.sparse.linalg import spsolve

from .config import GRID, NEWTON, default_tol_residual
from .exceptions import (
    ConfigurationError,
    LayoutMismatchError,
    LineSearchStallError,
    NonConvergenceError,
    ValidationError,
)
from .grid import FrozenProblem, Grid, GridFunction, energy, energy_gradient, hessian
from .spaces import ExponentField
from .types import FrozenReport

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class NewtonParams:
    """
    Damped Newton settings

    tol_residual=None selects the scale-aware default
    tol_scale * (1 + sup|source|) for every solve.
    """

    tol_residual: Optional[float] = None
    max_iter: int = NEWTON["max_iter"]
    armijo_c1: float = NEWTON["armijo_c1"]
    backtrack_factor: float = NEWTON["backtrack_factor"]
    max_halvings: int = NEWTON["max_halvings"]
    max_step: float = NEWTON["max_step"]
    mu: float = field(default=GRID["hessian_mu"])

    def __post_init__(self):
        if self.tol_residual is not None and not self.tol_residual > 0:
            raise ConfigurationError("newton.tol_residual", f"must be positive, got {self.tol_residual}")
        if self.max_iter < 1:
            raise ConfigurationError("newton.max_iter", f"must be at least 1, got {self.max_iter}")
        if not 0 < self.backtrack_factor < 1:
            raise ConfigurationError("newton.backtrack_factor", "must lie in (0, 1)")

    def tolerance_for(self, fp: FrozenProblem) -> float:
        if self.tol_residual is not None:
            return self.tol_residual
        return default_tol_residual(fp.source.sup())


@dataclass
class _Iterate:
    u: GridFunction
    energy: float
    gradient: np.ndarray
    defect: float  # sup of the nodal defect


def _evaluate(u: GridFunction, fp: FrozenProblem) -> _Iterate:
    gradient = energy_gradient(u, fp)
    defect = float(np.max(np.abs(gradient), initial=0.0)) / fp.grid.cell_weight
    return _Iterate(u, energy(u, fp), gradient, defect)


def _line_search(
    current: _Iterate,
    direction: np.ndarray,
    fp: FrozenProblem,
    params: NewtonParams,
) -> tuple[Optional[_Iterate], int]:
    """
    Backtracking along a descent direction

    Returns (accepted iterate, halvings). A step is accepted when it satisfies
    the Armijo condition, or when the energy change is within roundoff and the
    defect decreases.
    """
    slope = float(current.gradient @ direction)
    if not slope < 0.0:
        return None, 0

    step = 1.0
    largest = float(np.max(np.abs(direction)))
    if largest * step > params.max_step:
        step = params.max_step / largest

    roundoff = 16.0 * _EPS * max(1.0, abs(current.energy))
    start = current.u.interior()

    for halvings in range(params.max_halvings + 1):
        point = start + step * direction
        if np.all(np.isfinite(point)):
            candidate = GridFunction.from_interior(fp.grid, point)
            trial_energy = energy(candidate, fp)
            if math.isfinite(trial_energy):
                if trial_energy <= current.energy + params.armijo_c1 * step * slope:
                    return _evaluate(candidate, fp), halvings
                if trial_energy <= current.energy + roundoff:
                    trial = _evaluate(candidate, fp)
                    if trial.defect < current.defect:
                        return trial, halvings
        step *= params.backtrack_factor

    return None, params.max_halvings


def solve_frozen(
    fp: FrozenProblem,
    init: Optional[GridFunction] = None,
    params: Optional[NewtonParams] = None,
) -> tuple[GridFunction, FrozenReport]:
    """
    Minimize the frozen energy by damped Newton

    Args:
        fp: Frozen problem
        init: Dirichlet initial guess (default: anchor when sigma > 0, else zero)
        params: Newton settings

    Returns:
        Tuple of (minimizer, report)

    Raises:
        NonConvergenceError: max_iter exhausted (carries the best iterate)
        LineSearchStallError: neither Newton nor gradient direction passed Armijo
    """
    params = params or NewtonParams()
    grid = fp.grid
    if init is None:
        init = fp.anchor if fp.mass_weight > 0.0 else grid.zeros()
    if init.grid != grid:
        raise LayoutMismatchError(grid.shape, init.grid.shape, "initial guess")
    if not init.dirichlet:
        raise ValidationError("Dirichlet", "initial guess must be a Dirichlet grid function")

    tol = params.tolerance_for(fp)
    current = _evaluate(init, fp)
    report = FrozenReport(
        iterations=0,
        converged=False,
        residual=current.defect,
        tol_residual=tol,
        energy_history=[current.energy],
        backtracks=[],
        gradient_fallbacks=0,
    )

    while current.defect > tol:
        if report["iterations"] >= params.max_iter:
            raise NonConvergenceError("frozen Newton", params.max_iter, best=current.u, report=report)
        iteration = report["iterations"] + 1

        direction = -spsolve(hessian(current.u, fp, params.mu).tocsc(), current.gradient)
        accepted, halvings = (None, 0)
        if np.all(np.isfinite(direction)):
            accepted, halvings = _line_search(current, direction, fp, params)

        if accepted is None:
            report["gradient_fallbacks"] += 1
            logger.debug("Newton iteration %d: falling back to the gradient direction", iteration)
            accepted, halvings = _line_search(current, -current.gradient / grid.cell_weight, fp, params)
            if accepted is None:
                raise LineSearchStallError(iteration, params.max_halvings, best=current.u, report=report)

        current = accepted
        report["iterations"] = iteration
        report["residual"] = current.defect
        report["energy_history"].append(current.energy)
        report["backtracks"].append(halvings)
        logger.debug(
            "Newton iteration %d: E=%.12e defect=%.3e halvings=%d",
            iteration,
            current.energy,
            current.defect,
            halvings,
        )

    report["converged"] = True
    return current.u, report


# ==============================================================================
# EPSILON SCALING
# ==============================================================================


def epsilon_scaling_factor(p: float, epsilon: float) -> float:
    """(1 + eps)^{-1/(p-1)}: ratio between the regularized and plain solutions"""
    return (1.0 + epsilon) ** (-1.0 / (p - 1.0))


def epsilon_scaling_check(
    p: float,
    epsilon: float,
    source: Union[float, GridFunction],
    n: int,
    d: int = 1,
    params: Optional[NewtonParams] = None,
) -> tuple[GridFunction, GridFunction]:
    """
    Solve the constant-exponent problem with and without the eps term

    With every q_i equal to p_plus = p the regularized operator is (1 + eps)
    times the plain one, so u_eps = (1 + eps)^{-1/(p-1)} u_0.

    Args:
        p: Common exponent (also the regularization exponent)
        epsilon: Regularization weight
        source: Constant value or nodal source on a grid with n cells
        n: Cells per axis
        d: Dimension
        params: Newton settings shared by both solves

    Returns:
        Tuple of (u_eps, u_0)
    """
    grid = Grid(d, n)
    if not isinstance(source, GridFunction):
        source = GridFunction(grid, np.full(grid.shape, float(source)), dirichlet=False)

    q = ExponentField.constant(grid, [p] * d)
    reference, _ = solve_frozen(FrozenProblem(q, source, p_plus=p), params=params)
    if epsilon == 0.0:
        return reference, reference

    regularized, _ = solve_frozen(FrozenProblem(q, source, epsilon=epsilon, p_plus=p), params=params)
    logger.debug(
        "Scaling check p=%g eps=%g: ratio %.12f (expected %.12f)",
        p,
        epsilon,
        regularized.sup() / reference.sup() if reference.sup() else 1.0,
        epsilon_scaling_factor(p, epsilon),
    )
    return regularized, reference
