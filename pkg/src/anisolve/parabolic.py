"""
Parabolic Module

Rothe discretization of u_t - sum_i d_i(|d_i u|^{p_i(b(u))-2} d_i u) = f(x, t):

    (u_k - u_{k-1}) / h - Delta_{p(b(u_k))} u_k = [f]_h((k-1) h)

Each step is a damped scalar fixed point on s = b(u_k). For a given s the
exponents are spatially constant, so every inner problem is one frozen convex
solve with mass weight 1/h anchored at u_{k-1}.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .config import LEDGER, PARABOLIC, VALIDATION
from .constants import (
    B_GRAD_NORM,
    B_KINDS,
    B_LQ_NORM,
    CONDITION_B,
    CONDITION_F,
    CONDITION_TIME,
    CONDITION_U0,
    LEBESGUE_EXPONENT_FLOOR,
    STEKLOV_PANELS,
    STEKLOV_WEIGHTS,
)
from .elliptic import ContinuationParams, ExponentSpec, epsilon_schedule, exponent_checks
from .exceptions import (
    AnisolveError,
    ConfigurationError,
    EvaluationError,
    LayoutMismatchError,
    NonConvergenceError,
    TrajectoryAbortedError,
    ValidationError,
)
from .expr import Expr, evaluate
from .frozen import NewtonParams, solve_frozen
from .grid import FrozenProblem, Grid, GridFunction, edge_derivative
from .spaces import ExponentField, anisotropic_modular, modular
from .types import (
    ConditionCheck,
    ParabolicReport,
    StepReport,
    ValidationReport,
)

logger = logging.getLogger(__name__)


# ==============================================================================
# PROBLEM DATA
# ==============================================================================


@dataclass(frozen=True)
class NonlocalMap:
    """
    Scalar functional b(u) that sets the exponents of a whole time step

    grad_norm: (sum_i sum_edges h^d |D_i u|^p)^{1/p} with p = p_minus
    lq_norm  : (sum_nodes h^d |u|^q)^{1/q}
    """

    kind: str
    exponent: float

    def __post_init__(self):
        if self.kind not in B_KINDS:
            raise ConfigurationError("parabolic.b.kind", f"'{self.kind}' is not one of {B_KINDS}")
        if not (math.isfinite(self.exponent) and self.exponent >= LEBESGUE_EXPONENT_FLOOR):
            raise ValidationError(CONDITION_B, f"{self.kind} exponent must be >= 1, got {self.exponent}")

    @classmethod
    def grad_norm(cls, spec: ExponentSpec) -> "NonlocalMap":
        return cls(B_GRAD_NORM, spec.p_minus)

    @classmethod
    def lq_norm(cls, q: float) -> "NonlocalMap":
        return cls(B_LQ_NORM, float(q))


def b_eval(u: GridFunction, b: NonlocalMap) -> float:
    """
    Evaluate the nonlocal map

    Example:
        >>> hat = GridFunction(Grid(1, 2), [0.0, 0.5, 0.0])
        >>> b_eval(hat, NonlocalMap(B_GRAD_NORM, 2.0))
        1.0
    """
    p = b.exponent
    if b.kind == B_LQ_NORM:
        total = modular(u, p)
    else:
        total = sum(modular(edge_derivative(u, axis), p, weight=u.grid.cell_weight) for axis in range(u.grid.d))
    return float(total ** (1.0 / p))


@dataclass(frozen=True, eq=False)
class ParabolicProblem:
    """
    Parabolic p(b(u))-problem on a grid and a uniform time grid h = T / N0

    exponents are functions of the scalar s = b(u); source is f(x, y, t);
    u0 is an expression in (x, y) or a Dirichlet GridFunction.
    """

    grid: Grid
    exponents: ExponentSpec
    b: NonlocalMap
    source: Expr
    u0: Union[Expr, GridFunction]
    T: float
    N0: int

    def __post_init__(self):
        if self.exponents.dimension != self.grid.d:
            raise LayoutMismatchError((self.grid.d,), (self.exponents.dimension,), "exponent directions")
        if isinstance(self.u0, GridFunction) and self.u0.grid != self.grid:
            raise LayoutMismatchError(self.grid.shape, self.u0.grid.shape, "initial data")

    @property
    def h(self) -> float:
        return self.T / self.N0

    def initial_values(self) -> np.ndarray:
        """Raw nodal samples of u0 (boundary not yet pinned)"""
        if isinstance(self.u0, GridFunction):
            return np.array(self.u0.values)
        env = {name: x for name, x in zip(("x", "y"), self.grid.nodes)}
        try:
            values = evaluate(self.u0, env)
        except EvaluationError as e:
            raise e.at(f"node {e.index} of u0") from e
        return np.array(np.broadcast_to(values, self.grid.shape), dtype=float)

    def initial(self) -> GridFunction:
        return GridFunction.pinned(self.grid, self.initial_values())


@dataclass(frozen=True)
class ParabolicParams:
    """Scalar fixed-point settings plus the inner solver settings"""

    theta_b: float = PARABOLIC["theta_b"]
    tol_b: float = PARABOLIC["tol_b"]
    max_fixed_point: int = PARABOLIC["max_fixed_point"]
    epsilon_continuation: bool = PARABOLIC["epsilon_continuation"]
    continuation: ContinuationParams = field(default_factory=ContinuationParams)
    newton: NewtonParams = field(default_factory=NewtonParams)

    def __post_init__(self):
        if not 0 < self.theta_b <= 1:
            raise ConfigurationError("parabolic.theta_b", f"must lie in (0, 1], got {self.theta_b}")
        if not self.tol_b > 0:
            raise ConfigurationError("parabolic.tol_b", "must be positive")
        if self.max_fixed_point < 1:
            raise ConfigurationError("parabolic.max_fixed_point", "must be at least 1")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Time levels u_0, ..., u_K with s_k = b(u_k)

    s_values[0] is b(u_0); at(t) is the piecewise-constant interpolant.
    """

    h: float
    states: tuple[GridFunction, ...]
    s_values: tuple[float, ...]

    @property
    def steps(self) -> int:
        return len(self.states) - 1

    @property
    def final(self) -> GridFunction:
        return self.states[-1]

    def at(self, t: float) -> GridFunction:
        """
        u_h(., t) = u_k for t in ((k-1) h, k h]; t = 0 gives u_0

        Raises:
            ValueError: If t is negative or beyond the computed steps
        """
        if t < 0:
            raise ValueError(f"time {t} is negative")
        if t == 0:
            return self.states[0]
        k = max(1, math.ceil(t / self.h - 1e-9))
        if k > self.steps:
            raise ValueError(f"time {t} lies beyond the last computed step ({self.steps * self.h:g})")
        return self.states[k]


# ==============================================================================
# STEKLOV AVERAGE
# ==============================================================================


def steklov_average(f: Expr, t: float, h: float, grid: Grid) -> GridFunction:
    """
    (1/h) * integral_t^{t+h} f(x, tau) dtau at every node

    Composite Simpson rule on 4 panels, exact for polynomials of degree <= 3
    in tau.

    Raises:
        ConfigurationError: If h <= 0
        EvaluationError: With node and time in the message
    """
    if not h > 0:
        raise ConfigurationError("h", f"time step must be positive, got {h}")

    env = {name: x for name, x in zip(("x", "y"), grid.nodes)}
    total = np.zeros(grid.shape)
    for j, weight in enumerate(STEKLOV_WEIGHTS):
        env["t"] = t + h * j / STEKLOV_PANELS
        try:
            total += weight * np.broadcast_to(evaluate(f, env), grid.shape)
        except EvaluationError as e:
            raise e.at(f"node {e.index} at t={env['t']:g} of the source f(x, t)") from e
    return GridFunction(grid, total, dirichlet=False)


# ==============================================================================
# TIME STEP
# ==============================================================================


def frozen_exponents(spec: ExponentSpec, s: float, grid: Grid) -> ExponentField:
    """Spatially constant edge exponents p_i(s)"""
    return ExponentField.constant(grid, [float(spec.evaluate(axis, s)) for axis in range(grid.d)])


def _frozen_step(
    q: ExponentField,
    source: GridFunction,
    u_prev: GridFunction,
    init: GridFunction,
    prob: ParabolicProblem,
    params: ParabolicParams,
) -> tuple[GridFunction, int, float]:
    """One mass-weighted frozen solve; returns (u, Newton iterations, tolerance)"""
    sigma = 1.0 / prob.h
    if not params.epsilon_continuation:
        fp = FrozenProblem(q, source, anchor=u_prev, mass_weight=sigma)
        u, report = solve_frozen(fp, init=init, params=params.newton)
        return u, report["iterations"], report["tol_residual"]

    iterations = 0
    u, tolerance = init, 0.0
    p_plus = max(prob.exponents.p_plus, q.upper)
    for epsilon in epsilon_schedule(params.continuation):
        fp = FrozenProblem(q, source, anchor=u_prev, epsilon=epsilon, p_plus=p_plus, mass_weight=sigma)
        u, report = solve_frozen(fp, init=u, params=params.newton)
        iterations += report["iterations"]
        tolerance = report["tol_residual"]
    return u, iterations, tolerance


def step(
    u_prev: GridFunction,
    k: int,
    prob: ParabolicProblem,
    params: Optional[ParabolicParams] = None,
    source: Optional[GridFunction] = None,
) -> tuple[GridFunction, StepReport]:
    """
    Advance from u_{k-1} to u_k

    s^(0) = b(u_{k-1}); for each s^(l) solve the frozen problem with
    q_i = p_i(s^(l)) and stop once |b(u^(l)) - s^(l)| <= tol_b (1 + |s^(l)|);
    otherwise s^(l+1) = (1 - theta_b) s^(l) + theta_b b(u^(l)). Exponents that
    do not depend on s need a single solve.

    Args:
        u_prev: u_{k-1}
        k: Step index (1-based)
        prob: Parabolic problem
        params: Fixed-point and solver settings
        source: Precomputed [f]_h((k-1) h) (computed when omitted)

    Returns:
        Tuple of (u_k, step report with energy ledger)

    Raises:
        NonConvergenceError: Scalar fixed point exhausted its budget
    """
    params = params or ParabolicParams()
    grid = prob.grid
    h = prob.h
    if source is None:
        source = steklov_average(prob.source, (k - 1) * h, h, grid)

    dependent = prob.exponents.depends_on_argument()
    s = b_eval(u_prev, prob.b)
    history = [s]
    newton_iterations = 0
    u = u_prev

    for iteration in range(1, params.max_fixed_point + 1):
        q = frozen_exponents(prob.exponents, s, grid)
        u, its, tol_residual = _frozen_step(q, source, u_prev, u, prob, params)
        newton_iterations += its
        b_value = b_eval(u, prob.b)
        defect = abs(b_value - s)

        if not dependent:
            s = b_value
            defect = 0.0
            break
        if defect <= params.tol_b * (1.0 + abs(s)):
            break

        s = (1.0 - params.theta_b) * s + params.theta_b * b_value
        history.append(s)
        logger.debug("step %d fixed point %d: s=%.12e defect=%.3e", k, iteration, s, defect)
    else:
        raise NonConvergenceError(f"scalar fixed point at time step {k}", params.max_fixed_point, best=u)

    l2_prev = u_prev.l2_squared()
    l2 = u.l2_squared()
    dissipation = anisotropic_modular(u, q)
    source_work = 2.0 * h * grid.cell_weight * float(np.sum(source.values * u.values))
    lhs = l2 + 2.0 * h * dissipation

    report = StepReport(
        step=k,
        time=k * h,
        s=s,
        s_history=history,
        b_defect=defect,
        fixed_point_iterations=iteration,
        exponents=[float(q.samples[axis].flat[0]) for axis in range(grid.d)],
        newton_iterations=newton_iterations,
        tol_residual=tol_residual,
        l2_sq_prev=l2_prev,
        l2_sq=l2,
        modular=dissipation,
        source_work=source_work,
        slack=l2_prev + source_work - lhs,
        cumulative_lhs=lhs,
        cumulative_bound=0.0,
    )
    return u, report


# ==============================================================================
# FULL SOLVE
# ==============================================================================


def solve_parabolic(
    prob: ParabolicProblem,
    params: Optional[ParabolicParams] = None,
) -> tuple[Trajectory, ParabolicReport]:
    """
    Run all N0 Rothe steps

    Args:
        prob: Parabolic problem (validate_parabolic() it first)
        params: Fixed-point and solver settings

    Returns:
        Tuple of (trajectory, report with per-step energy ledger)

    Raises:
        TrajectoryAbortedError: A step failed; the partial trajectory and
            report are attached and the original error is the cause
    """
    params = params or ParabolicParams()
    grid = prob.grid
    h = prob.h

    u = prob.initial()
    states = [u]
    s_values = [b_eval(u, prob.b)]

    sources = [steklov_average(prob.source, (k - 1) * h, h, grid) for k in range(1, prob.N0 + 1)]
    # node sums over measure (1+h)^d, an upper bound for the L2 norm
    source_bound = max(math.sqrt(src.l2_squared()) for src in sources)
    l2_0 = u.l2_squared()
    constant = 4.0 * source_bound * (math.sqrt(l2_0) + source_bound * prob.T)

    report = ParabolicReport(
        h=h,
        steps=[],
        energy_ok=True,
        cumulative_ok=True,
        source_bound=source_bound,
        bound_constant=constant,
        l2_bound=l2_0 + constant * prob.T,
        max_l2_sq=l2_0,
        l2_nonincreasing=True if source_bound == 0.0 else None,
    )

    factor = LEDGER["residual_factor"]
    dissipated = 0.0
    tolerance_sum = 0.0
    for k in range(1, prob.N0 + 1):
        try:
            u_next, step_report = step(u, k, prob, params, source=sources[k - 1])
        except AnisolveError as e:
            partial = Trajectory(h, tuple(states), tuple(s_values))
            raise TrajectoryAbortedError(k, e, partial, report) from e

        dissipated += 2.0 * h * step_report["modular"]
        tolerance_sum += step_report["tol_residual"]
        step_report["cumulative_lhs"] = step_report["l2_sq"] + dissipated
        step_report["cumulative_bound"] = l2_0 + constant * step_report["time"]

        if step_report["slack"] < -factor * step_report["tol_residual"]:
            report["energy_ok"] = False
            logger.warning("Energy ledger violated at step %d (slack %.3e)", k, step_report["slack"])
        if step_report["cumulative_lhs"] > step_report["cumulative_bound"] + factor * tolerance_sum:
            report["cumulative_ok"] = False
            logger.warning("Cumulative energy bound violated at step %d", k)
        if report["l2_nonincreasing"] and step_report["l2_sq"] > step_report["l2_sq_prev"] + factor * step_report["tol_residual"]:
            report["l2_nonincreasing"] = False

        report["max_l2_sq"] = max(report["max_l2_sq"], step_report["l2_sq"])
        report["steps"].append(step_report)
        states.append(u_next)
        s_values.append(step_report["s"])
        u = u_next
        logger.debug("t=%.6g: s=%.6e, |u|^2=%.6e, slack=%.3e", step_report["time"], step_report["s"], step_report["l2_sq"], step_report["slack"])

    logger.info(
        "Completed %d time step(s): max |u|^2 %.6e, ledger %s",
        prob.N0,
        report["max_l2_sq"],
        "ok" if report["energy_ok"] else "VIOLATED",
    )
    return Trajectory(h, tuple(states), tuple(s_values)), report


# ==============================================================================
# VALIDATION
# ==============================================================================


def _check(condition: str, passed: bool, message: str, witness: Optional[dict] = None) -> ConditionCheck:
    return ConditionCheck(condition=condition, passed=bool(passed), message=message, witness=witness)


def validate_parabolic(prob: ParabolicProblem) -> ValidationReport:
    """
    Sampled checks for a parabolic problem

    (p1) and (p2) on the exponents of s, the time grid, the nonlocal map,
    u0 vanishing on the boundary and the source being finite on a
    space-time lattice. Never raises.
    """
    checks = exponent_checks(prob.exponents, prob.grid.d)

    time_ok = prob.T > 0 and prob.N0 >= 1
    checks.append(_check(CONDITION_TIME, time_ok, f"T={prob.T:g}, N0={prob.N0}, h={prob.h:g}" if time_ok else "need T > 0 and N0 >= 1"))

    b_ok = prob.b.exponent >= LEBESGUE_EXPONENT_FLOOR
    checks.append(_check(CONDITION_B, b_ok, f"{prob.b.kind} with exponent {prob.b.exponent:g}"))

    try:
        raw = prob.initial_values()
        boundary = float(np.max(np.abs(raw[prob.grid.boundary_mask])))
        limit = VALIDATION["boundary_tol"] * (1.0 + float(np.max(np.abs(raw))))
        checks.append(
            _check(
                CONDITION_U0,
                boundary <= limit,
                f"sup of u0 on the boundary is {boundary:.3e} (limit {limit:.3e})",
                None if boundary <= limit else {"boundary_sup": boundary},
            )
        )
    except AnisolveError as e:
        checks.append(_check(CONDITION_U0, False, str(e)))

    if not time_ok:
        checks.append(_check(CONDITION_F, False, "source not sampled: the time grid is invalid"))
    else:
        try:
            for t in np.linspace(0.0, prob.T, 5):
                steklov_average(prob.source, float(t), prob.h, prob.grid)
            checks.append(_check(CONDITION_F, True, "source finite on the space-time lattice"))
        except AnisolveError as e:
            checks.append(_check(CONDITION_F, False, str(e)))

    return ValidationReport(passed=all(c["passed"] for c in checks), checks=checks)
