"""
Elliptic Module

Solves -sum_i d_i(|d_i u|^{p_i(u)-2} d_i u) = f(x, u) with u = 0 on the
boundary. The exponent field and the source are frozen at the previous
iterate (Picard), each frozen problem is solved with an added
eps * p_plus-growth term, and eps is driven down a geometric schedule with warm
starts.

Also hosts the sampled checks of the standing hypotheses (p1), (p2) and (f)
shared with the parabolic module.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .config import CONTINUATION, ELLIPTIC_CHECKS, VALIDATION
from .constants import (
    CONDITION_F,
    CONDITION_F0,
    CONDITION_P1,
    CONDITION_P2,
    OPERATOR_EXPONENT_FLOOR,
)
from .exceptions import (
    AnisolveError,
    ConfigurationError,
    EvaluationError,
    LayoutMismatchError,
    NonConvergenceError,
)
from .expr import Expr, evaluate, free_variables, is_constant, parse, to_source
from .frozen import NewtonParams, solve_frozen
from .grid import FrozenProblem, Grid, GridFunction, residual
from .spaces import ExponentField, anisotropic_modular
from .types import ConditionCheck, EllipticReport, PicardStage, ValidationReport

logger = logging.getLogger(__name__)

# an exponent is a function of one scalar, written with any of these names
SCALAR_ARGUMENTS = ("t", "u", "s")


# ==============================================================================
# PROBLEM DATA
# ==============================================================================


@dataclass(frozen=True, eq=False)
class ExponentSpec:
    """
    Vector exponent p = (p_1, ..., p_d) as functions of one scalar

    Declared bounds [lower_i, upper_i] and Lipschitz constants c_i are checked
    by sampling in validate(); they are not assumed.
    """

    expressions: tuple[Expr, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    lipschitz: tuple[float, ...]

    def __post_init__(self):
        count = len(self.expressions)
        for name, values in (("bounds", self.lower), ("bounds", self.upper), ("lipschitz", self.lipschitz)):
            if len(values) != count:
                raise ConfigurationError(f"exponents.{name}", f"expected {count} entries, got {len(values)}")
        for i, expression in enumerate(self.expressions):
            spatial = free_variables(expression) - set(SCALAR_ARGUMENTS)
            if spatial:
                raise ConfigurationError(
                    f"exponents.expressions[{i}]",
                    f"exponents depend on one scalar ({', '.join(SCALAR_ARGUMENTS)}), found {', '.join(sorted(spatial))}",
                )

    @classmethod
    def parse(
        cls,
        expressions: list[str],
        bounds: list[list[float]],
        lipschitz: list[float],
    ) -> "ExponentSpec":
        """Build from config strings, e.g. (["3 + tanh(u)"], [[2, 4]], [1])"""
        return cls(
            tuple(parse(text) for text in expressions),
            tuple(float(b[0]) for b in bounds),
            tuple(float(b[1]) for b in bounds),
            tuple(float(c) for c in lipschitz),
        )

    @property
    def dimension(self) -> int:
        return len(self.expressions)

    @property
    def p_minus(self) -> float:
        return min(self.lower)

    @property
    def p_plus(self) -> float:
        return max(self.upper)

    def depends_on_argument(self) -> bool:
        return not all(is_constant(e) for e in self.expressions)

    def evaluate(self, axis: int, argument: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """p_axis evaluated at scalar or array arguments (same shape out)"""
        env = {name: argument for name in SCALAR_ARGUMENTS}
        value = evaluate(self.expressions[axis], env)
        if np.ndim(argument) and np.ndim(value) == 0:
            return np.full(np.shape(argument), value)
        return value


@dataclass(frozen=True, eq=False)
class EllipticProblem:
    """
    Elliptic p(u)-problem on a grid

    source is an expression f(x, y, u) or a tabulated nodal GridFunction.
    growth_c and growth_r are the declared constants of |f| <= c(1 + |u|^{r-1}).
    """

    grid: Grid
    exponents: ExponentSpec
    source: Union[Expr, GridFunction]
    growth_c: float
    growth_r: float
    expect_negative_at_zero: bool = False

    def __post_init__(self):
        if self.exponents.dimension != self.grid.d:
            raise LayoutMismatchError((self.grid.d,), (self.exponents.dimension,), "exponent directions")
        if isinstance(self.source, GridFunction) and self.source.grid != self.grid:
            raise LayoutMismatchError(self.grid.shape, self.source.grid.shape, "tabulated source")

    @property
    def source_text(self) -> str:
        if isinstance(self.source, GridFunction):
            return "<tabulated>"
        return to_source(self.source)

    def source_at(self, u: GridFunction) -> GridFunction:
        """Nodal values f(x_j, u_j)"""
        if isinstance(self.source, GridFunction):
            return self.source
        env = {name: x for name, x in zip(("x", "y"), self.grid.nodes)}
        env["u"] = u.values
        try:
            values = evaluate(self.source, env)
        except EvaluationError as e:
            raise e.at(f"node {e.index} of the source f(x, u)") from e
        return GridFunction(self.grid, np.broadcast_to(values, self.grid.shape), dirichlet=False)


@dataclass(frozen=True)
class ContinuationParams:
    """eps schedule and Picard settings"""

    epsilon_0: float = CONTINUATION["epsilon_0"]
    factor: float = CONTINUATION["factor"]
    epsilon_min: float = CONTINUATION["epsilon_min"]
    tol_picard: float = CONTINUATION["tol_picard"]
    tol_exponent: float = CONTINUATION["tol_exponent"]
    max_picard: int = CONTINUATION["max_picard"]
    theta_u: float = CONTINUATION["theta_u"]

    def __post_init__(self):
        if not 0 < self.epsilon_min <= self.epsilon_0:
            raise ConfigurationError("continuation.epsilon_min", "need 0 < epsilon_min <= epsilon_0")
        if not 0 < self.factor < 1:
            raise ConfigurationError("continuation.factor", f"must lie in (0, 1), got {self.factor}")
        if not 0 < self.theta_u <= 1:
            raise ConfigurationError("continuation.theta_u", f"must lie in (0, 1], got {self.theta_u}")
        if self.max_picard < 1:
            raise ConfigurationError("continuation.max_picard", "must be at least 1")


def epsilon_schedule(cp: ContinuationParams) -> list[float]:
    """
    Geometric schedule eps_0, factor * eps_0, ... ending exactly at eps_min

    Example:
        >>> epsilon_schedule(ContinuationParams(epsilon_0=1e-2, factor=0.1, epsilon_min=1e-4))
        [0.01, 0.001, 0.0001]
    """
    schedule = []
    epsilon = cp.epsilon_0
    while epsilon > cp.epsilon_min * (1.0 + 1e-9):
        schedule.append(epsilon)
        epsilon *= cp.factor
    schedule.append(cp.epsilon_min)
    return schedule


# ==============================================================================
# FREEZING
# ==============================================================================


def edge_means(u: GridFunction, axis: int) -> np.ndarray:
    """Arithmetic mean of the two endpoint values of every edge along one axis"""
    lo = (slice(None),) * axis + (slice(0, -1),)
    hi = (slice(None),) * axis + (slice(1, None),)
    return 0.5 * (u.values[lo] + u.values[hi])


def freeze_exponents(u: GridFunction, spec: ExponentSpec) -> ExponentField:
    """Edge exponents q_i = p_i(mean of the endpoint values of u)"""
    samples = []
    for axis in range(u.grid.d):
        try:
            samples.append(spec.evaluate(axis, edge_means(u, axis)))
        except EvaluationError as e:
            raise e.at(f"edge {e.index} along axis {axis + 1} of p_{axis + 1}") from e
    return ExponentField(tuple(samples))


def freeze(u: GridFunction, prob: EllipticProblem) -> tuple[ExponentField, GridFunction]:
    """
    Evaluate exponents and source at a known iterate

    Args:
        u: Current iterate
        prob: Elliptic problem

    Returns:
        Tuple of (edge exponent field, nodal source)

    Raises:
        EvaluationError: With the failing node or edge in the message
        ValidationError: If a frozen exponent falls below 2
    """
    return freeze_exponents(u, prob.exponents), prob.source_at(u)


def _regularization_exponent(prob: EllipticProblem, q: ExponentField) -> float:
    return max(prob.exponents.p_plus, q.upper)


def frozen_problem(u: GridFunction, prob: EllipticProblem, epsilon: float) -> FrozenProblem:
    """The self-consistent frozen problem at u"""
    q, source = freeze(u, prob)
    return FrozenProblem(q, source, epsilon=epsilon, p_plus=_regularization_exponent(prob, q))


def manufactured_source(u_star: GridFunction, prob: EllipticProblem, epsilon: float) -> GridFunction:
    """
    Tabulated source that makes u_star the exact discrete solution

    The nodal defect of u_star under its own frozen exponents with zero source
    is the operator applied to u_star; using it as the source turns u_star into
    a fixed point of the Picard map at this eps.
    """
    q = freeze_exponents(u_star, prob.exponents)
    fp = FrozenProblem(
        q,
        GridFunction(u_star.grid, np.zeros(u_star.grid.shape), dirichlet=False),
        epsilon=epsilon,
        p_plus=_regularization_exponent(prob, q),
    )
    return GridFunction(u_star.grid, residual(u_star, fp).values, dirichlet=False)


# ==============================================================================
# SOLVE
# ==============================================================================


def _exponent_drift(a: ExponentField, b: ExponentField) -> float:
    return max(float(np.max(np.abs(x - y), initial=0.0)) for x, y in zip(a.samples, b.samples))


def trace_is_bounded(trace: list[float], slack: Optional[float] = None) -> bool:
    """True when no later stage exceeds the first-stage modular by more than the slack"""
    slack = ELLIPTIC_CHECKS["trace_slack"] if slack is None else slack
    if not trace:
        return True
    return max(trace) <= (1.0 + slack) * trace[0]


def solve_elliptic(
    prob: EllipticProblem,
    cp: Optional[ContinuationParams] = None,
    newton: Optional[NewtonParams] = None,
    init: Optional[GridFunction] = None,
) -> tuple[GridFunction, EllipticReport]:
    """
    eps-continuation around damped Picard on frozen (q, f)

    Args:
        prob: Elliptic problem (validate() it first)
        cp: Continuation and Picard settings
        newton: Settings for every frozen solve
        init: Initial iterate (default zero)

    Returns:
        Tuple of (iterate at eps_min, report)

    Raises:
        NonConvergenceError: Picard budget exhausted at some eps
            (best iterate and the report so far attached)
        LineSearchStallError: Propagated from a frozen solve
    """
    cp = cp or ContinuationParams()
    newton = newton or NewtonParams()
    grid = prob.grid
    u = init if init is not None else grid.zeros()

    report = EllipticReport(
        stages=[],
        picard_iterations=0,
        newton_iterations=0,
        final_defect=0.0,
        tol_residual=0.0,
        modular_trace=[],
        a_priori_bounded=True,
        near_zero=False,
        sup_norm=0.0,
    )

    q, source = freeze(u, prob)
    schedule = epsilon_schedule(cp)
    for epsilon in schedule:
        last_stage = epsilon == schedule[-1]
        stage = PicardStage(
            epsilon=epsilon,
            iterations=0,
            converged=False,
            difference_history=[],
            drift_history=[],
            newton_iterations=0,
            modular=0.0,
            defect=None,
        )
        report["stages"].append(stage)

        for iteration in range(1, cp.max_picard + 1):
            fp = FrozenProblem(q, source, epsilon=epsilon, p_plus=_regularization_exponent(prob, q))
            solution, frozen_report = solve_frozen(fp, init=u, params=newton)

            updated = GridFunction(grid, (1.0 - cp.theta_u) * u.values + cp.theta_u * solution.values)
            q_next, source_next = freeze(updated, prob)

            difference = float(np.max(np.abs(updated.values - u.values)))
            drift = _exponent_drift(q_next, q)
            stage["iterations"] = iteration
            stage["difference_history"].append(difference)
            stage["drift_history"].append(drift)
            stage["newton_iterations"] += frozen_report["iterations"]
            report["picard_iterations"] += 1
            report["newton_iterations"] += frozen_report["iterations"]

            u, q, source = updated, q_next, source_next
            logger.debug("eps=%.3e Picard %d: diff=%.3e drift=%.3e", epsilon, iteration, difference, drift)

            if difference > cp.tol_picard or drift > cp.tol_exponent:
                continue
            if last_stage:
                # the returned iterate must solve its own frozen problem
                consistent = FrozenProblem(q, source, epsilon=epsilon, p_plus=_regularization_exponent(prob, q))
                defect = float(np.max(np.abs(residual(u, consistent).values)))
                stage["defect"] = defect
                if defect > newton.tolerance_for(consistent):
                    continue
            stage["converged"] = True
            break
        else:
            raise NonConvergenceError(f"Picard iteration at eps={epsilon:.3e}", cp.max_picard, best=u, report=report)

        stage["modular"] = anisotropic_modular(u, q)
        report["modular_trace"].append(stage["modular"])
        logger.info(
            "eps=%.3e converged after %d Picard iteration(s), modular %.6e",
            epsilon,
            stage["iterations"],
            stage["modular"],
        )

    final = frozen_problem(u, prob, cp.epsilon_min)
    report["final_defect"] = float(np.max(np.abs(residual(u, final).values)))
    report["tol_residual"] = newton.tolerance_for(final)
    report["sup_norm"] = u.sup()

    report["a_priori_bounded"] = trace_is_bounded(report["modular_trace"])

    source_at_zero = prob.source_at(grid.zeros()).values[grid.interior_slice]
    if u.sup() <= ELLIPTIC_CHECKS["near_zero"] and np.max(np.abs(source_at_zero), initial=0.0) > ELLIPTIC_CHECKS["near_zero"]:
        report["near_zero"] = True
        logger.warning("Picard settled on a near-zero fixed point although f(x, 0) does not vanish")

    return u, report


# ==============================================================================
# VALIDATION
# ==============================================================================


def _check(condition: str, passed: bool, message: str, witness: Optional[dict] = None) -> ConditionCheck:
    return ConditionCheck(condition=condition, passed=bool(passed), message=message, witness=witness)


def exponent_checks(spec: ExponentSpec, d: int, span: Optional[float] = None) -> list[ConditionCheck]:
    """
    Sampled (p1) and (p2) checks for an exponent spec

    (p1): every sample lies in the declared [lower_i, upper_i], lower_i >= 2
          and d < min_i lower_i.
    (p2): consecutive difference quotients are at most c_i (1 + slack).
    """
    span = VALIDATION["sample_span"] if span is None else span
    arguments = np.linspace(-span, span, VALIDATION["exponent_samples"])
    checks: list[ConditionCheck] = []

    p1_failures: list[tuple[str, dict]] = []
    p2_failures: list[tuple[str, dict]] = []
    for axis in range(spec.dimension):
        lower, upper, c = spec.lower[axis], spec.upper[axis], spec.lipschitz[axis]
        if lower < OPERATOR_EXPONENT_FLOOR:
            p1_failures.append((f"declared lower bound {lower} of p_{axis + 1} is below 2", {"axis": axis + 1}))
        if lower > upper:
            p1_failures.append((f"declared bounds of p_{axis + 1} are reversed", {"axis": axis + 1}))

        try:
            values = np.asarray(spec.evaluate(axis, arguments), dtype=float)
        except EvaluationError as e:
            p1_failures.append((f"p_{axis + 1} cannot be evaluated: {e.reason}", {"axis": axis + 1}))
            continue

        outside = (values < lower) | (values > upper) | (values < OPERATOR_EXPONENT_FLOOR)
        if np.any(outside):
            j = int(np.argmax(outside))
            p1_failures.append(
                (
                    f"p_{axis + 1}({arguments[j]:.6g}) = {values[j]:.6g} leaves [{lower}, {upper}] or drops below 2",
                    {"axis": axis + 1, "t": float(arguments[j]), "value": float(values[j])},
                )
            )

        quotients = np.abs(np.diff(values)) / np.diff(arguments)
        limit = c * (1.0 + VALIDATION["lipschitz_slack"])
        if np.any(quotients > limit):
            j = int(np.argmax(quotients))
            p2_failures.append(
                (
                    f"difference quotient {quotients[j]:.6g} of p_{axis + 1} near t={arguments[j]:.6g} exceeds c={c}",
                    {"axis": axis + 1, "t": float(arguments[j]), "quotient": float(quotients[j])},
                )
            )

    if not p1_failures and d >= spec.p_minus:
        p1_failures.append((f"need d < p_minus, got d={d} and p_minus={spec.p_minus}", {"d": d, "p_minus": spec.p_minus}))

    if p1_failures:
        checks.append(_check(CONDITION_P1, False, p1_failures[0][0], p1_failures[0][1]))
    else:
        checks.append(_check(CONDITION_P1, True, f"exponents within declared bounds, p_minus={spec.p_minus:g} > d={d}"))
    if p2_failures:
        checks.append(_check(CONDITION_P2, False, p2_failures[0][0], p2_failures[0][1]))
    else:
        checks.append(_check(CONDITION_P2, True, "difference quotients within the declared Lipschitz constants"))
    return checks


def _validation_lattice(d: int) -> tuple[np.ndarray, ...]:
    axis = np.linspace(0.0, 1.0, VALIDATION["growth_x_samples"])[1:-1]
    return tuple(np.meshgrid(*([axis] * d), indexing="ij"))


def _growth_check(prob: EllipticProblem) -> ConditionCheck:
    c, r = prob.growth_c, prob.growth_r
    p_minus = prob.exponents.p_minus
    if not 1.0 <= r < p_minus:
        return _check(CONDITION_F, False, f"need 1 <= r < p_minus, got r={r} and p_minus={p_minus}", {"r": r, "p_minus": p_minus})

    if isinstance(prob.source, GridFunction):
        worst = prob.source.sup()
        passed = worst <= c * (1.0 + VALIDATION["growth_slack"])
        return _check(CONDITION_F, passed, f"tabulated source sup {worst:.6g} against c={c}", {"sup": worst})

    points = _validation_lattice(prob.grid.d)
    levels = np.linspace(-VALIDATION["growth_u_max"], VALIDATION["growth_u_max"], VALIDATION["growth_u_samples"])
    shape = levels.shape + points[0].shape
    env = {name: np.broadcast_to(x, shape) for name, x in zip(("x", "y"), points)}
    env["u"] = np.broadcast_to(levels.reshape((-1,) + (1,) * prob.grid.d), shape)
    try:
        values = np.abs(np.broadcast_to(evaluate(prob.source, env), shape))
    except EvaluationError as e:
        return _check(CONDITION_F, False, f"source cannot be evaluated: {e.reason}")

    bound = c * (1.0 + np.abs(env["u"]) ** (r - 1.0)) * (1.0 + VALIDATION["growth_slack"])
    excess = values - bound
    if np.any(excess > 0):
        index = np.unravel_index(int(np.argmax(excess)), shape)
        witness = {"u": float(env["u"][index]), "value": float(values[index]), "bound": float(bound[index])}
        witness.update({name: float(x[index]) for name, x in env.items() if name != "u"})
        return _check(
            CONDITION_F,
            False,
            f"|f| = {witness['value']:.6g} exceeds c(1+|u|^(r-1)) = {witness['bound']:.6g} at u={witness['u']:.6g}",
            witness,
        )
    return _check(CONDITION_F, True, f"growth |f| <= {c:g}(1+|u|^{r - 1:g}) holds on the lattice, r={r:g} < p_minus={p_minus:g}")


def _negative_at_zero_check(prob: EllipticProblem) -> ConditionCheck:
    if isinstance(prob.source, GridFunction):
        values = prob.source.values[prob.grid.interior_slice]
        passed = bool(np.all(values < 0))
        return _check(CONDITION_F0, passed, "tabulated source sign at interior nodes")

    points = _validation_lattice(prob.grid.d)
    env = {name: x for name, x in zip(("x", "y"), points)}
    env["u"] = 0.0
    try:
        values = np.broadcast_to(evaluate(prob.source, env), points[0].shape)
    except EvaluationError as e:
        return _check(CONDITION_F0, False, f"source cannot be evaluated: {e.reason}")
    if np.all(values < 0):
        return _check(CONDITION_F0, True, "f(x, 0) < 0 on the lattice")
    index = np.unravel_index(int(np.argmax(values)), values.shape)
    witness = {name: float(x[index]) for name, x in zip(("x", "y"), points)}
    witness["value"] = float(values[index])
    return _check(CONDITION_F0, False, f"f(x, 0) = {witness['value']:.6g} is not negative", witness)


def validate(prob: EllipticProblem) -> ValidationReport:
    """
    Sampled checks of (p1), (p2), (f) and, on request, f(., 0) < 0

    Returns:
        ValidationReport with one entry per condition; never raises
    """
    checks = exponent_checks(prob.exponents, prob.grid.d)
    try:
        checks.append(_growth_check(prob))
    except AnisolveError as e:
        checks.append(_check(CONDITION_F, False, str(e)))

    if prob.expect_negative_at_zero:
        try:
            checks.append(_negative_at_zero_check(prob))
        except AnisolveError as e:
            checks.append(_check(CONDITION_F0, False, str(e)))

    report = ValidationReport(passed=all(c["passed"] for c in checks), checks=checks)
    for check in checks:
        logger.debug("%s %s: %s", check["condition"], "ok" if check["passed"] else "FAILED", check["message"])
    return report
