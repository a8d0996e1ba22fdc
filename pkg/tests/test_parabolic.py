import math

import numpy as np
import pytest
from scipy.optimize import bisect

from anisolve.constants import B_GRAD_NORM, B_LQ_NORM, CONDITION_TIME, CONDITION_U0
from anisolve.elliptic import ContinuationParams, ExponentSpec
from anisolve.exceptions import (
    ConfigurationError,
    NonConvergenceError,
    TrajectoryAbortedError,
    ValidationError,
)
from anisolve.expr import parse
from anisolve.frozen import solve_frozen
from anisolve.grid import FrozenProblem, Grid, GridFunction
from anisolve.parabolic import (
    NonlocalMap,
    ParabolicParams,
    ParabolicProblem,
    Trajectory,
    b_eval,
    frozen_exponents,
    solve_parabolic,
    steklov_average,
    step,
    validate_parabolic,
)

PI = math.pi
STEKLOV_TOL = 1e-12
LEDGER_FACTOR = 100.0


def _problem(
    expression="2",
    bounds=(2, 2),
    lipschitz=0,
    b=None,
    source="0",
    u0="sin(3.141592653589793*x)",
    T=0.1,
    N0=10,
    n=32,
) -> ParabolicProblem:
    spec = ExponentSpec.parse([expression], [list(bounds)], [lipschitz])
    return ParabolicProblem(
        grid=Grid(1, n),
        exponents=spec,
        b=b or NonlocalMap.grad_norm(spec),
        source=parse(source),
        u0=parse(u0),
        T=T,
        N0=N0,
    )


# ==============================================================================
# STEKLOV AVERAGE
# ==============================================================================


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
def test_steklov_average_is_exact_for_cubics(degree):
    grid = Grid(1, 4)
    t, h = 0.3, 0.2
    f = parse(f"(1 + x) * t^{degree}")
    exact = ((t + h) ** (degree + 1) - t ** (degree + 1)) / ((degree + 1) * h)
    average = steklov_average(f, t, h, grid)
    np.testing.assert_allclose(average.values, (1.0 + grid.nodes[0]) * exact, rtol=0.0, atol=STEKLOV_TOL)


def test_steklov_average_of_mixed_polynomial():
    grid = Grid(2, 3)
    t, h = 1.5, 0.25
    f = parse("t^3 - 2*t^2*y + t*x - 7")
    average = steklov_average(f, t, h, grid)

    def moment(m):
        return ((t + h) ** (m + 1) - t ** (m + 1)) / ((m + 1) * h)

    x, y = grid.nodes
    expected = moment(3) - 2.0 * moment(2) * y + moment(1) * x - 7.0
    np.testing.assert_allclose(average.values, expected, rtol=0.0, atol=STEKLOV_TOL * 10)


def test_steklov_average_needs_positive_step():
    with pytest.raises(ConfigurationError):
        steklov_average(parse("1"), 0.0, 0.0, Grid(1, 4))


# ==============================================================================
# NONLOCAL MAP
# ==============================================================================


def test_b_of_zero_is_zero():
    grid = Grid(1, 8)
    assert b_eval(grid.zeros(), NonlocalMap(B_GRAD_NORM, 2.0)) == 0.0
    assert b_eval(grid.zeros(), NonlocalMap(B_LQ_NORM, 3.0)) == 0.0


def test_gradient_norm_of_hat():
    hat = GridFunction(Grid(1, 2), [0.0, 0.5, 0.0])
    assert b_eval(hat, NonlocalMap(B_GRAD_NORM, 2.0)) == pytest.approx(1.0, rel=1e-15)


def test_l2_norm_of_sine():
    grid = Grid(1, 128)
    u = GridFunction.pinned(grid, np.sin(PI * grid.nodes[0]))
    assert b_eval(u, NonlocalMap.lq_norm(2.0)) == pytest.approx(math.sqrt(0.5), abs=1e-3)


def test_nonlocal_map_checks():
    spec = ExponentSpec.parse(["3 + tanh(s)", "2.5"], [[2, 4], [2.5, 2.5]], [1, 0])
    assert NonlocalMap.grad_norm(spec).exponent == 2.0
    with pytest.raises(ValidationError):
        NonlocalMap.lq_norm(0.5)
    with pytest.raises(ConfigurationError):
        NonlocalMap("sup_norm", 2.0)


def test_frozen_exponents_are_constant():
    spec = ExponentSpec.parse(["3 + tanh(s)"], [[2, 4]], [1])
    q = frozen_exponents(spec, 0.0, Grid(1, 8))
    assert q.lower == q.upper == 3.0


# ==============================================================================
# TRAJECTORY
# ==============================================================================


def test_trajectory_is_piecewise_constant_in_time():
    grid = Grid(1, 4)
    states = tuple(GridFunction.pinned(grid, np.full(grid.shape, float(k))) for k in range(3))
    trajectory = Trajectory(0.1, states, (0.0, 1.0, 2.0))
    assert trajectory.steps == 2
    assert trajectory.final is states[2]
    assert trajectory.at(0.0) is states[0]
    assert trajectory.at(0.05) is states[1]
    assert trajectory.at(0.1) is states[1]
    assert trajectory.at(0.15) is states[2]
    assert trajectory.at(0.2) is states[2]
    with pytest.raises(ValueError):
        trajectory.at(0.3)
    with pytest.raises(ValueError):
        trajectory.at(-0.1)


# ==============================================================================
# STEPS
# ==============================================================================


def test_constant_exponent_step_needs_one_solve():
    prob = _problem()
    u, report = step(prob.initial(), 1, prob)
    assert report["fixed_point_iterations"] == 1
    assert report["b_defect"] == 0.0
    assert report["s"] == pytest.approx(b_eval(u, prob.b))


def test_zero_data_stays_zero():
    prob = _problem(u0="0")
    u, report = step(prob.initial(), 1, prob)
    assert u.sup() == 0.0
    assert report["s"] == 0.0


def test_scalar_fixed_point_matches_bisection_oracle():
    prob = _problem(expression="3 + tanh(s)", bounds=(2, 4), lipschitz=1, source="1", u0="0", T=0.1, N0=1, n=64)
    u, report = step(prob.initial(), 1, prob)

    grid = prob.grid
    anchor = prob.initial()
    source = GridFunction(grid, np.ones(grid.shape), dirichlet=False)

    def g(s):
        fp = FrozenProblem(frozen_exponents(prob.exponents, s, grid), source, anchor=anchor, mass_weight=1.0 / prob.h)
        u_s, _ = solve_frozen(fp)
        return b_eval(u_s, prob.b) - s

    oracle = bisect(g, 0.0, 10.0, xtol=1e-12)
    assert abs(report["s"] - oracle) <= 1e-6
    assert report["fixed_point_iterations"] > 1
    assert report["s_history"][0] == 0.0


def test_epsilon_continuation_inside_steps_is_a_small_perturbation():
    prob = _problem(expression="3 + tanh(s)", bounds=(2, 4), lipschitz=1, source="1", u0="0", T=0.1, N0=1)
    plain, _ = step(prob.initial(), 1, prob)
    continued, _ = step(
        prob.initial(),
        1,
        prob,
        ParabolicParams(
            epsilon_continuation=True,
            continuation=ContinuationParams(epsilon_0=1e-2, factor=0.1, epsilon_min=1e-10),
        ),
    )
    assert np.max(np.abs(plain.values - continued.values)) <= 1e-6


def test_fixed_point_budget_exhaustion():
    prob = _problem(expression="3 + tanh(s)", bounds=(2, 4), lipschitz=1, source="1", u0="0", N0=2)
    with pytest.raises(NonConvergenceError):
        step(prob.initial(), 1, prob, ParabolicParams(max_fixed_point=1))


def test_failed_step_aborts_with_partial_trajectory():
    prob = _problem(expression="3 + tanh(s)", bounds=(2, 4), lipschitz=1, source="1", u0="0", N0=2)
    with pytest.raises(TrajectoryAbortedError) as info:
        solve_parabolic(prob, ParabolicParams(max_fixed_point=1))
    assert info.value.step == 1
    assert info.value.trajectory.steps == 0
    assert isinstance(info.value.cause, NonConvergenceError)


@pytest.mark.parametrize("kwargs", [{"theta_b": 0.0}, {"tol_b": 0.0}, {"max_fixed_point": 0}])
def test_parabolic_params_are_checked(kwargs):
    with pytest.raises(ConfigurationError):
        ParabolicParams(**kwargs)


# ==============================================================================
# FULL SOLVES
# ==============================================================================


def test_heat_equation_oracle():
    prob = _problem(T=0.1, N0=200, n=128)
    trajectory, report = solve_parabolic(prob)
    assert trajectory.steps == 200

    x = prob.grid.nodes[0]
    exact = math.exp(-PI**2 * 0.1) * np.sin(PI * x)
    error = np.max(np.abs(trajectory.final.values - exact)) / np.max(np.abs(exact))
    assert error <= 0.02
    assert _peak(trajectory.at(0.1)) == pytest.approx(0.3727, rel=0.02)
    assert report["energy_ok"]
    assert report["l2_nonincreasing"]


def _peak(u: GridFunction) -> float:
    return float(np.max(u.values))


@pytest.mark.parametrize("case", range(5))
def test_energy_ledger_without_source(case):
    rng = np.random.default_rng(1000 + case)
    a = rng.uniform(0.5, 2.0)
    b = NonlocalMap.lq_norm(float(rng.choice([2.0, 3.0]))) if case % 2 else None
    c1, c2 = rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0)
    prob = _problem(
        expression=f"2.5 + 0.5*tanh({a!r}*s)",
        bounds=(2, 3),
        lipschitz=0.5 * a,
        b=b,
        u0=f"{c1!r}*sin(3.141592653589793*x) + {c2!r}*sin(6.283185307179586*x)",
        T=0.05,
        N0=5,
        n=16,
    )
    trajectory, report = solve_parabolic(prob)

    assert report["energy_ok"]
    assert report["l2_nonincreasing"]
    for entry in report["steps"]:
        assert entry["l2_sq"] + 2.0 * prob.h * entry["modular"] <= entry["l2_sq_prev"] + LEDGER_FACTOR * entry["tol_residual"]
        assert entry["slack"] >= -LEDGER_FACTOR * entry["tol_residual"]
    norms = [state.l2_squared() for state in trajectory.states]
    assert all(later <= earlier + 1e-12 for earlier, later in zip(norms, norms[1:]))


def test_cumulative_bound_with_source():
    prob = _problem(expression="3 + tanh(s)", bounds=(2, 4), lipschitz=1, source="1 + t", T=0.5, N0=10)
    trajectory, report = solve_parabolic(prob)
    assert report["cumulative_ok"]
    assert report["energy_ok"]
    assert report["l2_nonincreasing"] is None
    assert report["max_l2_sq"] <= report["l2_bound"]
    assert len(trajectory.s_values) == trajectory.steps + 1


# ==============================================================================
# VALIDATION
# ==============================================================================


def test_heat_problem_validates():
    assert validate_parabolic(_problem())["passed"]


def test_initial_data_must_vanish_on_boundary():
    report = validate_parabolic(_problem(u0="1"))
    assert not report["passed"]
    check = next(c for c in report["checks"] if c["condition"] == CONDITION_U0)
    assert not check["passed"]


def test_invalid_time_grid_is_reported():
    report = validate_parabolic(_problem(T=-0.1))
    check = next(c for c in report["checks"] if c["condition"] == CONDITION_TIME)
    assert not check["passed"]
    assert not report["passed"]
