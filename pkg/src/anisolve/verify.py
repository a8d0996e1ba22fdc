"""
Verify Module

Randomized invariant suite over the function-space, grid and frozen-solver
layers. Every property draws from its own child stream of one seed, so the
suite is reproducible and a different seed exercises different data.
"""

import logging
import time
from typing import Callable, Optional

import numpy as np

from .config import DEFAULT_SEED, MONOTONICITY_EXPONENTS, VERIFY_TRIALS
from .constants import EMOJI_CHECK, EMOJI_CROSS, EMOJI_SEARCH, SEPARATOR_SHORT
from .frozen import NewtonParams, solve_frozen
from .grid import FrozenProblem, Grid, GridFunction, energy, energy_gradient, monotonicity_gap
from .spaces import ExponentField, holder_pairing, luxemburg_norm, modular
from .types import PropertyResult, VerifyReport

logger = logging.getLogger(__name__)

RELATIVE_TOL = 1e-8
HOLDER_TOL = 1e-10
GRADIENT_TOL = 1e-6
CONVEXITY_TOL = 1e-12
SAMPLES = 64

# (failures, worst violation) from (rng, trials)
Check = Callable[[np.random.Generator, int], tuple[int, float]]


# ==============================================================================
# RANDOM DATA
# ==============================================================================


def _random_samples(rng: np.random.Generator, size: int = SAMPLES) -> np.ndarray:
    values = rng.uniform(-1.0, 1.0, size) * rng.uniform(0.1, 3.0)
    values[rng.integers(size)] = 1.0  # never identically zero
    return values


def _random_lebesgue_exponent(rng: np.random.Generator, size: int = SAMPLES) -> np.ndarray:
    lower = rng.uniform(1.2, 3.0)
    return lower + rng.uniform(0.0, 3.0) * rng.random(size)


def _piecewise(rng: np.random.Generator, size: int = SAMPLES) -> np.ndarray:
    pieces = int(rng.integers(1, 9))
    return np.repeat(rng.normal(size=pieces), -(-size // pieces))[:size]


def random_frozen_problem(rng: np.random.Generator, d: int) -> FrozenProblem:
    """Small frozen problem with variable q >= 2.2 and random eps, sigma, source, anchor"""
    n = int(rng.integers(6, 11)) if d == 1 else int(rng.integers(3, 6))
    grid = Grid(d, n)
    q = ExponentField(tuple(rng.uniform(2.2, 4.0, grid.edge_shape(axis)) for axis in range(d)))
    return FrozenProblem(
        q,
        GridFunction(grid, rng.normal(size=grid.shape), dirichlet=False),
        anchor=GridFunction.pinned(grid, 0.3 * rng.normal(size=grid.shape)),
        epsilon=float(rng.choice([0.0, 1e-2])),
        p_plus=q.upper + rng.uniform(0.0, 1.0),
        mass_weight=float(rng.choice([0.0, 10.0])),
    )


def random_state(rng: np.random.Generator, grid: Grid, scale: float = 0.5) -> GridFunction:
    return GridFunction.pinned(grid, rng.uniform(-scale, scale, grid.shape))


# ==============================================================================
# PROPERTIES
# ==============================================================================


def check_modular_norm(rng: np.random.Generator, trials: int) -> tuple[int, float]:
    """Modular/norm relations in the three branches norm > 1, norm < 1, norm = 1"""
    failures, worst = 0, -np.inf
    for branch in ("above", "below", "unit"):
        for _ in range(trials):
            u = _random_samples(rng)
            q = _random_lebesgue_exponent(rng)
            q_min, q_max = float(q.min()), float(q.max())

            if branch == "unit":
                u = u / luxemburg_norm(u, q)
                violation = max(abs(modular(u, q) - 1.0), abs(luxemburg_norm(u, q) - 1.0)) - RELATIVE_TOL
            else:
                target = rng.uniform(1.1, 10.0) if branch == "above" else rng.uniform(0.05, 0.9)
                u = u * (target / luxemburg_norm(u, q))
                norm = luxemburg_norm(u, q)
                value = modular(u, q)
                low, high = (norm**q_min, norm**q_max) if branch == "above" else (norm**q_max, norm**q_min)
                violation = max(low - value, value - high) / value - RELATIVE_TOL

            worst = max(worst, violation)
            failures += violation > 0
    return failures, worst


def check_norm_homogeneity(rng: np.random.Generator, trials: int) -> tuple[int, float]:
    """||lambda u|| = |lambda| ||u||"""
    failures, worst = 0, -np.inf
    for _ in range(trials):
        u = _random_samples(rng)
        q = _random_lebesgue_exponent(rng)
        scale = rng.choice([-1.0, 1.0]) * 10.0 ** rng.uniform(-2.0, 2.0)
        expected = abs(scale) * luxemburg_norm(u, q)
        violation = abs(luxemburg_norm(scale * u, q) - expected) / expected - RELATIVE_TOL
        worst = max(worst, violation)
        failures += violation > 0
    return failures, worst


def check_holder(rng: np.random.Generator, trials: int) -> tuple[int, float]:
    """|sum u v w| <= (1/r_min + 1/s_min) ||u||_r ||v||_s for conjugate r, s"""
    x = (np.arange(SAMPLES) + 0.5) / SAMPLES
    failures, worst = 0, -np.inf
    for _ in range(trials):
        base = rng.uniform(1.5, 4.0)
        r = base + rng.uniform(0.0, base - 1.2) * np.sin(2.0 * np.pi * x + rng.uniform(0.0, 2.0 * np.pi))
        s = r / (r - 1.0)
        lhs, rhs = holder_pairing(_piecewise(rng), _piecewise(rng), r, s)
        violation = lhs - rhs - HOLDER_TOL
        worst = max(worst, violation)
        failures += violation > 0
    return failures, worst


def check_monotonicity(rng: np.random.Generator, trials: int) -> tuple[int, float]:
    """Vector monotonicity inequality with constant 2^{2-p} for every test exponent"""
    failures, worst = 0, -np.inf
    for p in MONOTONICITY_EXPONENTS:
        scale = 10.0 ** rng.uniform(-1.0, 1.0, (trials, 1))
        a = rng.normal(size=(trials, 2)) * scale
        b = rng.normal(size=(trials, 2)) * scale
        lhs, rhs = monotonicity_gap(a, b, p)
        violation = rhs - lhs - CONVEXITY_TOL * (1.0 + rhs)
        worst = max(worst, float(np.max(violation)))
        failures += int(np.sum(violation > 0))
    return failures, worst


def check_gradient(rng: np.random.Generator, trials: int) -> tuple[int, float]:
    """Energy gradient against central finite differences of the energy"""
    failures, worst = 0, -np.inf
    for trial in range(trials):
        fp = random_frozen_problem(rng, d=1 + trial % 2)
        u = random_state(rng, fp.grid)
        gradient = energy_gradient(u, fp)
        scale = float(np.max(np.abs(gradient)))
        x = u.interior()

        trial_failed = False
        for j in range(x.size):
            delta = 1e-6 * (1.0 + abs(x[j]))
            plus, minus = x.copy(), x.copy()
            plus[j] += delta
            minus[j] -= delta
            fd = (energy(GridFunction.from_interior(fp.grid, plus), fp) - energy(GridFunction.from_interior(fp.grid, minus), fp)) / (2.0 * delta)
            allowed = GRADIENT_TOL * max(abs(gradient[j]), scale)
            violation = (abs(fd - gradient[j]) - allowed) / max(scale, 1.0)
            worst = max(worst, violation)
            trial_failed |= violation > 0
        failures += trial_failed
    return failures, worst


def check_convexity(rng: np.random.Generator, trials: int) -> tuple[int, float]:
    """E(theta u + (1 - theta) v) <= theta E(u) + (1 - theta) E(v)"""
    failures, worst = 0, -np.inf
    for trial in range(trials):
        fp = random_frozen_problem(rng, d=1 + trial % 2)
        u, v = random_state(rng, fp.grid), random_state(rng, fp.grid)
        theta = rng.uniform(0.05, 0.95)
        mixed = GridFunction(fp.grid, theta * u.values + (1.0 - theta) * v.values)
        e_u, e_v, e_mixed = energy(u, fp), energy(v, fp), energy(mixed, fp)
        violation = e_mixed - theta * e_u - (1.0 - theta) * e_v - CONVEXITY_TOL * (1.0 + max(abs(e_u), abs(e_v), abs(e_mixed)))
        worst = max(worst, violation)
        failures += violation > 0
    return failures, worst


def check_operator_monotonicity(rng: np.random.Generator, trials: int) -> tuple[int, float]:
    """<grad E(u) - grad E(v), u - v> >= 0 with source and anchor fixed"""
    failures, worst = 0, -np.inf
    for trial in range(trials):
        fp = random_frozen_problem(rng, d=1 + trial % 2)
        u, v = random_state(rng, fp.grid), random_state(rng, fp.grid)
        terms = (energy_gradient(u, fp) - energy_gradient(v, fp)) * (u.interior() - v.interior())
        violation = -float(np.sum(terms)) - CONVEXITY_TOL * (1.0 + float(np.sum(np.abs(terms))))
        worst = max(worst, violation)
        failures += violation > 0
    return failures, worst


def check_coercivity(rng: np.random.Generator, trials: int) -> tuple[int, float]:
    """E(t w) > E(0) for t = 1e3 along random unit directions"""
    failures, worst = 0, -np.inf
    for trial in range(trials):
        fp = random_frozen_problem(rng, d=1 + trial % 2)
        direction = rng.normal(size=fp.grid.unknowns)
        direction /= np.linalg.norm(direction)
        far = energy(GridFunction.from_interior(fp.grid, 1e3 * direction), fp)
        violation = energy(fp.grid.zeros(), fp) - far
        worst = max(worst, violation)
        failures += violation >= 0
    return failures, worst


def _uniqueness_problem(rng: np.random.Generator) -> FrozenProblem:
    grid = Grid(1, 32)
    q = ExponentField((rng.uniform(2.2, 4.0, grid.edge_shape(0)),))
    return FrozenProblem(
        q,
        GridFunction(grid, rng.normal(size=grid.shape), dirichlet=False),
        anchor=random_state(rng, grid, 0.1),
        mass_weight=10.0,
    )


def check_uniqueness(rng: np.random.Generator, trials: int) -> tuple[int, float]:
    """Two solves from different random starts agree within 10 tol_residual"""
    failures, worst = 0, -np.inf
    for _ in range(trials):
        fp = _uniqueness_problem(rng)
        first, report = solve_frozen(fp, init=random_state(rng, fp.grid, 0.1))
        second, _ = solve_frozen(fp, init=random_state(rng, fp.grid, 0.1))
        violation = float(np.max(np.abs(first.values - second.values))) - 10.0 * report["tol_residual"]
        worst = max(worst, violation)
        failures += violation > 0
    return failures, worst


def check_newton_descent(rng: np.random.Generator, trials: int) -> tuple[int, float]:
    """Energy history of a frozen solve never increases beyond roundoff"""
    failures, worst = 0, -np.inf
    for _ in range(trials):
        fp = _uniqueness_problem(rng)
        _, report = solve_frozen(fp, init=random_state(rng, fp.grid, 0.1), params=NewtonParams())
        history = np.asarray(report["energy_history"])
        increase = np.diff(history) - CONVEXITY_TOL * (1.0 + np.abs(history[:-1]))
        violation = float(np.max(increase, initial=-np.inf))
        worst = max(worst, violation)
        failures += violation > 0
    return failures, worst


PROPERTIES: dict[str, tuple[Check, str]] = {
    "modular_norm": (check_modular_norm, "modular_norm"),
    "norm_homogeneity": (check_norm_homogeneity, "modular_norm"),
    "holder": (check_holder, "holder"),
    "monotonicity": (check_monotonicity, "monotonicity"),
    "gradient_consistency": (check_gradient, "gradient"),
    "convexity": (check_convexity, "convexity"),
    "operator_monotonicity": (check_operator_monotonicity, "operator_monotonicity"),
    "coercivity": (check_coercivity, "coercivity"),
    "frozen_uniqueness": (check_uniqueness, "uniqueness"),
    "newton_descent": (check_newton_descent, "uniqueness"),
}


# ==============================================================================
# SUITE
# ==============================================================================


def run_verify(seed: int = DEFAULT_SEED, trials: Optional[int] = None, verbose: bool = True) -> VerifyReport:
    """
    Run every property with its own child stream of the seed

    Args:
        seed: Root seed
        trials: Override for every trial count (smoke-test mode)
        verbose: Print one line per property

    Returns:
        VerifyReport; passed is False when any property fails
    """
    streams = np.random.SeedSequence(seed).spawn(len(PROPERTIES))
    results: list[PropertyResult] = []

    if verbose:
        print(f"{EMOJI_SEARCH} Verifying invariants (seed {seed})")
        print(SEPARATOR_SHORT)

    for (name, (check, budget_key)), stream in zip(PROPERTIES.items(), streams):
        count = trials if trials is not None else VERIFY_TRIALS[budget_key]
        started = time.perf_counter()
        failures, worst = check(np.random.default_rng(stream), count)
        elapsed = time.perf_counter() - started

        result = PropertyResult(name=name, passed=failures == 0, trials=count, failures=int(failures), worst=float(worst))
        results.append(result)
        logger.debug("%s: %d trial(s), worst margin %.3e, %.2fs", name, count, worst, elapsed)
        if verbose:
            marker = EMOJI_CHECK if result["passed"] else EMOJI_CROSS
            print(f"{marker} {name:<24} trials={count:<6} failures={failures:<4} ({elapsed:.2f}s)")

    return VerifyReport(seed=seed, passed=all(r["passed"] for r in results), properties=results)
