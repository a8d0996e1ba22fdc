"""
Variable-Exponent Spaces Module

Discrete calculus for variable-exponent Lebesgue and Sobolev spaces:
modulars, Luxemburg norms, the anisotropic modular of a grid function and the
Hölder pairing. Every integral is a midpoint sum with one weight per sample,
so all inequalities close exactly in the discrete setting.

Sampled fields are either GridFunction instances (nodal values, weight h^d)
or plain numpy arrays (weight 1/size by default: uniform midpoint samples of a
domain of measure one).

The h^d weight covers all (n+1)^d nodes. Dirichlet fields vanish on the
boundary, so only interior nodes contribute; a field with boundary values
(a source, a Steklov average) integrates over measure (1+h)^d and every bound
built from it is an overestimate.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Union

import numpy as np
from scipy.optimize import bisect

from .config import SPACES
from .constants import LEBESGUE_EXPONENT_FLOOR, OPERATOR_EXPONENT_FLOOR
from .exceptions import LayoutMismatchError, ValidationError

if TYPE_CHECKING:
    from .grid import Grid, GridFunction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScalarExponent:
    """A single exponent value q >= 2 (spatially constant exponent)"""

    value: float

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < OPERATOR_EXPONENT_FLOOR:
            raise ValidationError(
                "(p1)", f"exponent {self.value} is below {OPERATOR_EXPONENT_FLOOR}"
            )


@dataclass(frozen=True, eq=False)
class ExponentField:
    """
    Per-direction exponent samples q_1, ..., q_d

    For operator exponents the samples live on edge midpoints (direction i on
    the edges along axis i) and must satisfy q >= 2. Generic Lebesgue exponents
    (e.g. Hölder conjugates) use floor=1.

    Samples are stored read-only; lower/upper are the true extremes.
    """

    samples: tuple[np.ndarray, ...]
    floor: float = OPERATOR_EXPONENT_FLOOR
    lower: float = field(init=False)
    upper: float = field(init=False)

    def __post_init__(self):
        if not self.samples:
            raise ValidationError("(p1)", "an exponent field needs at least one direction")

        arrays = []
        for i, raw in enumerate(self.samples):
            values = np.array(raw, dtype=float)
            if not np.all(np.isfinite(values)):
                raise ValidationError("(p1)", f"non-finite exponent sample in direction {i + 1}")
            if values.size and values.min() < self.floor:
                idx = tuple(int(j) for j in np.unravel_index(values.argmin(), values.shape))
                raise ValidationError(
                    "(p1)",
                    f"exponent {values.min():.6g} below {self.floor} "
                    f"in direction {i + 1} at sample {idx}",
                )
            values.setflags(write=False)
            arrays.append(values)

        object.__setattr__(self, "samples", tuple(arrays))
        object.__setattr__(self, "lower", float(min(a.min() for a in arrays)))
        object.__setattr__(self, "upper", float(max(a.max() for a in arrays)))

    @property
    def dimension(self) -> int:
        return len(self.samples)

    def component(self, axis: int) -> np.ndarray:
        return self.samples[axis]

    @classmethod
    def constant(cls, grid: "Grid", values: "list[float | ScalarExponent]") -> "ExponentField":
        """Spatially constant per-direction exponents on the edges of a grid"""
        if len(values) != grid.d:
            raise LayoutMismatchError((grid.d,), (len(values),), "exponent directions")
        samples = []
        for axis, value in enumerate(values):
            q = value.value if isinstance(value, ScalarExponent) else float(value)
            samples.append(np.full(grid.edge_shape(axis), q))
        return cls(tuple(samples))

    @classmethod
    def lebesgue(cls, values: Union[np.ndarray, float], shape: tuple = ()) -> "ExponentField":
        """A single-component exponent for L^{q(.)} with the q >= 1 floor"""
        array = np.broadcast_to(np.asarray(values, dtype=float), shape or np.shape(values))
        return cls((np.array(array),), floor=LEBESGUE_EXPONENT_FLOOR)


Exponent = Union[float, ScalarExponent, np.ndarray, ExponentField]
Sampled = Union["GridFunction", np.ndarray]


# ==============================================================================
# HELPERS
# ==============================================================================


def _samples(u: Sampled, weight: Optional[float]) -> tuple[np.ndarray, float]:
    # boundary nodes carry the full h^d weight too
    values = getattr(u, "values", None)
    if values is not None:
        w = u.grid.cell_weight if weight is None else weight
        return np.asarray(values, dtype=float), float(w)
    array = np.asarray(u, dtype=float)
    w = 1.0 / array.size if weight is None else weight
    return array, float(w)


def _exponent(q: Exponent, shape: tuple) -> tuple[Union[float, np.ndarray], float, float]:
    """Return (values, q_min, q_max) with values broadcastable to shape"""
    if isinstance(q, ScalarExponent):
        return q.value, q.value, q.value
    if isinstance(q, ExponentField):
        if q.dimension != 1:
            raise LayoutMismatchError((1,), (q.dimension,), "exponent directions")
        q = q.samples[0]
    if np.ndim(q) == 0:
        value = float(q)
        if not math.isfinite(value) or value < LEBESGUE_EXPONENT_FLOOR:
            raise ValidationError("(p1)", f"exponent {value} below {LEBESGUE_EXPONENT_FLOOR}")
        return value, value, value
    array = np.asarray(q, dtype=float)
    if array.shape != shape:
        raise LayoutMismatchError(shape, array.shape, "exponent")
    return array, float(array.min()), float(array.max())


def _weighted_power_sum(values: np.ndarray, q: Union[float, np.ndarray], weight: float) -> float:
    with np.errstate(over="ignore"):
        # np.sum reduces pairwise in a fixed order: reproducible across runs
        return float(weight * np.sum(np.abs(values) ** q))


# ==============================================================================
# MODULAR AND NORMS
# ==============================================================================


def modular(u: Sampled, q: Exponent, weight: Optional[float] = None) -> float:
    """
    Modular rho(u) = sum over samples of weight * |u|^q

    Args:
        u: GridFunction or array of samples
        q: Exponent (scalar, ScalarExponent, array of u's shape, or 1-component field)
        weight: Quadrature weight per sample (default h^d or 1/size)

    Returns:
        Non-negative modular value; 0 iff u == 0

    Raises:
        LayoutMismatchError: If q is sampled on a different layout than u

    Example:
        >>> modular(np.full(10, 2.0), 3.0)
        8.0
    """
    values, w = _samples(u, weight)
    qv, _, _ = _exponent(q, values.shape)
    return _weighted_power_sum(values, qv, w)


def luxemburg_norm(
    u: Sampled,
    q: Exponent,
    tol: Optional[float] = None,
    weight: Optional[float] = None,
) -> float:
    """
    Luxemburg norm inf{tau > 0 : rho(u / tau) <= 1}

    The map tau -> rho(u / tau) is strictly decreasing for u != 0; the root of
    rho(u / tau) = 1 is bracketed by doubling/halving from tau = 1 and then
    located by bisection. The bisection tolerance on tau is chosen so that the
    modular defect |rho(u / tau*) - 1| stays below tol.

    Args:
        u: GridFunction or array of samples
        q: Exponent
        tol: Modular defect tolerance (default SPACES["luxemburg_tol"])
        weight: Quadrature weight per sample

    Returns:
        tau* (0.0 for u == 0)
    """
    tol = SPACES["luxemburg_tol"] if tol is None else tol
    if tol <= 0:
        raise ValueError("tol must be positive")

    values, w = _samples(u, weight)
    qv, _, q_max = _exponent(q, values.shape)
    if not np.any(values):
        return 0.0

    def defect(tau: float) -> float:
        return _weighted_power_sum(values / tau, qv, w) - 1.0

    guard = SPACES["lower_guard"]
    if defect(1.0) >= 0.0:
        lo, hi = 1.0, 2.0
        while defect(hi) >= 0.0:
            lo, hi = hi, 2.0 * hi
    else:
        lo, hi = 0.5, 1.0
        while defect(lo) <= 0.0:
            if lo < guard:
                return lo
            lo, hi = 0.5 * lo, lo

    rtol = max(tol / (2.0 * q_max), 4.0 * np.finfo(float).eps)
    tau = bisect(defect, lo, hi, xtol=guard, rtol=rtol, maxiter=SPACES["max_bisection"])
    logger.debug("Luxemburg norm %.12g (defect %.2e)", tau, defect(tau))
    return float(tau)


def anisotropic_modular(u: "GridFunction", q: ExponentField) -> float:
    """
    Anisotropic modular sum_i sum_edges h^d |D_i u|^{q_i}

    Args:
        u: Grid function respecting the Dirichlet boundary
        q: Per-direction exponent field on the grid edges

    Returns:
        Non-negative modular of the discrete gradient
    """
    from .grid import edge_derivative

    if q.dimension != u.grid.d:
        raise LayoutMismatchError((u.grid.d,), (q.dimension,), "exponent directions")

    total = 0.0
    for axis in range(u.grid.d):
        total += modular(edge_derivative(u, axis), q.samples[axis], weight=u.grid.cell_weight)
    return total


def holder_pairing(
    u: Sampled,
    v: Sampled,
    r: Exponent,
    s: Exponent,
    weight: Optional[float] = None,
) -> tuple[float, float]:
    """
    Both sides of the variable-exponent Hölder inequality

        |sum u v w| <= (1/r_min + 1/s_min) * ||u||_r * ||v||_s

    Args:
        u, v: Sampled fields on the same layout
        r, s: Conjugate exponents (1/r + 1/s = 1 samplewise)
        weight: Quadrature weight per sample

    Returns:
        Tuple of (lhs, rhs)

    Raises:
        ValidationError: If r and s are not conjugate within 1e-12
    """
    u_values, w = _samples(u, weight)
    v_values, _ = _samples(v, weight)
    if u_values.shape != v_values.shape:
        raise LayoutMismatchError(u_values.shape, v_values.shape, "Hölder pair")

    r_values, r_min, _ = _exponent(r, u_values.shape)
    s_values, s_min, _ = _exponent(s, u_values.shape)

    gap = np.abs(1.0 / np.asarray(r_values) + 1.0 / np.asarray(s_values) - 1.0)
    if np.any(gap > SPACES["conjugacy_tol"]):
        raise ValidationError(
            "Hölder conjugacy", f"1/r + 1/s deviates from 1 by {float(np.max(gap)):.3e}"
        )

    lhs = abs(float(w * np.sum(u_values * v_values)))
    rhs = (
        (1.0 / r_min + 1.0 / s_min)
        * luxemburg_norm(u_values, r_values, weight=w)
        * luxemburg_norm(v_values, s_values, weight=w)
    )
    return lhs, rhs
