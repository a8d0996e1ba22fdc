"""
Grid Module

Uniform tensor grids on (0,1)^d, d in {1, 2}, with homogeneous Dirichlet
pinning; grid functions; edge derivatives; the discrete anisotropic energy of
a frozen-exponent problem, its gradient and Newton Hessian.

Layout:
    nodes  : array of shape (n+1,)*d, indexing "ij", node j at x = j/n
    edges  : direction i lives on an array with n cells along axis i
             and n+1 nodes along the other axis
    unknowns: interior nodes, flattened in C order
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .config import GRID
from .constants import MIN_CELLS, SUPPORTED_DIMENSIONS
from .exceptions import ConfigurationError, LayoutMismatchError, ValidationError
from .spaces import ExponentField

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid:
    """Uniform grid with n cells per axis on the unit box"""

    d: int
    n: int

    def __post_init__(self):
        if self.d not in SUPPORTED_DIMENSIONS:
            raise ConfigurationError("grid.d", f"dimension {self.d} is not one of {SUPPORTED_DIMENSIONS}")
        if self.n < MIN_CELLS:
            raise ConfigurationError("grid.n", f"need at least {MIN_CELLS} cells per axis, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def cell_weight(self) -> float:
        """Midpoint quadrature weight h^d shared by nodes and edges"""
        return self.h**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n + 1,) * self.d

    @property
    def interior_shape(self) -> tuple[int, ...]:
        return (self.n - 1,) * self.d

    @property
    def unknowns(self) -> int:
        return (self.n - 1) ** self.d

    def edge_shape(self, axis: int) -> tuple[int, ...]:
        return tuple(self.n if a == axis else self.n + 1 for a in range(self.d))

    @cached_property
    def nodes(self) -> tuple[np.ndarray, ...]:
        """Nodal coordinate arrays (x[, y]) of shape self.shape"""
        axis = np.arange(self.n + 1) / self.n
        return tuple(np.meshgrid(*([axis] * self.d), indexing="ij"))

    def edge_midpoints(self, axis: int) -> tuple[np.ndarray, ...]:
        """Coordinates of the midpoints of the edges along one axis"""
        lo = (slice(None),) * axis + (slice(0, -1),)
        hi = (slice(None),) * axis + (slice(1, None),)
        return tuple(0.5 * (x[lo] + x[hi]) for x in self.nodes)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.d):
            index = [slice(None)] * self.d
            index[axis] = 0
            mask[tuple(index)] = True
            index[axis] = -1
            mask[tuple(index)] = True
        mask.setflags(write=False)
        return mask

    @property
    def interior_slice(self) -> tuple[slice, ...]:
        return (slice(1, -1),) * self.d

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.shape))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """
    Nodal field on a grid

    When dirichlet is set the boundary values must be exactly zero. Values are
    copied and stored read-only.
    """

    grid: Grid
    values: np.ndarray
    dirichlet: bool = True

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise LayoutMismatchError(self.grid.shape, values.shape, "grid function")
        if not np.all(np.isfinite(values)):
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
            raise ValidationError("finite values", f"non-finite nodal value at node {bad}")
        if self.dirichlet and np.any(values[self.grid.boundary_mask] != 0.0):
            raise ValidationError("Dirichlet", "boundary nodes must be exactly zero")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def pinned(cls, grid: Grid, values: np.ndarray) -> "GridFunction":
        """Build a Dirichlet grid function, overwriting the boundary with zeros"""
        array = np.array(values, dtype=float)
        if array.shape != grid.shape:
            raise LayoutMismatchError(grid.shape, array.shape, "grid function")
        array[grid.boundary_mask] = 0.0
        return cls(grid, array)

    @classmethod
    def from_interior(cls, grid: Grid, vector: np.ndarray) -> "GridFunction":
        array = np.zeros(grid.shape)
        array[grid.interior_slice] = np.reshape(vector, grid.interior_shape)
        return cls(grid, array)

    def interior(self) -> np.ndarray:
        """Interior nodal values as a flat vector (a copy)"""
        return self.values[self.grid.interior_slice].ravel()

    def l2_squared(self) -> float:
        """Discrete integral of u^2"""
        return float(self.grid.cell_weight * np.sum(self.values**2))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class FrozenProblem:
    """
    One convex frozen-exponent problem

    E(u) = sum_i sum_edges h^d [|D_i u|^{q_i} / q_i + (eps / p_plus) |D_i u|^{p_plus}]
           + (sigma / 2) sum_nodes h^d (u - anchor)^2 - sum_nodes h^d source * u
    """

    q: ExponentField
    source: GridFunction
    anchor: Optional[GridFunction] = None
    epsilon: float = 0.0
    p_plus: Optional[float] = None
    mass_weight: float = 0.0
    grid: Grid = field(init=False)

    def __post_init__(self):
        grid = self.source.grid
        object.__setattr__(self, "grid", grid)

        if self.q.dimension != grid.d:
            raise LayoutMismatchError((grid.d,), (self.q.dimension,), "exponent directions")
        for axis in range(grid.d):
            if self.q.samples[axis].shape != grid.edge_shape(axis):
                raise LayoutMismatchError(grid.edge_shape(axis), self.q.samples[axis].shape, f"exponent q_{axis + 1}")

        if self.anchor is None:
            object.__setattr__(self, "anchor", grid.zeros())
        elif self.anchor.grid != grid:
            raise LayoutMismatchError(grid.shape, self.anchor.grid.shape, "anchor")

        if self.p_plus is None:
            object.__setattr__(self, "p_plus", self.q.upper)
        if not self.epsilon >= 0.0:
            raise ConfigurationError("epsilon", f"must be non-negative, got {self.epsilon}")
        if not self.mass_weight >= 0.0:
            raise ConfigurationError("mass_weight", f"must be non-negative, got {self.mass_weight}")
        if self.p_plus < self.q.upper:
            raise ValidationError("(p1)", f"p_plus {self.p_plus} is below the largest frozen exponent {self.q.upper}")


# ==============================================================================
# DISCRETE CALCULUS
# ==============================================================================


def edge_derivative(u: GridFunction, axis: int) -> np.ndarray:
    """
    Forward difference (u_{j+e_i} - u_j) / h on every edge along one axis

    Example:
        >>> grid = Grid(1, 2)
        >>> edge_derivative(GridFunction(grid, [0.0, 0.5, 0.0]), 0)
        array([ 1., -1.])
    """
    return np.diff(u.values, axis=axis) / u.grid.h


@lru_cache(maxsize=32)
def difference_matrices(grid: Grid) -> tuple[sp.csr_matrix, ...]:
    """
    Sparse maps from the interior unknown vector to each edge field (C order)

    The derivative along axis i is the Kronecker product of the 1D difference
    matrix on axis i with interior-to-full embeddings on the other axes.
    """
    n = grid.n
    ones = np.ones(n - 1)
    d1 = sp.diags([ones, -ones], [0, -1], shape=(n, n - 1), format="csr") / grid.h
    embed = sp.eye(n + 1, n - 1, k=-1, format="csr")

    matrices = []
    for axis in range(grid.d):
        factors = [d1 if a == axis else embed for a in range(grid.d)]
        matrix = factors[0]
        for factor in factors[1:]:
            matrix = sp.kron(matrix, factor, format="csr")
        matrices.append(matrix.tocsr())
    return tuple(matrices)


def _fluxes(derivative: np.ndarray, q: np.ndarray, fp: FrozenProblem) -> np.ndarray:
    magnitude = np.abs(derivative)
    flux = magnitude ** (q - 2.0) * derivative
    if fp.epsilon > 0.0:
        flux = flux + fp.epsilon * magnitude ** (fp.p_plus - 2.0) * derivative
    return flux


def energy(u: GridFunction, fp: FrozenProblem) -> float:
    """
    Discrete energy of the frozen problem

    Args:
        u: Dirichlet grid function
        fp: Frozen problem on the same grid

    Returns:
        E(u) as defined on FrozenProblem
    """
    if u.grid != fp.grid:
        raise LayoutMismatchError(fp.grid.shape, u.grid.shape, "energy argument")

    w = fp.grid.cell_weight
    total = 0.0
    with np.errstate(over="ignore"):
        for axis in range(fp.grid.d):
            magnitude = np.abs(edge_derivative(u, axis))
            q = fp.q.samples[axis]
            total += w * np.sum(magnitude**q / q)
            if fp.epsilon > 0.0:
                total += w * fp.epsilon / fp.p_plus * np.sum(magnitude**fp.p_plus)

    if fp.mass_weight > 0.0:
        total += 0.5 * fp.mass_weight * w * np.sum((u.values - fp.anchor.values) ** 2)
    total -= w * np.sum(fp.source.values * u.values)
    return float(total)


def energy_gradient(u: GridFunction, fp: FrozenProblem) -> np.ndarray:
    """Raw gradient dE/du_j with respect to the interior unknowns (flat vector)"""
    if u.grid != fp.grid:
        raise LayoutMismatchError(fp.grid.shape, u.grid.shape, "gradient argument")

    grid = fp.grid
    w = grid.cell_weight
    gradient = np.zeros(grid.unknowns)
    for axis, matrix in enumerate(difference_matrices(grid)):
        flux = _fluxes(edge_derivative(u, axis), fp.q.samples[axis], fp)
        gradient += w * (matrix.T @ flux.ravel())

    if fp.mass_weight > 0.0:
        gradient += fp.mass_weight * w * (u.interior() - fp.anchor.interior())
    gradient -= w * fp.source.interior()
    return gradient


def residual(u: GridFunction, fp: FrozenProblem) -> GridFunction:
    """
    Nodal defect of the frozen equation

    The energy gradient divided by the nodal weight h^d, so that for q = 2 and
    eps = sigma = 0 it is the standard finite-difference Laplacian of u minus
    the source. Boundary entries are 0.
    """
    return GridFunction.from_interior(fp.grid, energy_gradient(u, fp) / fp.grid.cell_weight)


def hessian(u: GridFunction, fp: FrozenProblem, mu: Optional[float] = None) -> sp.csr_matrix:
    """
    Newton model of the energy Hessian

    Second-derivative weights use (|D_i u|^2 + mu)^{(q-2)/2} so the matrix stays
    positive definite where the gradient vanishes.
    """
    mu = GRID["hessian_mu"] if mu is None else mu
    grid = fp.grid
    w = grid.cell_weight

    total = sp.csr_matrix((grid.unknowns, grid.unknowns))
    for axis, matrix in enumerate(difference_matrices(grid)):
        squared = edge_derivative(u, axis).ravel() ** 2 + mu
        q = fp.q.samples[axis].ravel()
        weights = (q - 1.0) * squared ** ((q - 2.0) / 2.0)
        if fp.epsilon > 0.0:
            weights = weights + fp.epsilon * (fp.p_plus - 1.0) * squared ** ((fp.p_plus - 2.0) / 2.0)
        total = total + matrix.T @ sp.diags(w * weights) @ matrix

    if fp.mass_weight > 0.0:
        total = total + fp.mass_weight * w * sp.eye(grid.unknowns, format="csr")
    return total.tocsr()


# ==============================================================================
# MONOTONICITY INEQUALITY
# ==============================================================================


def monotonicity_gap(a: np.ndarray, b: np.ndarray, p: float) -> tuple:
    """
    Both sides of <|a|^{p-2} a - |b|^{p-2} b, a - b> >= 2^{2-p} |a - b|^p

    Vectorized over the last axis: a and b of shape (..., m) give arrays of
    shape (...); a single pair gives floats.

    Raises:
        ValidationError: If p < 2
    """
    if not p >= 2.0:
        raise ValidationError("p >= 2", f"monotonicity constant needs p >= 2, got {p}")

    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    norm_a = np.linalg.norm(a, axis=-1, keepdims=True)
    norm_b = np.linalg.norm(b, axis=-1, keepdims=True)
    diff = a - b

    lhs = np.sum((norm_a ** (p - 2.0) * a - norm_b ** (p - 2.0) * b) * diff, axis=-1)
    rhs = 2.0 ** (2.0 - p) * np.linalg.norm(diff, axis=-1) ** p
    if np.ndim(lhs) == 0:
        return float(lhs), float(rhs)
    return lhs, rhs
