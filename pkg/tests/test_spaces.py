import math

import numpy as np
import pytest
from hypothesis import assume, given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad
from scipy.optimize import brentq

from anisolve.exceptions import LayoutMismatchError, ValidationError
from anisolve.grid import Grid, GridFunction
from anisolve.spaces import (
    ExponentField,
    ScalarExponent,
    anisotropic_modular,
    holder_pairing,
    luxemburg_norm,
    modular,
)
from anisolve.verify import check_holder, check_modular_norm, check_norm_homogeneity

SAMPLES = 16
RELATIVE_TOL = 1e-8
MIDPOINTS = 2000

sample_values = arrays(np.float64, (SAMPLES,), elements=st.floats(min_value=-5.0, max_value=5.0))
lebesgue_exponents = arrays(np.float64, (SAMPLES,), elements=st.floats(min_value=1.5, max_value=6.0))


def _midpoints(m: int = MIDPOINTS) -> np.ndarray:
    return (np.arange(m) + 0.5) / m


def test_modular_of_constant():
    assert modular(np.full(10, 2.0), 3.0) == pytest.approx(8.0, rel=1e-15)


def test_modular_and_norm_of_zero():
    assert modular(np.zeros(10), 3.0) == 0.0
    assert luxemburg_norm(np.zeros(10), 3.0) == 0.0


def test_modular_with_variable_exponent():
    x = _midpoints()
    assert modular(np.ones(MIDPOINTS), 2.0 + x) == pytest.approx(1.0, rel=1e-14)
    assert modular(np.full(MIDPOINTS, 2.0), 2.0 + x) == pytest.approx(4.0 / math.log(2.0), rel=1e-6)


@pytest.mark.parametrize("c", [0.3, 1.0, 2.5, 40.0])
def test_norm_of_constant_is_the_constant(c):
    x = _midpoints()
    assert luxemburg_norm(np.full(MIDPOINTS, c), 2.0 + x) == pytest.approx(c, rel=1e-9)


def test_norm_matches_quadrature_oracle():
    x = _midpoints()
    tau = luxemburg_norm(np.full(MIDPOINTS, 2.0), 2.0 + x)
    expected = brentq(lambda t: quad(lambda s: (2.0 / t) ** (2.0 + s), 0.0, 1.0)[0] - 1.0, 1.0, 4.0, xtol=1e-14)
    assert tau == pytest.approx(expected, rel=1e-5)
    assert modular(np.full(MIDPOINTS, 2.0 / tau), 2.0 + x) == pytest.approx(1.0, abs=1e-10)


def test_norm_of_tiny_and_huge_fields():
    q = np.full(8, 3.0)
    assert luxemburg_norm(np.full(8, 1e-200), q) == pytest.approx(1e-200, rel=1e-8)
    assert luxemburg_norm(np.full(8, 1e80), q) == pytest.approx(1e80, rel=1e-8)


def test_grid_function_uses_cell_weight():
    grid = Grid(1, 4)
    u = GridFunction(grid, [0.0, 1.0, 1.0, 1.0, 0.0])
    assert modular(u, 2.0) == pytest.approx(0.75)


@pytest.mark.parametrize("d", [1, 2])
def test_boundary_values_see_measure_one_plus_h(d):
    grid = Grid(d, 4)
    ones = GridFunction(grid, np.ones(grid.shape), dirichlet=False)
    assert modular(ones, 2.0) == pytest.approx((1.0 + grid.h) ** d, rel=1e-14)
    assert ones.l2_squared() == pytest.approx((1.0 + grid.h) ** d, rel=1e-14)
    assert luxemburg_norm(ones, 2.0) > 1.0


def test_anisotropic_modular_of_hat():
    hat = GridFunction(Grid(1, 2), [0.0, 0.5, 0.0])
    q = ExponentField.constant(hat.grid, [2.0])
    assert anisotropic_modular(hat, q) == pytest.approx(1.0, rel=1e-15)


def test_anisotropic_modular_brute_force():
    grid = Grid(1, 4)
    x = grid.nodes[0]
    u = GridFunction.pinned(grid, x * (1.0 - x) / 2.0)
    q = ExponentField.constant(grid, [3.0])
    assert anisotropic_modular(u, q) == pytest.approx(0.02734375, rel=1e-14)


def test_anisotropic_modular_in_two_dimensions():
    grid = Grid(2, 2)
    values = np.zeros(grid.shape)
    values[1, 1] = 1.0
    u = GridFunction(grid, values)
    q = ExponentField.constant(grid, [2.0, 3.0])
    # two edges of slope +-2 per direction, weight h^2 = 1/4
    assert anisotropic_modular(u, q) == pytest.approx(0.25 * (2 * 4.0 + 2 * 8.0))


def test_anisotropic_modular_rejects_wrong_direction_count():
    grid = Grid(2, 3)
    with pytest.raises(LayoutMismatchError):
        anisotropic_modular(grid.zeros(), ExponentField.constant(Grid(1, 3), [2.0]))


def test_holder_equality_case():
    ones = np.ones(SAMPLES)
    lhs, rhs = holder_pairing(ones, ones, 2.0, 2.0)
    assert lhs == pytest.approx(1.0)
    assert rhs == pytest.approx(1.0, rel=1e-9)


def test_holder_rejects_non_conjugate_exponents():
    ones = np.ones(SAMPLES)
    with pytest.raises(ValidationError):
        holder_pairing(ones, ones, 2.0, 3.0)


def test_holder_rejects_layout_mismatch():
    with pytest.raises(LayoutMismatchError):
        holder_pairing(np.ones(4), np.ones(5), 2.0, 2.0)


def test_exponent_layout_mismatch():
    with pytest.raises(LayoutMismatchError):
        modular(np.ones(4), np.full(5, 2.0))


def test_exponent_field_floor_and_extremes():
    grid = Grid(1, 4)
    field = ExponentField((np.array([2.0, 3.0, 2.5, 4.0]),))
    assert (field.lower, field.upper) == (2.0, 4.0)
    with pytest.raises(ValueError):
        field.samples[0][0] = 5.0
    with pytest.raises(ValidationError):
        ExponentField((np.array([2.0, 1.9, 2.5, 4.0]),))
    with pytest.raises(LayoutMismatchError):
        ExponentField.constant(grid, [2.0, 3.0])
    assert ExponentField.lebesgue(1.5, (3,)).lower == 1.5


def test_scalar_exponent_floor():
    assert ScalarExponent(2.0).value == 2.0
    with pytest.raises(ValidationError):
        ScalarExponent(1.5)


# ==============================================================================
# PROPERTIES
# ==============================================================================


@seed(1)
@settings(max_examples=200)
@given(u=sample_values, q=lebesgue_exponents)
def test_modular_norm_relations(u, q):
    assume(np.max(np.abs(u)) > 1e-3)
    norm = luxemburg_norm(u, q)
    value = modular(u, q)
    q_min, q_max = float(q.min()), float(q.max())

    if norm > 1.0:
        assert norm**q_min * (1.0 - RELATIVE_TOL) <= value <= norm**q_max * (1.0 + RELATIVE_TOL)
    else:
        assert norm**q_max * (1.0 - RELATIVE_TOL) <= value <= norm**q_min * (1.0 + RELATIVE_TOL)


@seed(2)
@settings(max_examples=200)
@given(u=sample_values, q=lebesgue_exponents)
def test_unit_ball_equivalence(u, q):
    assume(np.max(np.abs(u)) > 1e-3)
    value = modular(u, q)
    assume(abs(value - 1.0) > 1e-8)
    assert (value <= 1.0) == (luxemburg_norm(u, q) <= 1.0)


@seed(3)
@settings(max_examples=100)
@given(u=sample_values, q=lebesgue_exponents, scale=st.floats(min_value=-100.0, max_value=100.0))
def test_norm_is_absolutely_homogeneous(u, q, scale):
    assume(np.max(np.abs(u)) > 1e-3 and abs(scale) > 1e-2)
    assert luxemburg_norm(scale * u, q) == pytest.approx(abs(scale) * luxemburg_norm(u, q), rel=RELATIVE_TOL)


@seed(4)
@settings(max_examples=100)
@given(u=sample_values, v=sample_values, r=arrays(np.float64, (SAMPLES,), elements=st.floats(min_value=1.2, max_value=5.0)))
def test_holder_inequality(u, v, r):
    lhs, rhs = holder_pairing(u, v, r, r / (r - 1.0))
    assert lhs <= rhs + 1e-10


def test_randomized_modular_norm_suite():
    rng = np.random.default_rng(np.random.SeedSequence(42))
    failures, _ = check_modular_norm(rng, 200)
    assert failures == 0


def test_randomized_homogeneity_suite():
    failures, _ = check_norm_homogeneity(np.random.default_rng(7), 200)
    assert failures == 0


def test_randomized_holder_suite():
    failures, worst = check_holder(np.random.default_rng(42), 500)
    assert failures == 0
    assert worst <= 0.0
