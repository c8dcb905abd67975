import math

import numpy as np
import pytest

from frontlab.heat import (
    PiecewiseConstant,
    alpha_c_infty,
    evolve_heat,
    factorial_oracle,
    heat_exact_piecewise,
    heat_step_cn,
    heat_step_exact,
    merged_limit,
    oscillation_oracle,
    trapezoid_mass,
)
from frontlab.numerics import Field1D, Grid1D

DESK = PiecewiseConstant(np.array([1.0, 6.0, 36.0]), np.array([1.0, 4.0, 1.0, 4.0]), even_symmetric=True)


def gaussian(grid: Grid1D, variance: float) -> Field1D:
    y = grid.points()
    return Field1D(grid, np.exp(-(y**2) / (2.0 * variance)))


def variance(a: Field1D) -> float:
    y = a.grid.points()
    return float(np.sum(y**2 * a.values) / np.sum(a.values))


def compare_with_closed_form(a0: PiecewiseConstant, grid: Grid1D, t: float, dt: float, tol: float):
    start = Field1D(grid, a0(grid.points()))
    stepped = evolve_heat(start, t - 1.0, dt)
    exact = heat_exact_piecewise(a0, t, grid.points())
    error = np.max(np.abs(stepped.values - exact))
    assert error <= tol, f"\nbreakpoints: {a0.breakpoints}\nvalues: {a0.values}\nt: {t}\nerror: {error}"


@pytest.mark.parametrize("value", [0.0, 0.3, 1.0, 4.0])
def test_constant_is_steady(value):
    grid = Grid1D(-5.0, 5.0, 200)
    a = Field1D(grid, np.full(grid.size, value))
    assert np.allclose(heat_step_cn(a, 0.1).values, value, rtol=1e-14, atol=1e-15)


def test_variance_grows_linearly():
    grid = Grid1D.from_spacing(-30.0, 30.0, 0.05)
    a = evolve_heat(gaussian(grid, 1.0), 1.0, 0.01)
    assert variance(a) == pytest.approx(3.0, rel=5e-3)


def test_step_is_linear():
    grid = Grid1D(-5.0, 5.0, 100)
    rng = np.random.default_rng(0)
    a = Field1D(grid, rng.uniform(size=grid.size))
    b = Field1D(grid, rng.uniform(size=grid.size))
    summed = heat_step_cn(a.with_values(a.values + b.values), 0.05).values
    separate = heat_step_cn(a, 0.05).values + heat_step_cn(b, 0.05).values
    assert np.max(np.abs(summed - separate)) <= 1e-13


@pytest.mark.parametrize("stepper", [heat_step_cn, heat_step_exact])
def test_trapezoid_mass_is_conserved(stepper):
    grid = Grid1D(-4.0, 6.0, 200)
    a = Field1D(grid, np.random.default_rng(1).uniform(size=grid.size))
    after = stepper(a, 0.02)
    assert abs(trapezoid_mass(after) - trapezoid_mass(a)) <= 1e-12 * trapezoid_mass(a)
    # the end points move, so the plain sum h * sum(a) does not stay put
    assert abs(grid.h * (after.values.sum() - a.values.sum())) > 1e-6


def test_exact_step_agrees_with_cn_on_smooth_data():
    grid = Grid1D.from_spacing(-20.0, 20.0, 0.1)
    a = gaussian(grid, 2.0)
    cn = heat_step_cn(a, 1e-3).values
    exact = heat_step_exact(a, 1e-3).values
    assert np.max(np.abs(cn - exact)) <= 1e-9


def test_exact_piecewise_normalization():
    ones = PiecewiseConstant.constant(1.0)
    ys = np.linspace(-50.0, 50.0, 11)
    for t in [1.0, 1.5, 10.0, 1e4]:
        assert np.allclose(heat_exact_piecewise(ones, t, ys), 1.0, atol=1e-14)


@pytest.mark.parametrize(("v1", "v2"), [(1.0, 4.0), (0.2, 0.7), (3.0, 3.0)])
def test_exact_piecewise_single_jump(v1, v2):
    a0 = PiecewiseConstant(np.array([0.0]), np.array([v1, v2]))
    for t in [1.0, 1.01, 7.0, 500.0]:
        assert heat_exact_piecewise(a0, t, 0.0) == pytest.approx((v1 + v2) / 2, abs=1e-14)


def test_exact_piecewise_at_start_returns_datum():
    ys = np.array([-40.0, -6.0, -3.0, 0.0, 1.0, 20.0, 40.0])
    assert np.array_equal(heat_exact_piecewise(DESK, 1.0, ys), DESK(ys))


def test_exact_piecewise_rejects_early_times():
    with pytest.raises(ValueError):
        heat_exact_piecewise(DESK, 0.5, 0.0)


def test_even_symmetric_sampling():
    assert DESK(0.0) == 1.0
    assert DESK(-3.0) == DESK(3.0) == 4.0
    assert DESK(6.0) == 2.5
    assert DESK(-100.0) == 4.0


def test_closed_form_matches_cn():
    a0 = PiecewiseConstant(np.array([-2.0, 3.0]), np.array([1.0, 1.5, 1.25]))
    grid = Grid1D.from_spacing(-100.0, 100.0, 0.05)
    compare_with_closed_form(a0, grid, 100.0, 0.01, 1e-6)


def test_heat_flow_stays_within_datum_bounds():
    grid = Grid1D.from_spacing(-60.0, 60.0, 0.05)
    start = Field1D(grid, DESK(grid.points()))
    after = evolve_heat(start, 5.0, 0.01)
    lo, hi = DESK.bounds()
    assert after.values.min() >= lo - 1e-12
    assert after.values.max() <= hi + 1e-12


def test_desk_oracle_values():
    values = oscillation_oracle(DESK, [6.0, 216.0])
    assert values[0] == pytest.approx(3.083, abs=2e-3)
    assert values[1] == pytest.approx(1.815, abs=2e-3)


def test_factorial_oracle_matches_direct_sum():
    n = 8
    breakpoints = np.sqrt([math.factorial(j) for j in range(1, 51)])
    values = np.where(np.arange(51) % 2 == 0, 1.0, 4.0)
    alpha = PiecewiseConstant(breakpoints, values, even_symmetric=True)
    t_n = math.sqrt(n) * math.factorial(n)
    direct = heat_exact_piecewise(alpha, t_n, 0.0)
    assert factorial_oracle(n, 4.0) == pytest.approx(direct, abs=1e-12)


@pytest.mark.parametrize(("n", "ideal"), [(10**7, 1.0), (10**7 + 1, 4.0)])
def test_factorial_oracle_limits(n, ideal):
    value = factorial_oracle(n, 4.0)
    assert abs(value - ideal) <= 0.05 * ideal, f"\nn: {n}\na(t_n, 0): {value}"


def test_factorial_oracle_is_far_from_its_limits_at_small_n():
    low, high = factorial_oracle(8, 4.0), factorial_oracle(9, 4.0)
    assert low == pytest.approx(2.338, abs=2e-3)
    assert abs(low - 1.0) > 0.05
    assert abs(high - 4.0) / 4.0 > 0.05


def test_alpha_c_infty_midpoint():
    assert alpha_c_infty(0.3, -0.2, 0.0) == pytest.approx((math.exp(-0.3) + math.exp(0.2)) / 2)


def test_alpha_c_infty_equal_limits():
    zeta = np.linspace(-20.0, 20.0, 41)
    assert np.allclose(alpha_c_infty(0.7, 0.7, zeta), math.exp(-0.7), rtol=1e-15)


@pytest.mark.parametrize(("zeta", "sigma"), [(12.0, 0.3), (-12.0, -0.2)])
def test_alpha_c_infty_limits(zeta, sigma):
    assert abs(alpha_c_infty(0.3, -0.2, zeta) - math.exp(-sigma)) <= 1e-10


def test_alpha_c_infty_solves_its_ode():
    step = 1e-3
    zeta = np.arange(-10.0, 10.0 + step / 2, step)
    g = alpha_c_infty(0.1, 0.0, zeta)
    second = (g[2:] - 2 * g[1:-1] + g[:-2]) / step**2
    first = (g[2:] - g[:-2]) / (2 * step)
    residual = -second - zeta[1:-1] / 2 * first
    assert np.max(np.abs(residual)) <= 1e-8


def test_merged_limit():
    assert merged_limit(0.4, 0.4) == pytest.approx(0.4)
    assert merged_limit(0.0, math.log(3.0)) == pytest.approx(-math.log(2.0 / 3.0))
