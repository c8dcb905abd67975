import numpy as np
import pytest

from frontlab.heat import heat_step_cn, heat_step_exact, trapezoid_mass
from frontlab.kpp1d import Solver1DConfig, sample_initial, step_1d
from frontlab.kpp2d import Solver2DConfig, step_2d
from frontlab.numerics import Field1D, Field2D, Frame, Grid1D, Grid2D, solve_tridiagonal_batched

GX = Grid1D.from_spacing(-60.0, 200.0, 0.05)
GY = Grid1D.from_spacing(0.0, 40.0, 0.25)


def heaviside(x):
    return (x <= 0).astype(np.float64)


@pytest.mark.benchmark(group="kpp")
def test_step_1d(benchmark):
    cfg = Solver1DConfig(GX)
    state = sample_initial(heaviside, GX, Frame.MOVING, cfg.t0)
    result = benchmark(step_1d, state, 10.0, cfg)
    assert result.values.shape == (GX.size,)
    assert result.values[0] == 1.0
    assert result.values[-1] == 0.0


@pytest.mark.benchmark(group="kpp")
def test_step_2d(benchmark):
    grid = Grid2D(GX, GY)
    cfg = Solver2DConfig(grid)
    xs = np.broadcast_to(GX.points(), grid.shape)
    state = Field2D(grid, heaviside(xs + 10.0))
    result = benchmark(step_2d, state, 10.0, cfg)
    assert result.values.shape == grid.shape
    assert np.all((result.values >= 0.0) & (result.values <= 1.0))


@pytest.mark.benchmark(group="tridiagonal")
def test_batched_tridiagonal(benchmark):
    n, m = GX.size, GY.size
    lower = np.full(n - 1, -1.0)
    upper = np.full(n - 1, -1.0)
    diag = np.full(n, 4.0)
    rhs = np.ones((m, n))
    solution = benchmark(solve_tridiagonal_batched, lower, diag, upper, rhs)
    residual = diag * solution
    residual[:, 1:] += lower * solution[:, :-1]
    residual[:, :-1] += upper * solution[:, 1:]
    assert np.allclose(residual, rhs)


@pytest.mark.parametrize("step", [heat_step_cn, heat_step_exact], ids=["cn", "exact"])
@pytest.mark.benchmark(group="heat")
def test_heat_step(benchmark, step):
    grid = Grid1D.from_spacing(-100.0, 100.0, 0.05)
    a = Field1D(grid, np.where(np.abs(grid.points()) <= 5.0, 2.0, 1.0))
    result = benchmark(step, a, 1.0)
    assert trapezoid_mass(result) == pytest.approx(trapezoid_mass(a), rel=1e-10)
