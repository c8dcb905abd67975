import numpy as np
import pytest

from frontlab.errors import CFLViolation, InvalidField, SandwichViolation
from frontlab.fronts import comparison_check
from frontlab.kpp1d import Solver1DConfig, moving_to_lab, run_1d, sample_initial
from frontlab.kpp2d import Solver2DConfig, YBoundary, run_2d, sandwich_violation, step_2d
from frontlab.numerics import Field1D, Field2D, Frame, Grid1D, Grid2D

GX = Grid1D.from_spacing(-20.0, 30.0, 0.1)


def heaviside(x0: float):
    return lambda x: (x <= x0).astype(np.float64)


def columns_constant(grid: Grid2D, row: np.ndarray) -> Field2D:
    return Field2D(grid, np.tile(row, (grid.gy.size, 1)), Frame.MOVING)


def test_y_independent_data_reduce_to_1d():
    grid = Grid2D(GX, Grid1D(0.0, 5.0, 10))
    row = sample_initial(heaviside(0.0), GX).values
    cfg1 = Solver1DConfig(GX, dt=0.05)
    cfg2 = Solver2DConfig(grid, dt=0.05)
    run1 = run_1d(Field1D(GX, row, Frame.MOVING), cfg1, 6.0)
    run2 = run_2d(columns_constant(grid, row), cfg2, 6.0)
    assert np.array_equal(run1.times, run2.times)
    for one, two in zip(run1.checkpoints, run2.checkpoints):
        u2 = two.load()
        spread = np.max(u2.max(axis=0) - u2.min(axis=0))
        assert spread <= 1e-12, f"\nt: {two.t}\nrow spread: {spread}"
        gap = np.max(np.abs(u2 - one.load()[None, :]))
        assert gap <= 1e-10, f"\nt: {two.t}\n1D/2D gap: {gap}"


@pytest.mark.parametrize("y_bc", list(YBoundary))
def test_one_is_equilibrium(y_bc):
    grid = Grid2D(GX, Grid1D(0.0, 5.0, 10))
    cfg = Solver2DConfig(grid, dt=0.05, y_bc=y_bc, bc_right=1.0)
    state = Field2D(grid, np.ones(grid.shape), Frame.MOVING)
    for _ in range(5):
        state = step_2d(state, 2.0, cfg)
    assert np.allclose(state.values, 1.0, rtol=0, atol=1e-13)


def test_periodic_closure_keeps_the_period():
    grid = Grid2D(GX, Grid1D(0.0, 20.0, 80))
    cfg = Solver2DConfig(grid, dt=0.05, y_bc=YBoundary.PERIODIC)
    ys = grid.gy.points()[:40]
    xs = GX.points()
    base = (xs[None, :] <= 0.5 * np.sin(2 * np.pi * ys[:, None] / 10.0)).astype(np.float64)
    state = Field2D(grid, np.vstack([base, base, base[:1]]), Frame.MOVING)
    t = 1.0
    for k in range(20):
        state = step_2d(state, t, cfg, scheme="euler" if k < 5 else "cn")
        t += cfg.dt
    u = state.values
    assert np.max(np.abs(u[:40] - u[40:80])) <= 1e-12
    assert np.array_equal(u[0], u[-1])


def test_result_does_not_depend_on_thread_count():
    grid = Grid2D(GX, Grid1D(0.0, 4.0, 16))
    xs = moving_to_lab(1.0, GX.points())
    ys = grid.gy.points()
    u0 = Field2D(grid, (xs[None, :] <= -0.5 + 0.4 * np.cos(np.pi * ys[:, None] / 2)).astype(float))
    single = run_2d(u0, Solver2DConfig(grid, dt=0.05, threads=1), 3.0)
    multi = run_2d(u0, Solver2DConfig(grid, dt=0.05, threads=2), 3.0)
    assert np.array_equal(single.checkpoints[-1].load(), multi.checkpoints[-1].load())


def test_cfl_guard():
    grid = Grid2D(GX, Grid1D(0.0, 5.0, 10))
    state = Field2D(grid, np.zeros(grid.shape), Frame.MOVING)
    with pytest.raises(CFLViolation):
        step_2d(state, 1.0, Solver2DConfig(grid, dt=0.15))


def test_lab_frame_state_is_rejected():
    grid = Grid2D(GX, Grid1D(0.0, 5.0, 10))
    state = Field2D(grid, np.zeros(grid.shape), Frame.LAB)
    with pytest.raises(InvalidField):
        step_2d(state, 1.0, Solver2DConfig(grid))


def test_untrapped_data_are_refused():
    grid = Grid2D(GX, Grid1D(0.0, 4.0, 16))
    xs = moving_to_lab(1.0, GX.points())
    u0 = Field2D(grid, np.tile((xs <= 3.0).astype(float), (grid.gy.size, 1)))
    assert sandwich_violation(u0, 0.0, -1.0) == 1.0
    with pytest.raises(SandwichViolation) as info:
        run_2d(u0, Solver2DConfig(grid, dt=0.05), 2.0, witnesses=(0.0, -1.0))
    assert info.value.violation == 1.0


def test_trapped_run_stays_between_the_1d_bounds():
    grid = Grid2D(GX, Grid1D(0.0, 4.0, 16))
    xs = moving_to_lab(1.0, GX.points())
    ys = grid.gy.points()
    u0 = Field2D(grid, (xs[None, :] <= -0.5 + 0.4 * np.cos(np.pi * ys[:, None] / 2)).astype(float))
    run2 = run_2d(u0, Solver2DConfig(grid, dt=0.05), 5.0, witnesses=(0.0, -1.0))
    cfg1 = Solver1DConfig(GX, dt=0.05)
    hi = run_1d(sample_initial(heaviside(0.0), GX), cfg1, 5.0)
    lo = run_1d(sample_initial(heaviside(-1.0), GX), cfg1, 5.0)
    report = comparison_check(run2, hi, lo)
    assert report.passed, f"\nmax violation: {report.max_violation}"
    assert run2.provenance["sandwich"]["violation"] == 0.0
