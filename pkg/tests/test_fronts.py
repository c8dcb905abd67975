import numpy as np
import pytest

from frontlab.errors import GridMismatch, InsufficientData, NoFront
from frontlab.fronts import (
    FrontTrace,
    SandwichObserver,
    bramson_shift,
    comparison_check,
    decay_exponent,
    extract_front,
    fit_bramson,
    level_consistency,
    shape_error,
)
from frontlab.numerics import Field1D, Field2D, Frame, Grid1D, Grid2D
from frontlab.records import Checkpoint, RunRecord

GRID = Grid1D.from_spacing(-20.0, 40.0, 0.05)


def shifted(wave, shift: float) -> np.ndarray:
    return np.clip(wave(GRID.points() - shift), 0.0, 1.0)


def lab_trace(times: np.ndarray, sigma_lab: np.ndarray) -> FrontTrace:
    sigma = sigma_lab[:, None]
    return FrontTrace(0.5, times, np.zeros(1), sigma, sigma - bramson_shift(times)[:, None], Frame.LAB)


def bound_record(grid, times, rows) -> RunRecord:
    return RunRecord("run1d", grid, Frame.MOVING, [Checkpoint(t, r) for t, r in zip(times, rows)])


def test_exact_profile_gives_its_shift(wave):
    state = Field1D(GRID, shifted(wave, 1.7), Frame.MOVING)
    sigma, sigma_inf = extract_front(state, 0.5, wave)
    assert sigma[0] == pytest.approx(1.7, abs=1e-9)
    assert sigma_inf[0] == pytest.approx(1.7, abs=1e-9)


def test_every_row_is_measured(wave):
    grid = Grid2D(GRID, Grid1D(0.0, 1.0, 4))
    state = Field2D(grid, np.tile(shifted(wave, 1.7), (5, 1)), Frame.MOVING)
    _, sigma_inf = extract_front(state, 0.5, wave)
    assert sigma_inf.shape == (5,)
    assert np.allclose(sigma_inf, 1.7, atol=1e-9)


def test_step_front_is_located_within_one_cell(wave):
    grid = Grid1D.from_spacing(-10.0, 10.0, 0.1)
    state = Field1D(grid, (grid.points() <= 0.0).astype(float), Frame.MOVING)
    sigma, _ = extract_front(state, 0.5, wave)
    assert abs(sigma[0]) < grid.h


def test_integer_translation_moves_the_front(wave):
    base = shifted(wave, 1.7)
    moved = np.concatenate([np.ones(10), base[:-10]])
    s0, _ = extract_front(Field1D(GRID, base, Frame.MOVING), 0.3, wave)
    s1, _ = extract_front(Field1D(GRID, moved, Frame.MOVING), 0.3, wave)
    assert s1[0] - s0[0] == pytest.approx(10 * GRID.h, abs=1e-9)


def test_no_front(wave):
    with pytest.raises(NoFront):
        extract_front(Field1D(GRID, np.zeros(GRID.size), Frame.MOVING), 0.5, wave)


@pytest.mark.parametrize("level", [0.0, 0.05, 0.95, 1.2])
def test_level_out_of_range(wave, level):
    with pytest.raises(ValueError):
        extract_front(Field1D(GRID, shifted(wave, 0.0), Frame.MOVING), level, wave)


def test_selfsimilar_field_is_rejected(wave):
    with pytest.raises(ValueError):
        extract_front(Field1D(GRID, shifted(wave, 0.0), Frame.SELFSIMILAR), 0.5, wave)


def test_levels_agree_on_an_exact_profile(wave):
    spread = level_consistency(Field1D(GRID, shifted(wave, 1.7), Frame.MOVING), (0.3, 0.5, 0.7), wave)
    assert spread[0] <= 1e-3


def test_shape_error_vanishes_on_an_exact_profile(wave):
    state = Field1D(GRID, shifted(wave, 1.7), Frame.MOVING)
    error = shape_error(state, wave, t=100.0)
    assert error.unweighted <= 1e-8
    assert error.weighted <= 1e-8


def test_shape_error_sees_a_wrong_shape(wave):
    values = np.clip(wave(2.0 * (GRID.points() - 1.7)), 0.0, 1.0)
    error = shape_error(Field1D(GRID, values, Frame.MOVING), wave, t=100.0)
    assert error.unweighted > 0.05


def test_lab_fit_recovers_the_delay():
    times = np.logspace(np.log10(50.0), np.log10(2000.0), 40)
    trace = lab_trace(times, 2.0 * times - 1.5 * np.log(times) - 3.0)
    fit = fit_bramson(trace, (50.0, 2000.0))
    assert fit.slope == pytest.approx(-1.5, abs=1e-9)
    assert fit.x_inf == pytest.approx(3.0, abs=1e-8)
    assert fit.rms <= 1e-9
    assert fit.n_points == 40
    assert fit.frame == "lab"


def test_moving_fit_is_flat():
    times = np.logspace(np.log10(50.0), np.log10(2000.0), 40)
    trace = lab_trace(times, 2.0 * times - 1.5 * np.log(times) - 3.0)
    fit = fit_bramson(trace, (50.0, 2000.0), frame="moving")
    assert fit.slope == pytest.approx(0.0, abs=1e-9)
    assert fit.x_inf == pytest.approx(3.0, abs=1e-8)


def test_fit_tolerates_noise():
    rng = np.random.default_rng(7)
    times = np.logspace(np.log10(50.0), np.log10(2000.0), 40)
    noisy = 2.0 * times - 1.5 * np.log(times) - 3.0 + 1e-3 * rng.standard_normal(times.size)
    fit = fit_bramson(lab_trace(times, noisy), (50.0, 2000.0))
    assert fit.slope == pytest.approx(-1.5, abs=0.01)


def test_fit_needs_eight_points():
    times = np.linspace(50.0, 60.0, 5)
    trace = lab_trace(times, 2.0 * times)
    with pytest.raises(InsufficientData):
        fit_bramson(trace, (50.0, 60.0))


def test_decay_exponent():
    times = np.logspace(0, 3, 30)
    assert decay_exponent(times, 4.0 * times**-0.5) == pytest.approx(-0.5, abs=1e-12)


def test_front_csv(tmp_path, wave):
    times = np.logspace(np.log10(50.0), np.log10(2000.0), 10)
    trace = lab_trace(times, 2.0 * times)
    trace.to_csv(tmp_path / "front.csv")
    lines = (tmp_path / "front.csv").read_text().splitlines()
    assert lines[0] == "t,x_level,sigma_inf"
    assert len(lines) == 11


class TestComparison:
    grid1 = Grid1D.from_spacing(-10.0, 10.0, 0.5)
    grid2 = Grid2D(grid1, Grid1D(0.0, 1.0, 3))
    times = [1.0, 2.0, 3.0]

    def rows(self, shift):
        xs = self.grid1.points()
        return [0.5 * (1 - np.tanh(xs - shift - t)) for t in self.times]

    def test_trapped_field_passes(self):
        hi = bound_record(self.grid1, self.times, self.rows(1.0))
        lo = bound_record(self.grid1, self.times, self.rows(-1.0))
        mid = [np.tile(r, (4, 1)) for r in self.rows(0.0)]
        report = comparison_check(bound_record(self.grid2, self.times, mid), hi, lo)
        assert report.passed
        assert report.max_violation == 0.0

    def test_swapped_bounds_fail(self):
        hi = bound_record(self.grid1, self.times, self.rows(1.0))
        lo = bound_record(self.grid1, self.times, self.rows(-1.0))
        mid = [np.tile(r, (4, 1)) for r in self.rows(0.0)]
        report = comparison_check(bound_record(self.grid2, self.times, mid), lo, hi)
        assert not report.passed
        assert report.max_violation > 0.1

    def test_grid_mismatch(self):
        other = Grid1D.from_spacing(-10.0, 10.0, 0.25)
        hi = bound_record(other, self.times, [np.ones(other.size)] * 3)
        lo = bound_record(self.grid1, self.times, self.rows(-1.0))
        mid = [np.tile(r, (4, 1)) for r in self.rows(0.0)]
        with pytest.raises(GridMismatch):
            comparison_check(bound_record(self.grid2, self.times, mid), hi, lo)

    def test_time_mismatch(self):
        hi = bound_record(self.grid1, [1.0, 2.0, 4.0], self.rows(1.0))
        lo = bound_record(self.grid1, self.times, self.rows(-1.0))
        mid = [np.tile(r, (4, 1)) for r in self.rows(0.0)]
        with pytest.raises(GridMismatch):
            comparison_check(bound_record(self.grid2, self.times, mid), hi, lo)

    def test_observer_matches_stored_check(self):
        hi = bound_record(self.grid1, self.times, self.rows(1.0))
        lo = bound_record(self.grid1, self.times, self.rows(-1.0))
        mid = [np.tile(r, (4, 1)) for r in self.rows(0.5)]
        mid[1][2, 3] = 2.0
        observer = SandwichObserver(self.grid1, hi, lo)
        for t, values in zip(self.times, mid):
            observer(t, Field2D(self.grid2, values, Frame.MOVING))
        online = observer.report()
        stored = comparison_check(bound_record(self.grid2, self.times, mid), hi, lo)
        assert np.array_equal(online.times, stored.times)
        assert np.array_equal(online.violations, stored.violations)
        assert online.violations[1] > 0.5
        assert online.violations[0] == 0.0

    def test_observer_rejects_unknown_times(self):
        hi = bound_record(self.grid1, self.times, self.rows(1.0))
        lo = bound_record(self.grid1, self.times, self.rows(-1.0))
        observer = SandwichObserver(self.grid1, hi, lo)
        with pytest.raises(GridMismatch):
            observer(1.5, Field2D(self.grid2, np.zeros(self.grid2.shape), Frame.MOVING))

    def test_observer_needs_every_checkpoint(self):
        hi = bound_record(self.grid1, self.times, self.rows(1.0))
        lo = bound_record(self.grid1, self.times, self.rows(-1.0))
        observer = SandwichObserver(self.grid1, hi, lo)
        observer(1.0, Field2D(self.grid2, np.tile(self.rows(0.0)[0], (4, 1)), Frame.MOVING))
        with pytest.raises(GridMismatch):
            observer.report()
