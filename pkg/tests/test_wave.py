import numpy as np
import pytest

from frontlab.errors import WindowOutOfRange
from frontlab.wave import (
    WaveProfile,
    compute_wave,
    evaluate_shifted,
    fit_tail_k,
    inverse_level,
    ode_residual_rms,
)


def synthetic_tail(k: float = 3.0) -> WaveProfile:
    xs = np.linspace(0.0, 14.0, 1401)
    us = (xs + k) * np.exp(-xs)
    dus = -(xs + k - 1.0) * np.exp(-xs)
    return WaveProfile(xs, us, dus)


def test_normalization_and_speed(wave):
    zero = int(np.argmin(np.abs(wave.xs)))
    assert wave.xs[zero] == 0.0
    assert abs(wave.us[zero] - 0.5) <= 1e-10
    assert wave.c == 2.0


def test_profile_invariants(wave):
    assert np.all(np.diff(wave.us) < 0)
    assert wave.us[0] >= 1 - 1e-6
    assert wave.us[-1] <= 1e-8


def test_ode_residual(wave):
    residual = ode_residual_rms(wave)
    assert residual <= 1e-6, f"\nresidual RMS: {residual}"


def test_tail_constant_of_computed_wave(wave):
    fit = fit_tail_k(wave, (8.0, 12.0), corrected=True)
    assert fit.max_deviation <= 1e-2, f"\nk_hat: {fit.k_hat}\ndeviation: {fit.max_deviation}"
    assert fit.k_hat == pytest.approx(wave.k_hat)
    assert fit.tail_slope > 0


def test_tail_constant_of_exact_model():
    fit = fit_tail_k(synthetic_tail(3.0), (6.0, 10.0))
    assert fit.k_hat == pytest.approx(3.0, abs=1e-9)
    assert fit.max_deviation <= 1e-9


BAD_WINDOWS = [(12.0, 8.0), (4.0, 10.0), (8.0, 13.0), (9.0, 9.0)]


@pytest.mark.parametrize("window", BAD_WINDOWS)
def test_tail_window_out_of_range(window):
    with pytest.raises(WindowOutOfRange):
        fit_tail_k(synthetic_tail(), window)


def test_evaluate_shifted_anchor(wave):
    assert evaluate_shifted(wave, 0.0, 0.0) == pytest.approx(0.5, abs=1e-10)


@pytest.mark.parametrize("shift", [0.0, -1.0, -7.5])
def test_left_limit(wave, shift):
    assert evaluate_shifted(wave, -wave.half_width - 10.0, shift) == pytest.approx(1.0, abs=1e-6)


def test_shift_is_translation(wave):
    rng = np.random.default_rng(7)
    xs = rng.uniform(-45.0, 45.0, 100)
    shifts = rng.uniform(-5.0, 5.0, 100)
    for x, s in zip(xs, shifts):
        assert evaluate_shifted(wave, x, s) == evaluate_shifted(wave, x + s, 0.0)


def test_right_extrapolation_is_continuous(wave):
    edge = wave.half_width
    inside = wave(edge)
    outside = wave(edge + 1e-9)
    assert outside == pytest.approx(inside, rel=1e-5)
    assert wave(edge + 5.0) < inside


def test_inverse_level_anchor(wave):
    assert inverse_level(wave, 0.5) == pytest.approx(0.0, abs=1e-10)


def test_inverse_level_of_known_point(wave):
    assert inverse_level(wave, wave(1.0)) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("level", [0.1, 0.3, 0.9])
def test_inverse_level_round_trip(wave, level):
    x = inverse_level(wave, level)
    assert abs(wave(x) - level) <= 1e-10


@pytest.mark.parametrize("level", [0.0, 1.0, 1e-7, -0.2])
def test_inverse_level_rejects_extreme_levels(wave, level):
    with pytest.raises(ValueError):
        inverse_level(wave, level)


@pytest.mark.parametrize(("half_width", "step"), [(20.0, 0.005), (40.0, 0.05)])
def test_compute_wave_preconditions(half_width, step):
    with pytest.raises(ValueError):
        compute_wave(half_width, step)


def test_csv_dump(wave, tmp_path):
    path = tmp_path / "wave.csv"
    wave.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,U"
    assert len(lines) == wave.xs.size + 1
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.allclose(data[:, 1], wave.us, rtol=1e-15, atol=0)
