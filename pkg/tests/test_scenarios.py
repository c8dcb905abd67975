import math

import numpy as np
import pytest

from frontlab.errors import SandwichViolation
from frontlab.kpp1d import moving_to_lab
from frontlab.numerics import Frame, Grid1D, Grid2D
from frontlab.scenarios import (
    OscillationSequence,
    ScenarioKind,
    check_sequence,
    exp_step,
    heaviside,
    make_heaviside_trapped,
    make_oscillating,
    make_periodic_y,
    make_two_limit,
)

GRID = Grid2D(Grid1D.from_spacing(-20.0, 30.0, 0.1), Grid1D(0.0, 40.0, 80))
XS = np.linspace(-30.0, 30.0, 601)
YS = np.linspace(-50.0, 50.0, 201)
# offset by half a cell so no sample sits on a jump of a shifted step
XS_OFF = np.linspace(-29.95, 29.95, 600)


def assert_trapped(scenario, xs=XS, ys=YS):
    u = scenario.values(xs, ys)
    lower = (xs <= scenario.x2).astype(np.float64)
    upper = (xs <= scenario.x1).astype(np.float64)
    assert np.all(u >= lower[None, :]), f"\n{scenario.kind}: below 1 - H(x - x2)"
    assert np.all(u <= upper[None, :]), f"\n{scenario.kind}: above 1 - H(x - x1)"


def test_heaviside_and_exp_step():
    assert np.array_equal(heaviside(1.0)(np.array([0.0, 1.0, 1.5])), [1.0, 1.0, 0.0])
    step = exp_step(-1.0, 2.0)
    values = step(np.array([-2.0, -1.0, 0.0, 2.0, 2.5]))
    assert np.allclose(values, [1.0, 1.0, math.exp(-1.0), math.exp(-3.0), 0.0])
    with pytest.raises(SandwichViolation):
        exp_step(3.0, 2.0)


@pytest.mark.parametrize("blend", ["sharp", "exp_profile"])
@pytest.mark.parametrize("ripple", [0.0, 0.5, -0.9])
def test_trapped_data_stay_between_witnesses(blend, ripple):
    scenario = make_heaviside_trapped(2.0, -3.0, blend, ripple=ripple)
    assert scenario.kind is ScenarioKind.HEAVISIDE_TRAPPED
    assert_trapped(scenario)


def test_trapped_edge_follows_ripple():
    scenario = make_heaviside_trapped(2.0, -2.0, ripple=0.5, ripple_width=4.0)
    xs = np.linspace(-3.0, 3.0, 601)
    u = scenario.values(xs, np.array([0.0, 100.0]))
    edges = [xs[np.flatnonzero(row)[-1]] for row in u]
    assert edges[0] == pytest.approx(1.0, abs=0.02)
    assert edges[1] == pytest.approx(0.0, abs=0.02)


def test_trapped_rejects_bad_parameters():
    with pytest.raises(SandwichViolation):
        make_heaviside_trapped(1.0, 1.0)
    with pytest.raises(SandwichViolation):
        make_heaviside_trapped(-1.0, 1.0)
    with pytest.raises(ValueError):
        make_heaviside_trapped(2.0, -2.0, ripple=1.0)
    with pytest.raises(ValueError):
        make_heaviside_trapped(2.0, -2.0, blend="smooth")


def test_sample_places_datum_in_lab_coordinates():
    scenario = make_heaviside_trapped(2.0, -2.0)
    u0 = scenario.sample(GRID, t0=1.0)
    assert u0.frame is Frame.MOVING
    assert u0.values.shape == GRID.shape
    lab = moving_to_lab(1.0, GRID.gx.points())
    expected = (lab <= 0.0).astype(np.float64)
    assert np.array_equal(u0.values[0], expected)
    assert np.all(u0.values == u0.values[0])


def test_two_limit_has_both_limits():
    plus, minus = heaviside(2.0), exp_step(-4.0, 1.0)
    scenario = make_two_limit(plus, minus, width=10.0)
    assert (scenario.x1, scenario.x2) == (2.0, -4.0)
    assert_trapped(scenario, ys=np.linspace(-200.0, 200.0, 401))
    far = scenario.values(XS, np.array([-200.0, 200.0]))
    assert np.allclose(far[0], minus(XS), atol=1e-15)
    assert np.allclose(far[1], plus(XS), atol=1e-15)


def test_two_limit_rejects_width():
    with pytest.raises(ValueError):
        make_two_limit(heaviside(0.0), heaviside(0.0), width=0.0)


def test_periodic_datum_is_periodic():
    scenario = make_periodic_y(exp_step(-1.0, 1.0), amplitude=2.0, period=10.0)
    assert scenario.kind is ScenarioKind.PERIODIC_Y
    assert scenario.y_extent == (0.0, 20.0)
    assert (scenario.x1, scenario.x2) == (3.0, -3.0)
    ys = np.linspace(0.0, 10.0, 41)
    u = scenario.values(XS_OFF, ys)
    shifted = scenario.values(XS_OFF, ys + 10.0)
    assert np.allclose(u, shifted, atol=1e-12)
    assert_trapped(scenario)


def test_asymptotically_periodic_datum():
    base = heaviside(0.0)
    scenario = make_periodic_y(base, 1.0, 8.0, asymptotic=True, bump_shift=2.0, bump_width=5.0)
    assert scenario.kind is ScenarioKind.ASYMPT_PERIODIC_Y
    assert scenario.x1 == pytest.approx(3.0)
    assert_trapped(scenario)
    far = scenario.values(XS_OFF, np.array([1000.0, 1008.0]))
    assert np.array_equal(far[0], far[1])


def test_periodic_witnesses_must_fit():
    with pytest.raises(SandwichViolation) as caught:
        make_periodic_y(heaviside(0.0), 2.0, 10.0, witnesses=(1.0, -1.0))
    assert caught.value.violation == pytest.approx(1.0)
    fitted = make_periodic_y(heaviside(0.0), 0.5, 10.0, witnesses=(1.0, -1.0))
    assert (fitted.x1, fitted.x2) == (1.0, -1.0)


def test_factorial_sequence():
    seq = OscillationSequence.factorial(6)
    assert seq.xs[2] == pytest.approx(math.sqrt(6.0))
    assert seq.ts[1] == pytest.approx(math.sqrt(2.0) * 2.0)
    assert seq.lambda_amp == pytest.approx(1.0 / 8.0)
    report = check_sequence(seq)
    assert report.passed
    assert not report.surrogate
    assert report.notes == ("ratio requirements hold only in the limit n -> infinity",)
    assert report.table.shape == (5, 4)


def test_desk_sequence_is_a_fixed_ratio_surrogate():
    seq = OscillationSequence.desk()
    assert np.array_equal(seq.xs, [1.0, 6.0, 36.0])
    assert np.array_equal(seq.ts, [6.0, 216.0])
    report = check_sequence(seq)
    assert report.passed
    assert report.surrogate
    assert "finite surrogate, fixed ratios" in report.notes
    assert np.allclose(report.table[:, 1], 6.0)


def test_non_monotone_sequence_fails():
    seq = OscillationSequence(np.array([1.0, 3.0, 2.0]), np.array([1.0, 2.0]))
    report = check_sequence(seq)
    assert not report.passed
    assert "band edges are not strictly increasing" in report.notes


def test_sequence_rejects_bad_shapes():
    with pytest.raises(ValueError):
        OscillationSequence(np.array([1.0, 2.0]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        OscillationSequence(np.array([1.0, 2.0]), np.array([1.0]), contrast=0.5)


def test_alpha_alternates_between_one_and_contrast():
    alpha = OscillationSequence.desk(contrast=3.0).alpha()
    samples = alpha(np.array([0.5, -0.5, 3.0, -3.0, 10.0, 40.0]))
    assert np.array_equal(samples, [1.0, 1.0, 3.0, 3.0, 1.0, 3.0])


def test_oscillating_datum():
    seq = OscillationSequence.desk()
    scenario, alpha = make_oscillating(seq)
    assert scenario.kind is ScenarioKind.OSCILLATING
    assert scenario.x1 == 0.0
    assert scenario.x2 == pytest.approx(math.log(1.0 / 8.0))
    assert scenario.y_extent == (0.0, 72.0)
    assert_trapped(scenario)
    u = scenario.values(np.array([-0.5]), np.array([0.5, 3.0]))
    assert u[0, 0] == pytest.approx(math.exp(0.5) / 8.0)
    assert u[1, 0] == pytest.approx(4.0 * math.exp(0.5) / 8.0)
    payload = scenario.to_json()
    assert payload["kind"] == "oscillating"
    assert payload["alpha"]["values"] == alpha.values.tolist()
    assert payload["sequence"]["label"] == "desk"


def test_oscillating_amplitude_is_bounded():
    seq = OscillationSequence.desk(contrast=4.0)
    with pytest.raises(SandwichViolation):
        make_oscillating(OscillationSequence(seq.xs, seq.ts, 4.0, lambda_amp=0.3))


def test_sample_rejects_untrapped_datum():
    scenario = make_heaviside_trapped(2.0, -2.0)
    object.__setattr__(scenario, "x1", -1.0)
    with pytest.raises(SandwichViolation) as caught:
        scenario.sample(GRID)
    assert caught.value.violation == 1.0
