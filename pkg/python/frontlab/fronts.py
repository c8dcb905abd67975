"""Level-set fronts: extraction, the logarithmic-delay fit, wave-shape error and the comparison sandwich."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridMismatch, InsufficientData, NoFront
from .numerics import Field1D, Field2D, Frame, Grid1D, level_crossings
from .records import RunRecord
from .wave import WaveProfile, inverse_level

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 8
SANDWICH_TOLERANCE = 1e-8


def bramson_shift(t):
    """Origin ``X(t) = 2t - (3/2) ln t`` of the moving frame in lab coordinates."""
    return 2.0 * np.asarray(t) - 1.5 * np.log(t)


def _rows(state: Field1D | Field2D) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(state, Field2D):
        return state.grid.gx.points(), state.grid.gy.points(), state.values
    return state.grid.points(), np.zeros(1), state.values[None, :]


def extract_front(state: Field1D | Field2D, level: float, profile: WaveProfile) -> tuple[np.ndarray, np.ndarray]:
    """Per-row level crossing ``sigma(y)`` and ``sigma_inf(y) = sigma(y) - U^{-1}(level)``.

    Rows without a downward crossing are NaN.

    Raises:
        NoFront: Fewer than half of the rows cross ``level``.
    """
    if not 0.05 < level < 0.95:
        raise ValueError(f"front level must lie in (0.05, 0.95), got {level}")
    if state.frame is Frame.SELFSIMILAR:
        raise ValueError("fronts are extracted from lab or moving-frame fields")
    xs, _, rows = _rows(state)
    sigma = level_crossings(xs, rows, level)
    found = int(np.count_nonzero(~np.isnan(sigma)))
    if 2 * found < sigma.size:
        raise NoFront(f"only {found} of {sigma.size} rows cross level {level}")
    return sigma, sigma - inverse_level(profile, level)


@dataclass(frozen=True, eq=False)
class FrontTrace:
    level: float
    times: np.ndarray
    ys: np.ndarray
    sigma: np.ndarray
    sigma_inf: np.ndarray
    frame: Frame = Frame.MOVING

    @property
    def absent(self) -> int:
        """Number of (time, row) pairs without a crossing."""
        return int(np.count_nonzero(np.isnan(self.sigma)))

    def row_index(self, y: float) -> int:
        """Index of the y-row nearest to ``y``."""
        return int(np.argmin(np.abs(self.ys - y)))

    def at_row(self, y: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """``(times, sigma_inf)`` along the row nearest to ``y``."""
        return self.times, self.sigma_inf[:, self.row_index(y)]

    def lab_sigma(self) -> np.ndarray:
        """Crossings in lab coordinates."""
        if self.frame is Frame.LAB:
            return self.sigma
        return self.sigma + bramson_shift(self.times)[:, None]

    def moving_sigma(self) -> np.ndarray:
        """Crossings in moving-frame coordinates."""
        if self.frame is Frame.MOVING:
            return self.sigma
        return self.sigma - bramson_shift(self.times)[:, None]

    def to_csv(self, path: Path) -> None:
        """``front.csv`` (t, x_level, sigma_inf) for one row, ``front2d.csv`` (t, y, ...) otherwise."""
        if self.ys.size == 1:
            data = np.column_stack([self.times, self.sigma[:, 0], self.sigma_inf[:, 0]])
            header = "t,x_level,sigma_inf"
        else:
            n_t, n_y = self.sigma.shape
            data = np.column_stack(
                [
                    np.repeat(self.times, n_y),
                    np.tile(self.ys, n_t),
                    self.sigma.ravel(),
                    self.sigma_inf.ravel(),
                ]
            )
            header = "t,y,x_level,sigma_inf"
        np.savetxt(path, data, delimiter=",", header=header, comments="")


class FrontRecorder:
    """Checkpoint observer accumulating the front of every observed state."""

    def __init__(self, profile: WaveProfile, level: float = 0.5):
        self.profile = profile
        self.level = level
        self.times: list[float] = []
        self.sigma: list[np.ndarray] = []
        self.ys: np.ndarray | None = None
        self.frame = Frame.MOVING

    def __call__(self, t: float, state: Field1D | Field2D) -> None:
        """Observer hook."""
        sigma, _ = extract_front(state, self.level, self.profile)
        self.ys = _rows(state)[1]
        self.frame = state.frame
        self.times.append(t)
        self.sigma.append(sigma)
        logger.debug("t=%.4g front at %.6f (level %.2f)", t, float(np.nanmean(sigma)), self.level)

    def trace(self) -> FrontTrace:
        """Accumulated trace."""
        if not self.times:
            raise InsufficientData("no checkpoint was observed")
        times = np.array(self.times)
        sigma = np.vstack(self.sigma)
        # crossings in the lab frame carry the full delay; the wave offset is always moving-frame
        moving = sigma if self.frame is Frame.MOVING else sigma - bramson_shift(times)[:, None]
        sigma_inf = moving - inverse_level(self.profile, self.level)
        return FrontTrace(self.level, times, self.ys, sigma, sigma_inf, self.frame)


@dataclass(frozen=True)
class BramsonFit:
    slope: float
    x_inf: float
    rms: float
    window: tuple[float, float]
    n_points: int
    frame: str

    def to_dict(self) -> dict:
        """JSON-friendly view."""
        return {
            "slope": self.slope,
            "x_inf": self.x_inf,
            "rms": self.rms,
            "window": list(self.window),
            "n_points": self.n_points,
            "frame": self.frame,
        }


def fit_log_law(times, values, window: tuple[float, float]) -> tuple[float, float, float, int]:
    """Least squares of ``values`` against ``slope * ln t + offset`` inside ``window``.

    Returns:
        ``(slope, offset, rms, n_points)``.

    Raises:
        InsufficientData: Fewer than 8 finite samples in the window.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    t_lo, t_hi = window
    keep = (times >= t_lo) & (times <= t_hi) & np.isfinite(values)
    n = int(np.count_nonzero(keep))
    if n < MIN_FIT_POINTS:
        raise InsufficientData(f"{n} samples in [{t_lo}, {t_hi}], need at least {MIN_FIT_POINTS}")
    if t_hi < 10.0 * t_lo:
        logger.warning("fit window [%g, %g] spans less than one decade in t", t_lo, t_hi)
    log_t = np.log(times[keep])
    slope, offset = np.polyfit(log_t, values[keep], 1)
    residual = values[keep] - (slope * log_t + offset)
    return float(slope), float(offset), float(np.sqrt(np.mean(residual**2))), n


def fit_bramson(
    trace: FrontTrace,
    window: tuple[float, float],
    frame: Frame | str = Frame.LAB,
    y: float = 0.0,
) -> BramsonFit:
    """Fit the logarithmic delay on the row nearest to ``y``.

    In the lab frame ``sigma_lab(t) - 2t`` is fitted (slope near -3/2); in the
    moving frame the crossing itself is fitted (slope near 0). ``x_inf`` is minus
    the fitted offset.
    """
    frame = Frame(frame)
    row = trace.row_index(y)
    if frame is Frame.LAB:
        values = trace.lab_sigma()[:, row] - 2.0 * trace.times
    elif frame is Frame.MOVING:
        values = trace.moving_sigma()[:, row]
    else:
        raise ValueError(f"cannot fit in the {frame.value} frame")
    slope, offset, rms, n = fit_log_law(trace.times, values, window)
    return BramsonFit(slope, -offset, rms, (float(window[0]), float(window[1])), n, frame.value)


@dataclass(frozen=True)
class ShapeError:
    unweighted: float
    weighted: float


def shape_error(
    state: Field1D | Field2D,
    profile: WaveProfile,
    t: float,
    level: float = 0.5,
    y: float = 0.0,
) -> ShapeError:
    """Distance between a row and the wave translate through its own level crossing.

    The unweighted error is the sup of ``|u(x) - U(x - sigma_inf)|`` on
    ``[sigma - 40, min(sigma + t^{1/4}, sigma + 10)]``; the weighted one is the sup
    of ``e^{x - sigma}`` times the same difference on ``[sigma - 40, sigma]``.

    Raises:
        NoFront: The row has no crossing.
    """
    xs, ys, rows = _rows(state)
    row = rows[int(np.argmin(np.abs(ys - y)))]
    sigma = level_crossings(xs, row[None, :], level)[0]
    if np.isnan(sigma):
        raise NoFront(f"no crossing of level {level} in the row at y={y}")
    offset = sigma - inverse_level(profile, level)
    diff = np.abs(row - profile(xs - offset))

    ahead = min(sigma + t**0.25, sigma + 10.0)
    near = (xs >= sigma - 40.0) & (xs <= ahead)
    behind = (xs >= sigma - 40.0) & (xs <= sigma)
    unweighted = float(diff[near].max()) if near.any() else 0.0
    weighted = float((np.exp(xs[behind] - sigma) * diff[behind]).max()) if behind.any() else 0.0
    return ShapeError(unweighted, weighted)


def level_consistency(
    state: Field1D | Field2D,
    levels,
    profile: WaveProfile,
) -> np.ndarray:
    """Per-row spread (max - min) of ``sigma_inf`` over several levels."""
    estimates = np.vstack([extract_front(state, level, profile)[1] for level in levels])
    return np.nanmax(estimates, axis=0) - np.nanmin(estimates, axis=0)


def decay_exponent(times, values) -> float:
    """Slope of ``ln values`` against ``ln t``; reported, never gated."""
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    keep = (values > 0) & np.isfinite(values)
    if np.count_nonzero(keep) < 2:
        return math.nan
    return float(np.polyfit(np.log(times[keep]), np.log(values[keep]), 1)[0])


@dataclass(frozen=True)
class ComparisonReport:
    times: np.ndarray
    violations: np.ndarray
    tolerance: float = SANDWICH_TOLERANCE

    @property
    def max_violation(self) -> float:
        """Largest violation over all checkpoints."""
        return float(self.violations.max()) if self.violations.size else 0.0

    @property
    def passed(self) -> bool:
        """True when no checkpoint violates the sandwich beyond the tolerance."""
        return self.max_violation <= self.tolerance


def _violation(u: np.ndarray, hi: np.ndarray, lo: np.ndarray) -> float:
    below = np.max(lo[None, :] - u)
    above = np.max(u - hi[None, :])
    return max(0.0, float(below), float(above))


def _check_bound_grids(gx: Grid1D, run1d_hi: RunRecord, run1d_lo: RunRecord) -> None:
    for bound in (run1d_hi, run1d_lo):
        if bound.grid != gx:
            raise GridMismatch(f"1D grid {bound.grid} does not match the 2D x-grid {gx}")


def comparison_check(run2d: RunRecord, run1d_hi: RunRecord, run1d_lo: RunRecord) -> ComparisonReport:
    """Check ``u_lo(t, x) <= u(t, x, y) <= u_hi(t, x)`` at every stored checkpoint.

    Raises:
        GridMismatch: The x-grids or the checkpoint times differ.
    """
    _check_bound_grids(run2d.grid.gx, run1d_hi, run1d_lo)
    for bound in (run1d_hi, run1d_lo):
        if bound.times.shape != run2d.times.shape or not np.allclose(bound.times, run2d.times, rtol=1e-12):
            raise GridMismatch("checkpoint times of the 1D and 2D runs differ")

    violations = np.empty(len(run2d.checkpoints))
    for i in range(violations.size):
        u = run2d.checkpoints[i].load()
        violations[i] = _violation(u, run1d_hi.checkpoints[i].load(), run1d_lo.checkpoints[i].load())
    report = ComparisonReport(run2d.times, violations)
    logger.info("comparison sandwich: max violation %.3e over %d checkpoints", report.max_violation, violations.size)
    return report


class SandwichObserver:
    """Online form of :func:`comparison_check`: an observer of the 2D run.

    The 1D bound runs come first; each 2D checkpoint is compared with the bound
    checkpoints at the same time and then dropped, so no 2D field is kept.
    """

    def __init__(self, gx: Grid1D, run1d_hi: RunRecord, run1d_lo: RunRecord):
        _check_bound_grids(gx, run1d_hi, run1d_lo)
        if run1d_hi.times.shape != run1d_lo.times.shape or not np.allclose(run1d_hi.times, run1d_lo.times, rtol=1e-12):
            raise GridMismatch("checkpoint times of the two 1D bounds differ")
        self.hi = run1d_hi
        self.lo = run1d_lo
        self.bound_times = run1d_hi.times
        self.times: list[float] = []
        self.violations: list[float] = []

    def __call__(self, t: float, state: Field2D) -> None:
        """Observer hook: violation of the 2D state at checkpoint time ``t``."""
        i = len(self.times)
        if i >= self.bound_times.size or not math.isclose(self.bound_times[i], t, rel_tol=1e-12):
            raise GridMismatch(f"2D checkpoint t={t} has no 1D bound checkpoint at the same time")
        self.times.append(t)
        self.violations.append(_violation(state.values, self.hi.checkpoints[i].load(), self.lo.checkpoints[i].load()))

    def report(self) -> ComparisonReport:
        """Violations collected so far."""
        if len(self.times) != self.bound_times.size:
            raise GridMismatch(f"2D run stopped after {len(self.times)} of {self.bound_times.size} checkpoints")
        report = ComparisonReport(np.array(self.times), np.array(self.violations))
        logger.info("comparison sandwich: max violation %.3e over %d checkpoints", report.max_violation, len(self.times))
        return report
