"""Critical traveling wave of the Fisher-KPP equation at speed 2."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from numba import njit
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .errors import NonConvergence, WindowOutOfRange

logger = logging.getLogger(__name__)

CRITICAL_SPEED = 2.0
MANIFOLD_RATE = math.sqrt(2.0) - 1.0
MANIFOLD_OFFSET = 1e-8
DEFAULT_TAIL_WINDOW = (8.0, 12.0)


@dataclass(frozen=True, eq=False)
class WaveProfile:
    xs: np.ndarray
    us: np.ndarray
    dus: np.ndarray
    c: float = CRITICAL_SPEED
    k_hat: float = math.nan
    tail_slope: float = 1.0

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.xs, self.us, self.dus)

    @property
    def half_width(self) -> float:
        """Right end of the sampled domain."""
        return float(self.xs[-1])

    def __call__(self, z):
        """Profile value at ``z`` with clamping outside the sampled domain."""
        z = np.asarray(z, dtype=np.float64)
        inside = np.clip(z, self.xs[0], self.xs[-1])
        values = self._spline(inside)
        b = self.tail_slope
        with np.errstate(over="ignore", invalid="ignore"):
            tail = b * (z + self.k_hat - math.log(b)) * np.exp(-z)
        values = np.where(z < self.xs[0], 1.0, values)
        values = np.where(z > self.xs[-1], tail, values)
        if values.ndim == 0:
            return float(values)
        return values

    def check(self) -> None:
        """Raise :class:`NonConvergence` unless the samples satisfy the profile invariants."""
        if not np.all(np.diff(self.us) < 0):
            raise NonConvergence("wave samples are not strictly decreasing")
        if self.us[0] < 1 - 1e-6 or self.us[-1] > 1e-8:
            raise NonConvergence(
                f"wave limits not reached: U(first)={self.us[0]:.3e}, U(last)={self.us[-1]:.3e}"
            )
        zero = int(np.argmin(np.abs(self.xs)))
        if abs(self.us[zero] - 0.5) > 1e-10:
            raise NonConvergence(f"U(0) = {self.us[zero]!r}, expected 1/2")

    def to_csv(self, path: Path) -> None:
        """Dump ``(x, U)`` pairs with header ``x,U``."""
        np.savetxt(path, np.column_stack([self.xs, self.us]), delimiter=",", header="x,U", comments="")


@dataclass(frozen=True)
class TailFit:
    k_hat: float
    max_deviation: float
    window: tuple[float, float]
    corrected: bool
    tail_slope: float = 1.0


def _reaction(u: float) -> float:
    if 0.0 <= u <= 1.0:
        return u * (1.0 - u)
    return 0.0


_reaction_jit = njit(cache=True)(_reaction)


@njit(cache=True)
def _rk4(u0, p0, h, n_steps, stop_below):
    us = np.empty(n_steps + 1)
    ps = np.empty(n_steps + 1)
    us[0] = u0
    ps[0] = p0
    for j in range(n_steps):
        u = us[j]
        p = ps[j]
        k1u = p
        k1p = -2.0 * p - _reaction_jit(u)
        k2u = p + 0.5 * h * k1p
        k2p = -2.0 * k2u - _reaction_jit(u + 0.5 * h * k1u)
        k3u = p + 0.5 * h * k2p
        k3p = -2.0 * k3u - _reaction_jit(u + 0.5 * h * k2u)
        k4u = p + h * k3p
        k4p = -2.0 * k4u - _reaction_jit(u + h * k3u)
        us[j + 1] = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        ps[j + 1] = p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if stop_below > 0.0 and us[j + 1] < stop_below:
            return us[: j + 2], ps[: j + 2]
    return us, ps


def _manifold(s):
    """State on the unstable manifold of (1, 0), parametrized so that ``1 - U = 1e-8`` at ``s = 0``."""
    gap = MANIFOLD_OFFSET * np.exp(MANIFOLD_RATE * np.asarray(s, dtype=np.float64))
    return 1.0 - gap, -MANIFOLD_RATE * gap


def _half_crossing(s, us, ps) -> float:
    below = np.flatnonzero(us < 0.5)
    if below.size == 0:
        raise NonConvergence("trajectory never crossed 1/2")
    j = int(below[0])
    piece = CubicHermiteSpline(s[j - 1 : j + 1], us[j - 1 : j + 1], ps[j - 1 : j + 1])
    return float(brentq(lambda z: float(piece(z)) - 0.5, s[j - 1], s[j], xtol=1e-15))


def compute_wave(domain_half_width: float = 40.0, step: float = 0.005) -> WaveProfile:
    """Integrate the critical wave along the unstable manifold of ``(U, U') = (1, 0)``.

    The profile is sampled on ``[-L, L]`` with spacing ``step`` and translated so
    that the node ``x = 0`` carries ``U = 1/2``.

    Raises:
        NonConvergence: The trajectory does not cross 1/2, or the normalization
            cannot be pinned to a grid node.
    """
    if domain_half_width < 30:
        raise ValueError(f"domain_half_width must be >= 30, got {domain_half_width}")
    if step > 1e-2:
        raise ValueError(f"step must be <= 1e-2, got {step}")
    h = float(step)
    n_half = round(domain_half_width / h)

    u0, p0 = _manifold(0.0)
    max_steps = int(400.0 / h)
    us, ps = _rk4(float(u0), float(p0), h, max_steps, 0.5)
    if us[-1] >= 0.5:
        raise NonConvergence(f"no crossing of 1/2 within {400.0} length units")
    s_cross = _half_crossing(h * np.arange(us.size), us, ps)

    anchor = math.ceil(s_cross / h)
    s_start = s_cross - anchor * h
    n_steps = anchor + n_half + 2
    for _ in range(20):
        u0, p0 = _manifold(s_start)
        us, ps = _rk4(float(u0), float(p0), h, n_steps, -1.0)
        s = s_start + h * np.arange(us.size)
        drift = _half_crossing(s, us, ps) - s[anchor]
        if abs(us[anchor] - 0.5) <= 1e-13:
            break
        s_start -= drift
    else:
        raise NonConvergence(f"U(0) normalization stalled at {us[anchor]!r}")

    lo = anchor - n_half
    xs = h * np.arange(-n_half, n_half + 1)
    if lo >= 0:
        samples = us[lo : anchor + n_half + 1]
        slopes = ps[lo : anchor + n_half + 1]
    else:
        ext_u, ext_p = _manifold(s_start + h * np.arange(lo, 0))
        samples = np.concatenate([ext_u, us[: anchor + n_half + 1]])
        slopes = np.concatenate([ext_p, ps[: anchor + n_half + 1]])

    profile = WaveProfile(xs, samples.copy(), slopes.copy())
    profile.check()
    fit = fit_tail_k(profile, DEFAULT_TAIL_WINDOW, corrected=True)
    profile = replace(profile, k_hat=fit.k_hat, tail_slope=fit.tail_slope)
    logger.info(
        "critical wave on [-%g, %g], h=%g: k_hat=%.6f, tail slope=%.6f",
        h * n_half,
        h * n_half,
        h,
        fit.k_hat,
        fit.tail_slope,
    )
    return profile


def _tail_remainder(xs: np.ndarray, us: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(int_x^L g, int_x^L (s - x) g)`` for ``g = e^s U(s)^2``."""
    g = np.exp(xs) * us**2
    rev = slice(None, None, -1)
    mass = -cumulative_trapezoid(g[rev], xs[rev], initial=0.0)[rev]
    moment = -cumulative_trapezoid((xs * g)[rev], xs[rev], initial=0.0)[rev]
    return mass, moment - xs * mass


def fit_tail_k(
    profile: WaveProfile,
    window: tuple[float, float] = DEFAULT_TAIL_WINDOW,
    corrected: bool = False,
) -> TailFit:
    """Estimate the tail constant ``k`` of ``U(x) ~ (x + k) e^{-x}``.

    With ``corrected=False`` this is the plain mean of ``e^x U(x) - x`` over the
    window. With ``corrected=True`` the profile is first rescaled to unit tail
    slope and the exact second-order tail term is removed, so the averaged
    quantity is constant for a true solution of the wave equation.

    Raises:
        WindowOutOfRange: The window is not inside ``[5, L - 2]`` or is reversed.
    """
    x_lo, x_hi = window
    if not (5.0 <= x_lo < x_hi <= profile.half_width - 2.0):
        raise WindowOutOfRange(
            f"tail window [{x_lo}, {x_hi}] must satisfy 5 <= x_lo < x_hi <= {profile.half_width - 2.0}"
        )
    inside = (profile.xs >= x_lo) & (profile.xs <= x_hi)
    xs = profile.xs[inside]
    scaled = np.exp(xs) * profile.us[inside]

    slope = 1.0
    if corrected:
        mass, remainder = _tail_remainder(profile.xs, profile.us)
        local_slope = np.exp(xs) * (profile.us[inside] + profile.dus[inside]) + mass[inside]
        slope = float(np.mean(local_slope))
        values = math.log(slope) + (scaled - remainder[inside]) / slope - xs
    else:
        values = scaled - xs

    k_hat = float(np.mean(values))
    deviation = float(np.max(np.abs(values - k_hat)))
    return TailFit(k_hat, deviation, (float(x_lo), float(x_hi)), corrected, slope)


def evaluate_shifted(profile: WaveProfile, x, shift):
    """``U(x + shift)``; 1 left of the sampled domain, tail law right of it."""
    return profile(np.add(x, shift))


def inverse_level(profile: WaveProfile, level: float) -> float:
    """The unique ``x`` with ``U(x) = level``."""
    if not 1e-6 < level < 1 - 1e-6:
        raise ValueError(f"level must lie in (1e-6, 1 - 1e-6), got {level}")
    i = int(np.argmax(profile.us < level))
    if i == 0:
        return float(profile.xs[0])
    a, b = profile.xs[i - 1], profile.xs[i]
    return float(brentq(lambda z: profile(z) - level, a, b, xtol=1e-13, rtol=4 * np.finfo(float).eps))


def ode_residual_rms(profile: WaveProfile) -> float:
    """RMS of the centered-difference residual of ``U'' + c U' + U (1 - U)``."""
    u = profile.us
    h = float(profile.xs[1] - profile.xs[0])
    second = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2
    first = (u[2:] - u[:-2]) / (2.0 * h)
    mid = u[1:-1]
    residual = second + profile.c * first + mid * (1.0 - mid)
    return float(np.sqrt(np.mean(residual**2)))
