"""Transverse heat flow: stepped solvers, the erf closed form and the merged limit profile."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft, special

from .numerics import Field1D, TridiagonalFactor, erf, factor_tridiagonal

logger = logging.getLogger(__name__)

FACTORIAL_WINDOW = 40


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """Step function with ``len(breakpoints) + 1`` constant pieces.

    ``values[0]`` holds left of ``breakpoints[0]`` and ``values[-1]`` right of
    ``breakpoints[-1]``. With ``even_symmetric`` the breakpoints are positive,
    ``values[0]`` holds on ``(-b0, b0)`` and the rest is mirrored to ``y < 0``.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    even_symmetric: bool = False

    def __post_init__(self):
        breakpoints = np.asarray(self.breakpoints, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if breakpoints.ndim != 1 or breakpoints.size == 0:
            raise ValueError("breakpoints must be a non-empty vector")
        if np.any(np.diff(breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if values.shape != (breakpoints.size + 1,):
            raise ValueError(
                f"expected {breakpoints.size + 1} values for {breakpoints.size} breakpoints, got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if self.even_symmetric and breakpoints[0] <= 0:
            raise ValueError("even-symmetric breakpoints must be positive")
        object.__setattr__(self, "breakpoints", breakpoints)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value: float) -> PiecewiseConstant:
        """Same value everywhere."""
        return cls(np.array([0.0]), np.array([value, value]))

    def unfolded(self) -> PiecewiseConstant:
        """Equivalent representation without the symmetry flag."""
        if not self.even_symmetric:
            return self
        b = self.breakpoints
        v = self.values
        return PiecewiseConstant(np.concatenate([-b[::-1], b]), np.concatenate([v[::-1], v[1:]]))

    def __call__(self, y):
        """Sample; points on a breakpoint get the mean of the two adjacent pieces."""
        full = self.unfolded()
        y = np.asarray(y, dtype=np.float64)
        left = np.searchsorted(full.breakpoints, y, side="left")
        right = np.searchsorted(full.breakpoints, y, side="right")
        result = 0.5 * (full.values[left] + full.values[right])
        if result.ndim == 0:
            return float(result)
        return result

    def bounds(self) -> tuple[float, float]:
        """Smallest and largest value."""
        return float(self.values.min()), float(self.values.max())

    def to_dict(self) -> dict:
        """JSON-friendly description."""
        return {
            "breakpoints": self.breakpoints.tolist(),
            "values": self.values.tolist(),
            "even_symmetric": self.even_symmetric,
        }


def heat_exact_piecewise(a0: PiecewiseConstant, t: float, y):
    """Heat flow from ``a0`` at ``t = 1`` evaluated at ``(t, y)``, in closed form.

    Each constant piece contributes ``(v/2) [erf((b_right - y)/s) - erf((b_left - y)/s)]``
    with ``s = 2 sqrt(t - 1)``; the two outer pieces use ``erf(+-inf) = +-1``.
    """
    if t < 1:
        raise ValueError(f"heat clock starts at t = 1, got t={t}")
    if t == 1:
        return a0(y)
    full = a0.unfolded()
    y_arr = np.asarray(y, dtype=np.float64)
    scale = 2.0 * math.sqrt(t - 1.0)
    edges = np.concatenate([[-np.inf], full.breakpoints, [np.inf]])
    cdf = special.erf((edges[:, None] - y_arr.reshape(1, -1)) / scale)
    result = 0.5 * np.einsum("i,ij->j", full.values, np.diff(cdf, axis=0))
    if y_arr.ndim == 0:
        return float(result[0])
    return result.reshape(y_arr.shape)


def neumann_bands(n_points: int, ratio: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bands of ``I - ratio * L`` for the ghost-reflection Neumann Laplacian ``L`` (times ``h^2``)."""
    lower = np.full(n_points - 1, -ratio)
    upper = np.full(n_points - 1, -ratio)
    diag = np.full(n_points, 1.0 + 2.0 * ratio)
    upper[0] = -2.0 * ratio
    lower[-1] = -2.0 * ratio
    return lower, diag, upper


def neumann_laplacian(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """``h^2`` times the discrete Neumann Laplacian along ``axis``."""
    a = np.moveaxis(a, axis, -1)
    out = np.empty_like(a)
    out[..., 1:-1] = a[..., 2:] - 2.0 * a[..., 1:-1] + a[..., :-2]
    out[..., 0] = 2.0 * (a[..., 1] - a[..., 0])
    out[..., -1] = 2.0 * (a[..., -2] - a[..., -1])
    return np.moveaxis(out, -1, axis)


@lru_cache(maxsize=32)
def _cn_factor(n_points: int, ratio: float) -> TridiagonalFactor:
    return factor_tridiagonal(*neumann_bands(n_points, 0.5 * ratio))


def cn_neumann_rows(rows: np.ndarray, ratio: float) -> np.ndarray:
    """One Crank-Nicolson step along the last axis of ``rows`` with ``ratio = D dt / h^2``."""
    rows = np.atleast_2d(rows)
    rhs = rows + 0.5 * ratio * neumann_laplacian(rows)
    return _cn_factor(rows.shape[-1], float(ratio)).solve_rows(rhs)


def exact_neumann_rows(rows: np.ndarray, ratio: float, axis: int = -1) -> np.ndarray:
    """Exact exponential of the discrete Neumann Laplacian along ``axis`` (DCT-I diagonalization)."""
    n = rows.shape[axis] - 1
    k = np.arange(n + 1)
    rates = -4.0 * np.sin(0.5 * np.pi * k / n) ** 2
    shape = [1] * rows.ndim
    shape[axis] = n + 1
    coeffs = fft.dct(rows, type=1, axis=axis)
    coeffs *= np.exp(ratio * rates).reshape(shape)
    return fft.idct(coeffs, type=1, axis=axis)


def heat_step_cn(a: Field1D, dt: float, diffusivity: float = 1.0) -> Field1D:
    """Crank-Nicolson step of ``a_t = D a_yy`` with zero-flux ends.

    The trapezoid-weighted mass ``h (a_0/2 + a_1 + ... + a_n/2)`` is conserved.
    """
    ratio = diffusivity * dt / a.grid.h**2
    return a.with_values(cn_neumann_rows(a.values[None, :], ratio)[0])


def heat_step_exact(a: Field1D, dt: float, diffusivity: float = 1.0) -> Field1D:
    """Exact-in-time step of the semi-discrete Neumann heat equation.

    Conserves the same trapezoid-weighted mass as :func:`heat_step_cn`, not ``h * sum(a)``.
    """
    ratio = diffusivity * dt / a.grid.h**2
    return a.with_values(exact_neumann_rows(a.values, ratio))


def evolve_heat(a: Field1D, duration: float, dt: float, diffusivity: float = 1.0) -> Field1D:
    """Repeated :func:`heat_step_cn` over ``duration``; the last step is shortened to land exactly."""
    if duration < 0:
        raise ValueError(f"duration must be non-negative, got {duration}")
    n_steps = math.ceil(duration / dt - 1e-9)
    if n_steps == 0:
        return a
    step = duration / n_steps
    ratio = diffusivity * step / a.grid.h**2
    rows = a.values[None, :]
    for _ in range(n_steps):
        rows = cn_neumann_rows(rows, ratio)
    logger.debug("heat evolved over %g in %d steps", duration, n_steps)
    return a.with_values(rows[0])


def trapezoid_mass(a: Field1D) -> float:
    """``h (a_0/2 + a_1 + ... + a_n/2)``, the discrete mass conserved by the Neumann steppers."""
    v = a.values
    return float(a.grid.h * (v.sum() - 0.5 * (v[0] + v[-1])))


def alpha_c_infty(sigma_plus: float, sigma_minus: float, zeta):
    """Bounded solution of ``-g'' - (zeta/2) g' = 0`` with ``g(+-inf) = exp(-sigma_pm)``."""
    lo = math.exp(-sigma_minus)
    hi = math.exp(-sigma_plus)
    return lo + (hi - lo) * 0.5 * (1.0 + erf(np.divide(zeta, 2.0)))


def merged_limit(sigma_plus: float, sigma_minus: float) -> float:
    """Delay at ``y = 0`` predicted from the two limiting delays: ``-ln alpha_c_infty(0)``."""
    return -math.log(alpha_c_infty(sigma_plus, sigma_minus, 0.0))


def oscillation_oracle(alpha: PiecewiseConstant, ts) -> np.ndarray:
    """``a(t, 0)`` for each sample time, from the closed form."""
    return np.array([heat_exact_piecewise(alpha, float(t), 0.0) for t in ts])


def factorial_oracle(n: int, contrast: float, window: int = FACTORIAL_WINDOW) -> float:
    """``a(t_n, 0)`` for the sequence ``t_n = sqrt(n) n!``, ``x_n = sqrt(n!)``, ``x_0 = 0``.

    The transverse datum is 1 on ``(x_j, x_{j+1})`` for even ``j`` and ``contrast``
    for odd ``j``. Everything is computed from ``lgamma`` so ``n`` can be large;
    only the pieces within ``window`` indices of ``n`` contribute measurably.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    log_t = 0.5 * math.log(n) + math.lgamma(n + 1)
    log_scale = math.log(2.0) + 0.5 * (log_t + math.log1p(-math.exp(-log_t)))

    lo = max(0, n - window)
    hi = n + window
    js = np.arange(lo, hi + 1)
    log_x = 0.5 * special.gammaln(js + 1.0)
    args = np.exp(log_x - log_scale)
    if lo == 0:
        args[0] = 0.0
    cdf = special.erf(args)
    levels = np.where(js % 2 == 0, 1.0, contrast)

    value = float(np.sum(levels[:-1] * np.diff(cdf)))
    value += float(levels[-1] * (1.0 - cdf[-1]))
    # pieces left of the window carry a mass below erf(args[0])
    value += 0.5 * (1.0 + contrast) * float(cdf[0])
    return value
