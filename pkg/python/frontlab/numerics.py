"""Grids, fields and the small numerical kernels every solver shares.

The tridiagonal kernels are numba-jitted. Wrappers validate shapes before
entering a kernel; kernels report a failing pivot through a status code
(``-1`` when the solve succeeded) and the wrapper turns it into
:class:`~frontlab.errors.SingularSystem`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numba
import numpy as np
from numba import njit, prange
from scipy import integrate, special

from .errors import GridMismatch, InvalidField, SingularSystem

logger = logging.getLogger(__name__)

PIVOT_FLOOR = 1e-300


class Frame(str, Enum):
    LAB = "lab"
    MOVING = "moving"
    SELFSIMILAR = "selfsimilar"


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise InvalidField(f"grid needs x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if self.n < 2:
            raise InvalidField(f"grid needs at least 2 cells, got n={self.n}")

    @classmethod
    def from_spacing(cls, x_min: float, x_max: float, h: float) -> Grid1D:
        """Grid starting at ``x_min`` with spacing ``h``; ``x_max`` is rounded to a whole cell."""
        n = round((x_max - x_min) / h)
        return cls(float(x_min), float(x_min + n * h), int(n))

    @property
    def h(self) -> float:
        """Spacing."""
        return (self.x_max - self.x_min) / self.n

    @property
    def size(self) -> int:
        """Number of points (``n + 1``)."""
        return self.n + 1

    def points(self) -> np.ndarray:
        """Point coordinates."""
        return np.linspace(self.x_min, self.x_max, self.n + 1)

    def to_dict(self) -> dict[str, float]:
        """JSON-friendly description."""
        return {"x_min": self.x_min, "x_max": self.x_max, "n": self.n}


@dataclass(frozen=True)
class Grid2D:
    gx: Grid1D
    gy: Grid1D

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape of a field on this grid, y-major."""
        return (self.gy.size, self.gx.size)

    def to_dict(self) -> dict[str, dict[str, float]]:
        """JSON-friendly description."""
        return {"x": self.gx.to_dict(), "y": self.gy.to_dict()}


def _checked_values(values: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.shape != shape:
        raise GridMismatch(f"field has shape {arr.shape}, grid expects {shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidField("field contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class Field1D:
    grid: Grid1D
    values: np.ndarray
    frame: Frame = Frame.LAB

    def __post_init__(self):
        object.__setattr__(self, "values", _checked_values(self.values, (self.grid.size,)))

    def with_values(self, values: np.ndarray) -> Field1D:
        """Same grid and frame, new samples."""
        return Field1D(self.grid, values, self.frame)


@dataclass(frozen=True, eq=False)
class Field2D:
    grid: Grid2D
    values: np.ndarray
    frame: Frame = Frame.MOVING

    def __post_init__(self):
        object.__setattr__(self, "values", _checked_values(self.values, self.grid.shape))

    def with_values(self, values: np.ndarray) -> Field2D:
        """Same grid and frame, new samples."""
        return Field2D(self.grid, values, self.frame)


# --- tridiagonal systems -----------------------------------------------------


@njit(cache=True)
def _thomas(lower, diag, upper, rhs, out):
    n = diag.shape[0]
    cp = np.empty(max(n - 1, 1))
    beta = diag[0]
    if abs(beta) < PIVOT_FLOOR:
        return 0
    out[0] = rhs[0] / beta
    for i in range(1, n):
        cp[i - 1] = upper[i - 1] / beta
        beta = diag[i] - lower[i - 1] * cp[i - 1]
        if abs(beta) < PIVOT_FLOOR:
            return i
        out[i] = (rhs[i] - lower[i - 1] * out[i - 1]) / beta
    for i in range(n - 2, -1, -1):
        out[i] -= cp[i] * out[i + 1]
    return -1


@njit(cache=True)
def _factor(lower, diag, upper, cp, inv):
    n = diag.shape[0]
    beta = diag[0]
    if abs(beta) < PIVOT_FLOOR:
        return 0
    inv[0] = 1.0 / beta
    for i in range(1, n):
        cp[i - 1] = upper[i - 1] * inv[i - 1]
        beta = diag[i] - lower[i - 1] * cp[i - 1]
        if abs(beta) < PIVOT_FLOOR:
            return i
        inv[i] = 1.0 / beta
    return -1


@njit(parallel=True, cache=True)
def _solve_rows(lower, cp, inv, rhs, out):
    m, n = rhs.shape
    for j in prange(m):
        out[j, 0] = rhs[j, 0] * inv[0]
        for i in range(1, n):
            out[j, i] = (rhs[j, i] - lower[i - 1] * out[j, i - 1]) * inv[i]
        for i in range(n - 2, -1, -1):
            out[j, i] -= cp[i] * out[j, i + 1]


def _check_bands(lower, diag, upper, n_rhs: int):
    lower = np.ascontiguousarray(lower, dtype=np.float64)
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    upper = np.ascontiguousarray(upper, dtype=np.float64)
    if lower.ndim != 1 or diag.ndim != 1 or upper.ndim != 1:
        raise ValueError("lower, diag and upper must be vectors")
    n = diag.shape[0]
    if n < 1:
        raise ValueError("diag must hold at least one entry")
    if lower.shape[0] != n - 1 or upper.shape[0] != n - 1:
        raise ValueError(f"off-diagonals must have length {n - 1}")
    if n_rhs != n:
        raise ValueError(f"right-hand side has length {n_rhs}, system has {n} rows")
    return lower, diag, upper


def solve_tridiagonal(lower, diag, upper, rhs) -> np.ndarray:
    """Solve ``A x = rhs`` for tridiagonal ``A`` by the Thomas algorithm (no pivoting).

    Args:
        lower: Sub-diagonal, length ``n - 1``.
        diag: Diagonal, length ``n``.
        upper: Super-diagonal, length ``n - 1``.
        rhs: Right-hand side, length ``n``.

    Returns:
        The solution vector.

    Raises:
        SingularSystem: A pivot fell below 1e-300 in magnitude.
    """
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    if rhs.ndim != 1:
        raise ValueError("rhs must be a vector; use solve_tridiagonal_batched for many")
    lower, diag, upper = _check_bands(lower, diag, upper, rhs.shape[0])
    out = np.empty_like(rhs)
    status = _thomas(lower, diag, upper, rhs, out)
    if status >= 0:
        raise SingularSystem(int(status), float(diag[status]))
    return out


@dataclass(frozen=True, eq=False)
class TridiagonalFactor:
    """Forward-elimination coefficients of one tridiagonal matrix, reusable across right-hand sides."""

    lower: np.ndarray
    cp: np.ndarray
    inv: np.ndarray

    @property
    def n(self) -> int:
        """System size."""
        return self.inv.shape[0]

    def solve_rows(self, rhs_rows: np.ndarray) -> np.ndarray:
        """Solve every row of ``rhs_rows`` (shape ``(m, n)``) in parallel."""
        rhs_rows = np.ascontiguousarray(rhs_rows, dtype=np.float64)
        if rhs_rows.ndim != 2 or rhs_rows.shape[1] != self.n:
            raise ValueError(f"expected right-hand sides of shape (m, {self.n}), got {rhs_rows.shape}")
        out = np.empty_like(rhs_rows)
        _solve_rows(self.lower, self.cp, self.inv, rhs_rows, out)
        return out


def factor_tridiagonal(lower, diag, upper) -> TridiagonalFactor:
    """Factor a tridiagonal matrix once for repeated solves."""
    lower, diag, upper = _check_bands(lower, diag, upper, np.shape(diag)[0])
    n = diag.shape[0]
    cp = np.zeros(max(n - 1, 1))
    inv = np.empty(n)
    status = _factor(lower, diag, upper, cp, inv)
    if status >= 0:
        raise SingularSystem(int(status), float(diag[status]))
    return TridiagonalFactor(lower, cp, inv)


def solve_tridiagonal_batched(lower, diag, upper, rhs_rows) -> np.ndarray:
    """Solve one tridiagonal system for many right-hand sides (rows of ``rhs_rows``).

    Rows are independent, so the result does not depend on the number of threads.
    """
    return factor_tridiagonal(lower, diag, upper).solve_rows(rhs_rows)


def solve_cyclic_batched(lower, diag, upper, corner_low: float, corner_up: float, rhs_rows) -> np.ndarray:
    """Periodic variant: ``A[n-1, 0] = corner_low`` and ``A[0, n-1] = corner_up``.

    Sherman-Morrison correction on top of the batched Thomas solve.
    """
    diag = np.array(diag, dtype=np.float64)
    n = diag.shape[0]
    if n < 3:
        raise ValueError("cyclic systems need at least 3 unknowns")
    gamma = -diag[0]
    modified = diag.copy()
    modified[0] -= gamma
    modified[-1] -= corner_low * corner_up / gamma
    factor = factor_tridiagonal(lower, modified, upper)

    u = np.zeros((1, n))
    u[0, 0] = gamma
    u[0, -1] = corner_low
    z = factor.solve_rows(u)[0]
    y = factor.solve_rows(rhs_rows)
    vz = z[0] + corner_up / gamma * z[-1]
    vy = y[:, 0] + corner_up / gamma * y[:, -1]
    return y - np.outer(vy / (1.0 + vz), z)


def set_threads(threads: int) -> int:
    """Bound numba's worker count; returns the count actually in effect."""
    threads = max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(threads)
    return threads


# --- special functions, quadrature, interpolation ----------------------------


def erf(z):
    """Error function (scalar or array)."""
    result = special.erf(z)
    if np.ndim(result) == 0:
        return float(result)
    return result


def simpson(values: np.ndarray, h: float, axis: int = -1):
    """Composite Simpson rule on uniformly spaced samples."""
    return integrate.simpson(values, dx=h, axis=axis)


def level_crossings(xs: np.ndarray, rows: np.ndarray, level: float) -> np.ndarray:
    """Row-wise :func:`interp_level_crossing`; rows without a crossing give NaN."""
    xs = np.asarray(xs, dtype=np.float64)
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != xs.shape[0]:
        raise GridMismatch(f"rows have {rows.shape[1]} samples, xs has {xs.shape[0]}")
    mask = (rows[:, :-1] >= level) & (rows[:, 1:] < level)
    found = mask.any(axis=1)
    last = mask.shape[1] - 1 - np.argmax(mask[:, ::-1], axis=1)
    idx = np.arange(rows.shape[0])
    v0 = rows[idx, last]
    v1 = rows[idx, last + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        crossing = xs[last] + (v0 - level) / (v0 - v1) * (xs[last + 1] - xs[last])
    crossing[~found] = np.nan
    return crossing


def interp_level_crossing(xs, vals, level: float) -> float | None:
    """Largest ``x`` where the linear interpolant falls from ``>= level`` to ``< level``.

    Returns:
        The crossing coordinate, or ``None`` when the samples never cross downward.
    """
    crossing = level_crossings(xs, np.asarray(vals)[None, :], level)[0]
    if np.isnan(crossing):
        return None
    return float(crossing)


# --- reaction flow -----------------------------------------------------------


def logistic_flow(u: np.ndarray, tau: float, rate: float = 1.0) -> np.ndarray:
    """Exact flow of ``u' = rate * u (1 - u)`` over time ``tau``; values outside [0, 1] are fixed."""
    growth = np.exp(rate * tau)
    inside = (u >= 0.0) & (u <= 1.0)
    return np.where(inside, u * growth / (1.0 + u * (growth - 1.0)), u)


def calibrated_growth(h: float, dt: float, c: float = 2.0) -> float:
    """Logistic rate that makes the discrete critical speed equal to ``c``.

    The moving-frame linear step (central differences, Crank-Nicolson) damps the
    mode ``e^{-lx}`` by ``CN(nu(l))`` per step. The rate returned here makes the
    minimum over ``l`` of the per-step growth exponent equal to zero; that
    minimum is at ``tanh(l h) = c h / 2``.
    """
    if not 0.0 < c * h / 2.0 < 1.0:
        raise ValueError(f"calibration needs 0 < c h / 2 < 1, got {c * h / 2.0}")
    lam = np.arctanh(c * h / 2.0) / h
    nu = (2.0 * np.cosh(lam * h) - 2.0) / h**2 - c * np.sinh(lam * h) / h
    return float(-np.log((1.0 + 0.5 * dt * nu) / (1.0 - 0.5 * dt * nu)) / dt)
