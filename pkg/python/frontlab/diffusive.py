"""Diffusive zone: self-similar variables, the operators around ``xi e^{-xi^2/4}``, and the
linear Dirichlet problem with its ground-state decomposition.

Profiles in ``xi`` live on ``[0, xi_max]`` with ``xi[0] = 0``. The fourth-order
operators read two ghost values on each side: odd reflection at ``xi = 0``
(Dirichlet), zeros at ``xi_max`` (decay). Transverse ``zeta`` profiles use even
reflection for the drift operator and zeros for the symmetrized one.

The Dirichlet solver evolves the symmetrized unknown ``W = e^{xi^2/8} v``. Its
``xi`` operator is the second-order discretization of the symmetrized operator
shifted so that the discrete ground state has eigenvalue exactly 0; that ground
state is the discrete ``e0`` and every projection inside the solver uses the
plain grid inner product ``h * sum(a * b)``, for which the operator is symmetric.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal
from scipy.special import eval_hermite

from .errors import GridMismatch, InvalidField, StiffnessFailure, WindowEmpty
from .heat import PiecewiseConstant, cn_neumann_rows, exact_neumann_rows, heat_exact_piecewise
from .numerics import Field1D, Field2D, Frame, Grid1D, Grid2D, factor_tridiagonal, simpson

logger = logging.getLogger(__name__)

E0_NORM = math.sqrt(2.0 * math.sqrt(math.pi))
XI_MAX = 12.0
MIN_XI_MAX = 8.0
EPS_MAX = 0.2
ETA_FLOOR = 1e-3
ETA_CEILING = 1e3
BARRIER_WINDOW = (0.2, 3.0)
EXP_CLAMP = 700.0

Coefficient = Callable[[float], float]
Forcing = Callable[[float, np.ndarray], np.ndarray]
InitialDatum = Callable[[np.ndarray, np.ndarray], np.ndarray]


# --- self-similar variables --------------------------------------------------


@dataclass(frozen=True, eq=False)
class SelfSimilarField:
    """``w(tau, xi, y)`` sampled on ``xi`` (rows follow ``y_grid``; a single row when it is None)."""

    tau: float
    xi: Grid1D
    values: np.ndarray
    y_grid: Grid1D | None = None

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.xi.x_min != 0.0 or self.xi.x_max < MIN_XI_MAX:
            raise InvalidField(f"xi-grid must span [0, >= {MIN_XI_MAX}], got [{self.xi.x_min}, {self.xi.x_max}]")
        n_rows = 1 if self.y_grid is None else self.y_grid.size
        values = np.ascontiguousarray(np.atleast_2d(self.values), dtype=np.float64)
        if values.shape != (n_rows, self.xi.size):
            raise GridMismatch(f"values have shape {values.shape}, grid expects {(n_rows, self.xi.size)}")
        if not np.all(np.isfinite(values)):
            raise InvalidField("self-similar field contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def t(self) -> float:
        """Real time ``e^tau``."""
        return math.exp(self.tau)

    @property
    def ys(self) -> np.ndarray:
        """Transverse coordinates of the rows."""
        return np.zeros(1) if self.y_grid is None else self.y_grid.points()


def to_selfsimilar(state: Field1D | Field2D, t: float, xi: Grid1D | None = None) -> SelfSimilarField:
    """``w(ln t, x/sqrt(t), y) = e^x u(t, x, y) / sqrt(t)`` by cubic interpolation in ``x``.

    ``xi`` points beyond the right end of the x-grid get 0.

    Raises:
        InvalidField: ``state`` is not a moving-frame field.
        GridMismatch: The x-grid does not reach down to ``x = 0``.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if state.frame is not Frame.MOVING:
        raise InvalidField(f"self-similar variables start from the moving frame, got {state.frame.value}")
    if isinstance(state, Field2D):
        xs, rows, y_grid = state.grid.gx.points(), state.values, state.grid.gy
    else:
        xs, rows, y_grid = state.grid.points(), state.values[None, :], None
    if xs[0] > 0:
        raise GridMismatch(f"x-grid starts at {xs[0]} > 0")
    xi = xi if xi is not None else Grid1D.from_spacing(0.0, XI_MAX, 0.02)

    root = math.sqrt(t)
    x_eval = xi.points() * root
    inside = x_eval <= xs[-1] + 1e-9 * root
    scaled = rows * np.exp(np.minimum(xs, EXP_CLAMP))
    values = np.zeros((rows.shape[0], xi.size))
    values[:, inside] = CubicSpline(xs, scaled, axis=1)(np.minimum(x_eval[inside], xs[-1])) / root
    if not inside.all():
        logger.debug("xi > %.3g lies beyond the x-grid at t=%g; filled with 0", xs[-1] / root, t)
    return SelfSimilarField(math.log(t), xi, values, y_grid)


def from_selfsimilar(field: SelfSimilarField) -> Field1D | Field2D:
    """Inverse of :func:`to_selfsimilar` on the points ``x = xi sqrt(t)``."""
    root = math.sqrt(field.t)
    x_grid = Grid1D(0.0, field.xi.x_max * root, field.xi.n)
    values = root * np.exp(-x_grid.points()) * field.values
    if field.y_grid is None:
        return Field1D(x_grid, values[0], Frame.MOVING)
    return Field2D(Grid2D(x_grid, field.y_grid), values, Frame.MOVING)


# --- operators ---------------------------------------------------------------


def _ghosts(w: np.ndarray, mode: str, left: bool) -> np.ndarray:
    if mode == "zero":
        return np.zeros((*w.shape[:-1], 2))
    edge = w[..., 2:0:-1] if left else w[..., -2:-4:-1]
    if mode == "odd":
        return -edge
    if mode == "even":
        return edge
    raise ValueError(f"unknown ghost policy {mode!r}")


def _padded(w, left: str, right: str) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    return np.concatenate([_ghosts(w, left, True), w, _ghosts(w, right, False)], axis=-1)


def _d1(p: np.ndarray, h: float) -> np.ndarray:
    return (p[..., :-4] - 8.0 * p[..., 1:-3] + 8.0 * p[..., 3:-1] - p[..., 4:]) / (12.0 * h)


def _d2(p: np.ndarray, h: float) -> np.ndarray:
    return (-p[..., :-4] + 16.0 * p[..., 1:-3] - 30.0 * p[..., 2:-2] + 16.0 * p[..., 3:-1] - p[..., 4:]) / (
        12.0 * h**2
    )


def _xi(w, h: float) -> np.ndarray:
    return h * np.arange(np.shape(w)[-1])


def apply_L(w, h: float) -> np.ndarray:
    """``w'' + (xi/2) w' + w`` on a profile sampled at ``xi = 0, h, 2h, ...``."""
    p = _padded(w, "odd", "zero")
    return _d2(p, h) + 0.5 * _xi(w, h) * _d1(p, h) + np.asarray(w)


def apply_M(w, h: float) -> np.ndarray:
    """``w'' + (3/4 - xi^2/16) w``."""
    xi = _xi(w, h)
    return _d2(_padded(w, "odd", "zero"), h) + (0.75 - xi**2 / 16.0) * np.asarray(w)


def apply_N(w, h: float, zeta: np.ndarray) -> np.ndarray:
    """``w'' + (zeta/2) w'`` on a transverse profile with zero-flux ends."""
    p = _padded(w, "even", "even")
    return _d2(p, h) + 0.5 * zeta * _d1(p, h)


def apply_P(w, h: float, zeta: np.ndarray) -> np.ndarray:
    """``w'' - (1/4 + zeta^2/16) w``: the drift operator conjugated by ``e^{zeta^2/8}``."""
    return _d2(_padded(w, "zero", "zero"), h) - (0.25 + zeta**2 / 16.0) * np.asarray(w)


def e0(xi) -> np.ndarray:
    """Unit null vector ``xi e^{-xi^2/8} / sqrt(2 sqrt(pi))`` of the symmetrized operator."""
    xi = np.asarray(xi, dtype=np.float64)
    return xi * np.exp(-(xi**2) / 8.0) / E0_NORM


def project_e0(w: np.ndarray | SelfSimilarField, h: float | None = None):
    """``<w, e0>`` by composite Simpson along the last axis."""
    if isinstance(w, SelfSimilarField):
        values, h = w.values, w.xi.h
        return simpson(values * e0(w.xi.points()), h, axis=-1)
    if h is None:
        raise ValueError("spacing h is required for raw profiles")
    return simpson(np.asarray(w) * e0(_xi(w, h)), h, axis=-1)


def q_residual(w: np.ndarray, h: float) -> np.ndarray:
    """``w - <w, e0> e0``."""
    w = np.asarray(w, dtype=np.float64)
    alpha = np.asarray(project_e0(w, h))
    return w - alpha[..., None] * e0(_xi(w, h))


def qform(w: np.ndarray, h: float):
    """``int (w')^2 + (xi^2/16 - 3/4) w^2 dxi``."""
    w = np.asarray(w, dtype=np.float64)
    xi = _xi(w, h)
    slope = _d1(_padded(w, "odd", "zero"), h)
    return simpson(slope**2 + (xi**2 / 16.0 - 0.75) * w**2, h, axis=-1)


def _symmetrized_bands(xi: Grid1D) -> tuple[np.ndarray, np.ndarray]:
    inner = xi.points()[1:-1]
    diag = 2.0 / xi.h**2 - 0.75 + inner**2 / 16.0
    return diag, np.full(inner.size - 1, -1.0 / xi.h**2)


def discrete_ground_state(xi: Grid1D) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of the discrete ``-M`` with Dirichlet ends.

    The vector includes the two zero end values, is positive and has unit grid norm.
    """
    diag, off = _symmetrized_bands(xi)
    values, vectors = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    g = vectors[:, 0]
    g = g * np.sign(g.sum()) / math.sqrt(xi.h * float(g @ g))
    full = np.zeros(xi.size)
    full[1:-1] = g
    return float(values[0]), full


def spectral_gap(xi_max: float = XI_MAX, h: float = 0.05) -> float:
    """Distance between the two lowest eigenvalues of the discrete ``-M``."""
    diag, off = _symmetrized_bands(Grid1D.from_spacing(0.0, xi_max, h))
    values = eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 1))
    logger.debug("lowest eigenvalues of -M: %.3e, %.6f", values[0], values[1])
    return float(values[1] - values[0])


def band_limited_profiles(count: int, xi: Grid1D, rng: np.random.Generator, max_order: int = 11) -> np.ndarray:
    """Random combinations of the odd Hermite functions of order 3..``max_order``, ``e0`` removed."""
    xs = xi.points()
    orders = np.arange(3, max_order + 1, 2)
    basis = np.vstack([eval_hermite(n, xs / 2.0) * np.exp(-(xs**2) / 8.0) for n in orders])
    basis /= np.sqrt(simpson(basis**2, xi.h, axis=-1))[:, None]
    return q_residual(rng.standard_normal((count, orders.size)) @ basis, xi.h)


def rayleigh_floor(count: int = 100, xi_max: float = 20.0, h: float = 1e-3, seed: int = 0) -> float:
    """Smallest ``q(w) / |w|^2`` over random band-limited profiles orthogonal to ``e0``."""
    xi = Grid1D.from_spacing(0.0, xi_max, h)
    profiles = band_limited_profiles(count, xi, np.random.default_rng(seed))
    quotients = qform(profiles, h) / simpson(profiles**2, h, axis=-1)
    return float(quotients.min())


# --- the Dirichlet problem ---------------------------------------------------


def default_v0(xi: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``xi e^{-xi^2/4}`` modulated by ``1 + sech(y/4)/2``."""
    return xi * np.exp(-(xi**2) / 4.0) * (1.0 + 0.5 / np.cosh(y / 4.0))


def _bump(xi: np.ndarray, support: float) -> np.ndarray:
    return np.where(xi < support, np.sin(np.pi * np.clip(xi, 0.0, support) / support) ** 2, 0.0)


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    epsilon: float
    lam: float
    phi: Coefficient
    psi: Coefficient
    forcing: Forcing | None = None
    v0: InitialDatum = default_v0
    c0: float = 1.0
    xi_support: float = 4.0
    label: str = "custom"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.c0 < 0:
            raise ValueError(f"C0 must be >= 0, got {self.c0}")

    def weight(self, tau: float) -> float:
        """Size ``eps^{2 lambda} e^{-lambda tau}`` of the lower-order terms."""
        return self.epsilon ** (2.0 * self.lam) * math.exp(-self.lam * tau)

    def check_bounds(self, taus, xi: np.ndarray) -> None:
        """Verify ``|phi|, |psi|, |f| <= C0`` at the sample times and the support of ``f``."""
        limit = self.c0 * (1.0 + 1e-12)
        for tau in taus:
            if abs(self.phi(tau)) > limit or abs(self.psi(tau)) > limit:
                raise ValueError(f"phi or psi exceeds C0={self.c0} at tau={tau:g}")
            if self.forcing is None:
                continue
            f = np.asarray(self.forcing(tau, xi))
            if np.max(np.abs(f)) > limit:
                raise ValueError(f"forcing exceeds C0={self.c0} at tau={tau:g}")
            if np.any(f[xi > self.xi_support] != 0.0):
                raise ValueError(f"forcing is not supported in [0, {self.xi_support}]")

    @classmethod
    def homogeneous(cls, epsilon: float, v0: InitialDatum = default_v0, lam: float = 0.4) -> DirichletProblem:
        """No lower-order terms."""
        return cls(epsilon, lam, lambda tau: 0.0, lambda tau: 0.0, None, v0, 0.0, label="homogeneous")

    @classmethod
    def generic(
        cls,
        epsilon: float,
        lam: float = 0.4,
        c0: float = 1.0,
        v0: InitialDatum = default_v0,
        xi_support: float = 4.0,
    ) -> DirichletProblem:
        """Bounded oscillating coefficients and a compactly supported oscillating forcing."""

        def forcing(tau, xi):
            return c0 * math.cos(3.0 * tau) * _bump(np.asarray(xi, dtype=np.float64), xi_support)

        return cls(
            epsilon,
            lam,
            lambda tau: c0 * math.cos(tau),
            lambda tau: c0 * math.sin(2.0 * tau),
            forcing,
            v0,
            c0,
            xi_support,
            "generic",
        )

    @classmethod
    def supersolution(cls, epsilon: float, delta: float = 0.1, v0: InitialDatum = default_v0) -> DirichletProblem:
        """``phi = 0``, ``psi = -(delta + (3/2) eps^{2 delta} e^{-delta tau})``, ``lambda = 1/2 - delta``."""
        scale = 1.5 * epsilon ** (2.0 * delta)
        return cls(
            epsilon,
            0.5 - delta,
            lambda tau: 0.0,
            lambda tau: -(delta + scale * math.exp(-delta * tau)),
            None,
            v0,
            delta + scale,
            label="supersolution",
        )

    @classmethod
    def subsolution(
        cls, epsilon: float, delta: float = 0.1, c0: float = 1.0, v0: InitialDatum = default_v0
    ) -> DirichletProblem:
        """``phi = C0``, ``psi = delta - (3/2) eps^{2 delta} e^{-delta tau}``, ``lambda = 1/2 - delta``."""
        scale = 1.5 * epsilon ** (2.0 * delta)
        return cls(
            epsilon,
            0.5 - delta,
            lambda tau: c0,
            lambda tau: delta - scale * math.exp(-delta * tau),
            None,
            v0,
            max(c0, abs(delta) + scale),
            label="subsolution",
        )

    def to_dict(self) -> dict[str, Any]:
        """JSON-friendly description."""
        return {
            "label": self.label,
            "epsilon": self.epsilon,
            "lambda": self.lam,
            "C0": self.c0,
            "xi_support": self.xi_support,
        }


@dataclass(frozen=True)
class DirichletOptions:
    xi_max: float = XI_MAX
    xi_step: float = 0.05
    y_grid: Grid1D = Grid1D(-40.0, 40.0, 320)
    dt: float = 0.01
    stiff_ratio: float = 1e3
    spectral_fallback: bool = True
    eps_max: float = EPS_MAX
    record_every: int = 10

    def xi_grid(self) -> Grid1D:
        """Grid of the ``xi`` half-line."""
        grid = Grid1D.from_spacing(0.0, self.xi_max, self.xi_step)
        if grid.x_max < MIN_XI_MAX:
            raise ValueError(f"xi_max must be >= {MIN_XI_MAX}, got {grid.x_max}")
        return grid


@dataclass(frozen=True, eq=False)
class DecompositionRecord:
    taus: np.ndarray
    ys: np.ndarray
    alpha: np.ndarray
    alpha_c: np.ndarray
    beta: np.ndarray
    r_norm: np.ndarray
    vtilde_sup: np.ndarray
    r_dot_e0: np.ndarray
    beta_dy: np.ndarray
    beta_dyy: np.ndarray
    epsilon: float
    lam: float
    spectral_from: float = math.nan

    def identity_defect(self) -> float:
        """``max |alpha - alpha_c - beta|``."""
        return float(np.max(np.abs(self.alpha - self.alpha_c - self.beta)))

    def beta_sup(self) -> float:
        """``sup_tau |beta(tau)|_inf``."""
        return float(np.max(np.abs(self.beta)))

    def rescaled_time(self) -> np.ndarray:
        """Heat time ``(e^tau - 1) / eps^2`` reached by ``alpha_c``."""
        return np.expm1(self.taus) / self.epsilon**2

    def to_csv(self, path: Path) -> None:
        """``decomposition.csv``."""
        data = np.column_stack(
            [
                self.taus,
                np.max(np.abs(self.alpha), axis=1),
                np.max(np.abs(self.beta), axis=1),
                self.r_norm,
                self.vtilde_sup,
            ]
        )
        np.savetxt(path, data, delimiter=",", header="tau,alpha_sup,beta_sup,r_norm,vtilde_sup", comments="")


class _XiStepper:
    """Crank-Nicolson step of the shifted symmetrized operator on the interior ``xi`` points."""

    def __init__(self, xi: Grid1D, shift: float, dt: float):
        diag, off = _symmetrized_bands(xi)
        self.diag = -diag + shift
        self.off = -off[0]
        k = 0.5 * dt
        n = diag.size
        self.k = k
        self.factor = factor_tridiagonal(
            np.full(n - 1, -k * self.off), 1.0 - k * self.diag, np.full(n - 1, -k * self.off)
        )

    def apply(self, w: np.ndarray) -> np.ndarray:
        rhs = w[:, 1:-1] + self.k * (self.off * (w[:, :-2] + w[:, 2:]) + self.diag * w[:, 1:-1])
        out = np.zeros_like(w)
        out[:, 1:-1] = self.factor.solve_rows(rhs)
        return out


def _y_heat(values: np.ndarray, ratio: float, exact: bool) -> np.ndarray:
    """Neumann heat step along axis 0 with ``ratio = D dt / h_y^2``."""
    if exact:
        return exact_neumann_rows(values, ratio, axis=0)
    return cn_neumann_rows(np.ascontiguousarray(values.T), ratio).T


def _central(w: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(w)
    out[:, 1:-1] = (w[:, 2:] - w[:, :-2]) / (2.0 * h)
    return out


def _lower_order(problem: DirichletProblem, xs: np.ndarray, h: float, with_forcing: bool):
    """Right-hand side of the lower-order terms in the symmetrized picture."""
    lift = np.exp(xs**2 / 8.0)

    def rhs(tau: float, w: np.ndarray) -> np.ndarray:
        phi, psi = problem.phi(tau), problem.psi(tau)
        out = (phi - 0.25 * psi * xs) * w + psi * _central(w, h)
        if with_forcing and problem.forcing is not None:
            out = out + lift * np.asarray(problem.forcing(tau, xs))
        out = problem.weight(tau) * out
        out[:, 0] = 0.0
        out[:, -1] = 0.0
        return out

    return rhs


def _heun(rhs, tau: float, w: np.ndarray, step: float) -> np.ndarray:
    k1 = rhs(tau, w)
    k2 = rhs(tau + step, w + step * k1)
    return w + 0.5 * step * (k1 + k2)


def _initial_symmetrized(problem: DirichletProblem, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    v0 = np.broadcast_to(problem.v0(xs[None, :], ys[:, None]), (ys.size, xs.size))
    w0 = np.exp(xs**2 / 8.0) * v0
    if not np.all(np.isfinite(w0)):
        raise InvalidField("initial datum is not finite after the e^{xi^2/8} lift")
    peak = float(np.max(np.abs(w0)))
    tail = float(np.max(np.abs(w0[:, -max(2, xs.size // 20) :])))
    if peak > 0 and tail > 1e-4 * peak:
        raise ValueError("initial datum does not decay against e^{xi^2/8} by xi_max")
    w0 = w0.copy()
    w0[:, 0] = 0.0
    w0[:, -1] = 0.0
    return w0


def run_dirichlet(
    problem: DirichletProblem,
    tau_end: float,
    options: DirichletOptions | None = None,
) -> DecompositionRecord:
    """Integrate the linear problem and record the ground-state decomposition.

    Each step is a Strang cycle: half a Heun step of the lower-order terms, the
    linear flow (``xi`` Crank-Nicolson, then the ``y`` heat flow over the heat
    time ``(e^{tau+dt} - e^tau)/eps^2``), half a Heun step. ``alpha_c`` receives
    the same ``y`` update as ``W``.

    Raises:
        StiffnessFailure: The ``y`` step exceeds ``stiff_ratio`` and the spectral fallback is off.
    """
    options = options or DirichletOptions()
    if problem.epsilon > options.eps_max:
        raise ValueError(f"epsilon={problem.epsilon} exceeds eps_max={options.eps_max}")
    if tau_end <= 0:
        raise ValueError(f"tau_end must be positive, got {tau_end}")
    xi = options.xi_grid()
    xs, h = xi.points(), xi.h
    ys, hy = options.y_grid.points(), options.y_grid.h
    problem.check_bounds(np.linspace(0.0, tau_end, 65), xs)

    shift, ground = discrete_ground_state(xi)
    w = _initial_symmetrized(problem, xs, ys)
    alpha_c = h * (w @ ground)
    n_steps = max(1, math.ceil(tau_end / options.dt - 1e-9))
    dt = tau_end / n_steps
    xi_step = _XiStepper(xi, shift, dt)
    rhs = _lower_order(problem, xs, h, with_forcing=True)
    damping = np.exp(-(xs**2) / 8.0)

    rows: dict[str, list] = {key: [] for key in ("tau", "alpha", "alpha_c", "r", "vt", "dot", "dy", "dyy")}

    def record(tau: float) -> None:
        alpha = h * (w @ ground)
        r = w - alpha[:, None] * ground[None, :]
        beta = alpha - alpha_c
        rows["tau"].append(tau)
        rows["alpha"].append(alpha)
        rows["alpha_c"].append(alpha_c.copy())
        rows["r"].append(float(np.sqrt(h * np.max(np.sum(r**2, axis=1)))))
        rows["vt"].append(float(math.exp(0.5 * problem.lam * tau) * np.max(np.abs(damping * r))))
        rows["dot"].append(float(np.max(np.abs(h * (r @ ground)))))
        rows["dy"].append(float(np.max(np.abs(np.gradient(beta, hy)))))
        rows["dyy"].append(float(np.max(np.abs(np.diff(beta, 2)))) / hy**2 if beta.size > 2 else 0.0)

    record(0.0)
    spectral_from = math.nan
    for k in range(n_steps):
        tau = k * dt
        w = _heun(rhs, tau, w, 0.5 * dt)
        w = xi_step.apply(w)
        ratio = (math.exp(tau + dt) - math.exp(tau)) / problem.epsilon**2 / hy**2
        exact = ratio > options.stiff_ratio
        if exact and not options.spectral_fallback:
            raise StiffnessFailure(f"y-step ratio {ratio:.3g} exceeds {options.stiff_ratio:g} at tau={tau:.3f}")
        if exact and math.isnan(spectral_from):
            spectral_from = tau
            logger.info("y-diffusion switched to the exact spectral update at tau=%.3f (ratio %.3g)", tau, ratio)
        w = _y_heat(w, ratio, exact)
        alpha_c = _y_heat(alpha_c[:, None], ratio, exact)[:, 0]
        w = _heun(rhs, tau + 0.5 * dt, w, 0.5 * dt)
        if (k + 1) % options.record_every == 0 or k + 1 == n_steps:
            record((k + 1) * dt)

    alpha = np.vstack(rows["alpha"])
    alpha_c_rows = np.vstack(rows["alpha_c"])
    result = DecompositionRecord(
        taus=np.array(rows["tau"]),
        ys=ys,
        alpha=alpha,
        alpha_c=alpha_c_rows,
        beta=alpha - alpha_c_rows,
        r_norm=np.array(rows["r"]),
        vtilde_sup=np.array(rows["vt"]),
        r_dot_e0=np.array(rows["dot"]),
        beta_dy=np.array(rows["dy"]),
        beta_dyy=np.array(rows["dyy"]),
        epsilon=problem.epsilon,
        lam=problem.lam,
        spectral_from=spectral_from,
    )
    logger.info(
        "dirichlet %s eps=%g: %d steps to tau=%g, sup|beta|=%.3e, final |r|=%.3e",
        problem.label,
        problem.epsilon,
        n_steps,
        tau_end,
        result.beta_sup(),
        result.r_norm[-1],
    )
    return result


def amplitude_heat_flow(
    a0: PiecewiseConstant,
    epsilon: float,
    tau_end: float,
    options: DirichletOptions | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Measured transverse amplitude of ``xi e^{-xi^2/4} a0(y)`` next to its closed-form heat flow.

    Solves the homogeneous problem and returns ``(ys, alpha, expected)`` at ``tau_end``,
    both amplitudes divided by the projection constant ``alpha(0, y) / a0(y)``, so that
    ``expected`` is the heat flow of ``a0`` over the time ``(e^tau - 1) / eps^2``.
    """

    def datum(xi, y):
        return xi * np.exp(-(xi**2) / 4.0) * a0(y)

    record = run_dirichlet(DirichletProblem.homogeneous(epsilon, datum), tau_end, options)
    sampled = np.asarray(a0(record.ys))
    kappa = float(record.alpha[0] @ sampled / (sampled @ sampled))
    heat_time = float(record.rescaled_time()[-1])
    expected = heat_exact_piecewise(a0, 1.0 + heat_time, record.ys)
    logger.debug("amplitude heat flow: kappa=%.6f, heat time %.3f", kappa, heat_time)
    return record.ys, record.alpha[-1] / kappa, expected


# --- decay in transverse self-similar variables ------------------------------


@dataclass(frozen=True, eq=False)
class DecaySeries:
    taus: np.ndarray
    l2: np.ndarray
    vtilde_sup: np.ndarray

    def relative(self, which: str = "vtilde_sup") -> np.ndarray:
        """Series divided by its initial value (zeros when it starts at 0)."""
        series = getattr(self, which)
        if series[0] == 0:
            return np.zeros_like(series)
        return series / series[0]

    def envelope_ratio(self, which: str = "l2") -> float:
        """``max_tau (s(tau)/s(0)) / e^{-tau/2}``."""
        return float(np.max(self.relative(which) * np.exp(0.5 * self.taus)))


def _zeta_flow(
    problem: DirichletProblem,
    tau_end: float,
    options: DirichletOptions,
    zeta_max: float,
    zeta_step: float,
) -> DecaySeries:
    xi = options.xi_grid()
    xs, h = xi.points(), xi.h
    zeta = Grid1D.from_spacing(-zeta_max, zeta_max, zeta_step)
    zs, hz = zeta.points(), zeta.h
    shift, _ = discrete_ground_state(xi)

    # at tau = 0 the transverse variable is zeta = eps * y
    v0 = np.broadcast_to(problem.v0(xs[None, :], zs[:, None] / problem.epsilon), (zs.size, xs.size))
    w = np.exp((xs[None, :] ** 2 + zs[:, None] ** 2) / 8.0) * v0
    w = np.where(np.isfinite(w), w, 0.0)
    w[:, [0, -1]] = 0.0
    w[[0, -1], :] = 0.0

    n_steps = max(1, math.ceil(tau_end / options.dt - 1e-9))
    dt = tau_end / n_steps
    xi_step = _XiStepper(xi, shift, dt)
    zeta_diag = -2.0 / hz**2 - (0.25 + zs[1:-1] ** 2 / 16.0)
    k = 0.5 * dt
    off = np.full(zs.size - 3, -k / hz**2)
    zeta_factor = factor_tridiagonal(off, 1.0 - k * zeta_diag, off)
    rhs = _lower_order(problem, xs, h, with_forcing=False)
    damping = np.exp(-(xs[None, :] ** 2 + zs[:, None] ** 2) / 8.0)

    taus, l2, sup = [], [], []

    def record(tau: float) -> None:
        v = damping[:, 1:] * w[:, 1:] / xs[None, 1:]
        taus.append(tau)
        l2.append(float(np.sqrt(h * hz * np.sum(w**2))))
        sup.append(float(np.max(np.abs(v))))

    record(0.0)
    for step in range(n_steps):
        tau = step * dt
        w = _heun(rhs, tau, w, 0.5 * dt)
        w = xi_step.apply(w)
        cols = np.ascontiguousarray(w.T)
        inner = cols[:, 1:-1] + k * (
            (cols[:, :-2] + cols[:, 2:]) / hz**2 + zeta_diag * cols[:, 1:-1]
        )
        cols[:, 1:-1] = zeta_factor.solve_rows(inner)
        w = np.ascontiguousarray(cols.T)
        w = _heun(rhs, tau + 0.5 * dt, w, 0.5 * dt)
        if (step + 1) % options.record_every == 0 or step + 1 == n_steps:
            record((step + 1) * dt)
    return DecaySeries(np.array(taus), np.array(l2), np.array(sup))


def localized_decay(
    problem: DirichletProblem,
    tau_end: float,
    options: DirichletOptions | None = None,
    *,
    zeta_max: float = 12.0,
    zeta_step: float = 0.1,
) -> DecaySeries:
    """``sup |v / xi|`` over time for data with vanishing ``y``-tails.

    The flow is integrated in ``zeta = eps y e^{-tau/2}`` where the transverse
    diffusion becomes time independent. The forcing ``f`` is not carried over.
    """
    series = _zeta_flow(problem, tau_end, options or DirichletOptions(), zeta_max, zeta_step)
    logger.info(
        "decay of sup|v/xi| to tau=%g: %.3e of the initial value",
        tau_end,
        series.relative()[-1],
    )
    return series


def energy_decay(
    problem: DirichletProblem,
    tau_end: float,
    options: DirichletOptions | None = None,
    *,
    zeta_max: float = 12.0,
    zeta_step: float = 0.1,
) -> tuple[np.ndarray, np.ndarray]:
    """``(taus, |w(tau)|)`` for the doubly symmetrized flow."""
    series = _zeta_flow(problem, tau_end, options or DirichletOptions(), zeta_max, zeta_step)
    return series.taus, series.l2


# --- barriers and slaving amplitude ------------------------------------------


@dataclass(frozen=True, eq=False)
class BarrierPair:
    taus: np.ndarray
    eta_minus: np.ndarray
    eta_plus: np.ndarray
    q_minus: np.ndarray
    q_plus: np.ndarray
    eta0: float = ETA_FLOOR
    eta1: float = ETA_CEILING

    def to_csv(self, path: Path) -> None:
        """``barriers.csv``."""
        data = np.column_stack([self.taus, self.eta_minus, self.eta_plus, self.q_minus, self.q_plus])
        np.savetxt(path, data, delimiter=",", header="tau,eta_minus,eta_plus,q_minus,q_plus", comments="")


@dataclass(frozen=True)
class BarrierReport:
    pair: BarrierPair
    passed: bool
    burn_in: float
    notes: tuple[str, ...] = ()


def _envelope(ratio: np.ndarray, growth: np.ndarray, upper: bool) -> tuple[float, float]:
    design = np.column_stack([np.ones_like(growth), growth])
    slope = float(np.linalg.lstsq(design, ratio, rcond=None)[0][1])
    if upper:
        q = max(slope, 0.0)
        return float(np.max(ratio - q * growth)), q
    q = max(-slope, 0.0)
    return float(np.min(ratio + q * growth)), q


def barrier_check(
    series: Sequence[SelfSimilarField],
    window: tuple[float, float] = BARRIER_WINDOW,
    *,
    burn_in: float = 1.0,
    eta0: float = ETA_FLOOR,
    eta1: float = ETA_CEILING,
) -> BarrierReport:
    """Fit ``eta_- xi e^{-xi^2/4} - q_- xi e^{-xi^2/7} <= w <= eta_+ xi e^{-xi^2/4} + q_+ xi e^{-xi^2/7}``.

    Per time, the ratio ``w / (xi e^{-xi^2/4})`` is reduced over ``y`` to its lower
    and upper envelope on the window; each envelope is fitted against
    ``eta + q e^{3 xi^2/28}`` and the constant is then moved so the bound holds
    at every window point. The check passes when ``eta0 <= eta_- <= eta_+ <= eta1``
    after the burn-in and ``q e^{tau/4}`` has not grown.

    Raises:
        WindowEmpty: No grid point lies in the window or no field is past the burn-in.
    """
    lo, hi = window
    taus, eta_m, eta_p, q_m, q_p = [], [], [], [], []
    for field in series:
        xs = field.xi.points()
        inside = (xs >= lo) & (xs <= hi) & (xs > 0)
        if not inside.any():
            raise WindowEmpty(f"no xi-grid point in [{lo}, {hi}]")
        xi = xs[inside]
        ratio = field.values[:, inside] / (xi * np.exp(-(xi**2) / 4.0))
        growth = np.exp(3.0 * xi**2 / 28.0)
        upper, qp = _envelope(ratio.max(axis=0), growth, upper=True)
        lower, qm = _envelope(ratio.min(axis=0), growth, upper=False)
        taus.append(field.tau)
        eta_p.append(upper)
        eta_m.append(lower)
        q_p.append(qp)
        q_m.append(qm)

    pair = BarrierPair(np.array(taus), np.array(eta_m), np.array(eta_p), np.array(q_m), np.array(q_p), eta0, eta1)
    late = pair.taus >= burn_in
    if not late.any():
        raise WindowEmpty(f"no field at tau >= {burn_in}")
    notes = []
    bounded = bool(
        np.all(pair.eta_minus[late] >= eta0)
        and np.all(pair.eta_plus[late] <= eta1)
        and np.all(pair.eta_minus[late] <= pair.eta_plus[late])
    )
    if not bounded:
        notes.append(f"eta outside [{eta0:g}, {eta1:g}] after tau={burn_in:g}")
    q_scaled = np.maximum(pair.q_minus[late], pair.q_plus[late]) * np.exp(0.25 * pair.taus[late])
    decaying = bool(q_scaled[-1] <= 2.0 * q_scaled[0] + 1e-12)
    if not decaying:
        notes.append("correction amplitude decays slower than e^{-tau/4}")
    return BarrierReport(pair, bounded and decaying, burn_in, tuple(notes))


def extract_a0(
    state: Field1D | Field2D,
    t: float,
    epsilon: float,
    delta: float = 0.1,
    xi: Grid1D | None = None,
) -> np.ndarray:
    """Slaving amplitude ``(1/sqrt(2 sqrt(pi))) int eta w(ln t, eta + eps^{1 - 2 delta}, y) d eta`` per row."""
    field = to_selfsimilar(state, t, xi)
    shift = epsilon ** (1.0 - 2.0 * delta)
    xs = field.xi.points()
    eta = xs[xs <= xs[-1] - shift]
    if eta.size < 3:
        raise WindowEmpty(f"shift {shift:g} leaves no room on [0, {xs[-1]:g}]")
    shifted = CubicSpline(xs, field.values, axis=1)(eta + shift)
    return np.atleast_1d(simpson(eta * shifted, field.xi.h, axis=-1) / E0_NORM)
