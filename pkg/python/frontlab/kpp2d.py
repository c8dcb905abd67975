"""Two-dimensional Fisher-KPP solver in the moving frame.

The linear part is split by Peaceman-Rachford ADI: an implicit x-sweep (diffusion
plus drift) over every y-row, then an implicit y-sweep over every x-column. Each
sweep is a batch of independent tridiagonal solves, run in parallel by the
numba kernels; the order of operations does not depend on the thread count.
For y-independent data the ADI step reduces exactly to the 1D Crank-Nicolson step.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import InvalidField, SandwichViolation
from .fronts import FrontRecorder
from .heat import neumann_bands, neumann_laplacian
from .kpp1d import (
    Observer,
    check_cfl,
    check_range,
    integrate,
    moving_speed,
    moving_to_lab,
    solve_x,
    strang_step,
    x_operator,
)
from .numerics import (
    Field2D,
    Frame,
    Grid2D,
    calibrated_growth,
    factor_tridiagonal,
    set_threads,
    solve_cyclic_batched,
)
from .records import CheckpointSink, RunRecord
from .wave import WaveProfile

logger = logging.getLogger(__name__)

SANDWICH_SLACK = 0.0


class YBoundary(str, Enum):
    NEUMANN = "neumann"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class Solver2DConfig:
    grid: Grid2D
    dt: float = 0.02
    t0: float = 1.0
    y_bc: YBoundary = YBoundary.NEUMANN
    bc_left: float = 1.0
    bc_right: float = 0.0
    threads: int = 1
    startup_steps: int = 50
    calibrate_speed: bool = True
    checkpoints_per_decade: int = 32

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t0 < 1:
            raise ValueError(f"t0 must be >= 1, got {self.t0}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if not (0 <= self.bc_left <= 1 and 0 <= self.bc_right <= 1):
            raise ValueError("boundary values must lie in [0, 1]")
        object.__setattr__(self, "y_bc", YBoundary(self.y_bc))
        if self.y_bc is YBoundary.PERIODIC and self.grid.gy.n < 3:
            raise ValueError("periodic closure needs at least 3 y-cells")

    @property
    def frame(self) -> Frame:
        """Always the moving frame."""
        return Frame.MOVING

    @property
    def growth(self) -> float:
        """Logistic rate used by the reaction half steps."""
        if self.calibrate_speed:
            return calibrated_growth(self.grid.gx.h, self.dt)
        return 1.0


def y_operator(u: np.ndarray, hy: float, y_bc: YBoundary) -> np.ndarray:
    """``u_yy`` along axis 0 with the configured closure."""
    if y_bc is YBoundary.PERIODIC:
        body = u[:-1]
        lap = np.roll(body, -1, axis=0) - 2.0 * body + np.roll(body, 1, axis=0)
        return np.vstack([lap, lap[:1]]) / hy**2
    return neumann_laplacian(u, axis=0) / hy**2


def solve_y(rhs: np.ndarray, weight: float, hy: float, y_bc: YBoundary) -> np.ndarray:
    """Solve ``(I - weight * d_yy) u = rhs`` column by column."""
    ratio = weight / hy**2
    columns = np.ascontiguousarray(rhs.T)
    if y_bc is YBoundary.PERIODIC:
        n = columns.shape[1] - 1
        off = np.full(n - 1, -ratio)
        solved = solve_cyclic_batched(off, np.full(n, 1.0 + 2.0 * ratio), off, -ratio, -ratio, columns[:, :-1])
        solved = np.hstack([solved, solved[:, :1]])
    else:
        factor = factor_tridiagonal(*neumann_bands(columns.shape[1], ratio))
        solved = factor.solve_rows(columns)
    return np.ascontiguousarray(solved.T)


def adi_linear(u: np.ndarray, dt: float, speed: float, hx: float, hy: float, cfg: Solver2DConfig, scheme: str) -> np.ndarray:
    """Linear part of one step: Peaceman-Rachford for ``cn``, Lie (x then y) backward Euler for ``euler``."""
    bc = (cfg.bc_left, cfg.bc_right)
    if scheme == "euler":
        half = solve_x(u[:, 1:-1], dt, hx, speed, bc)
        return solve_y(half, dt, hy, cfg.y_bc)
    if scheme != "cn":
        raise ValueError(f"unknown scheme {scheme!r}")
    weight = 0.5 * dt
    rhs = u[:, 1:-1] + weight * y_operator(u, hy, cfg.y_bc)[:, 1:-1]
    half = solve_x(rhs, weight, hx, speed, bc)
    rhs = half + weight * np.pad(x_operator(half, hx, speed), ((0, 0), (1, 1)))
    out = solve_y(rhs, weight, hy, cfg.y_bc)
    out[:, 0] = cfg.bc_left
    out[:, -1] = cfg.bc_right
    return out


def step_2d(
    state: Field2D,
    t: float,
    cfg: Solver2DConfig,
    *,
    dt: float | None = None,
    scheme: str = "cn",
) -> Field2D:
    """Advance ``state`` from ``t`` to ``t + dt`` by one Strang cycle with an ADI linear step.

    Raises:
        CFLViolation: ``dt > h_x``.
        InvalidField: The state is outside ``[0, 1]`` or not in the moving frame.
    """
    dt = cfg.dt if dt is None else dt
    if state.frame is not Frame.MOVING:
        raise InvalidField(f"2D states live in the moving frame, got {state.frame.value}")
    hx, hy = cfg.grid.gx.h, cfg.grid.gy.h
    check_cfl(dt, hx, Frame.MOVING)
    check_range(state.values)

    def linear(u: np.ndarray, t_mid: float) -> np.ndarray:
        return adi_linear(u, dt, moving_speed(t_mid), hx, hy, cfg, scheme)

    values = strang_step(state.values, t, dt, cfg.growth, linear)
    values[:, 0] = cfg.bc_left
    values[:, -1] = cfg.bc_right
    return state.with_values(values)


def sandwich_violation(u0: Field2D, x1: float, x2: float, t0: float = 1.0) -> float:
    """Largest violation of ``1 - H(x - x2) <= u0 <= 1 - H(x - x1)`` in lab coordinates."""
    xs = moving_to_lab(t0, u0.grid.gx.points())
    lower = (xs <= x2).astype(np.float64)
    upper = (xs <= x1).astype(np.float64)
    return float(max(0.0, np.max(lower[None, :] - u0.values), np.max(u0.values - upper[None, :])))


def run_2d(
    u0: Field2D,
    cfg: Solver2DConfig,
    t_end: float,
    observers: Sequence[Observer] = (),
    *,
    profile: WaveProfile | None = None,
    level: float = 0.5,
    witnesses: tuple[float, float] | None = None,
    field_dir: Path | None = None,
    field_meta: dict | None = None,
    keep: Callable[[float], bool] | None = None,
) -> RunRecord:
    """Integrate to ``t_end`` with checkpoints and, when ``profile`` is given, the full-y front trace.

    Observers see every checkpoint; the record holds samples only where ``keep`` accepts
    the time (or everywhere when ``field_dir`` is set, as dumps carrying ``field_meta``).

    Raises:
        SandwichViolation: ``witnesses = (x1, x2)`` is given and ``u0`` is not trapped between them.
    """
    if t_end <= cfg.t0:
        raise ValueError(f"t_end={t_end} must exceed t0={cfg.t0}")
    provenance: dict = {}
    if witnesses is not None:
        x1, x2 = witnesses
        violation = sandwich_violation(u0, x1, x2, cfg.t0)
        if violation > SANDWICH_SLACK:
            raise SandwichViolation(f"initial data leave the band [x2={x2}, x1={x1}]", violation)
        provenance["sandwich"] = {"x1": x1, "x2": x2, "violation": violation}

    threads = set_threads(cfg.threads)
    sink = CheckpointSink(cfg.grid, Frame.MOVING, field_dir, tag="u2d", meta=field_meta, keep=keep)
    recorder = FrontRecorder(profile, level) if profile is not None else None
    hooks = [sink, *([recorder] if recorder else []), *observers]

    started = time.perf_counter()
    _, steps = integrate(u0, cfg, t_end, step_2d, hooks)
    elapsed = time.perf_counter() - started
    ny, nx = cfg.grid.shape
    logger.info(
        "2D run: %dx%d grid, %d steps to t=%g on %d threads in %.1fs (%.3g cell-steps/s)",
        nx,
        ny,
        steps,
        t_end,
        threads,
        elapsed,
        nx * ny * steps / max(elapsed, 1e-12),
    )
    record = RunRecord("run2d", cfg.grid, Frame.MOVING, sink.checkpoints)
    if recorder is not None:
        record.front = recorder.trace()
    provenance.update({"wall_time": elapsed, "steps": steps, "threads": threads, "growth": cfg.growth})
    record.provenance.update(provenance)
    return record
