"""One-dimensional Fisher-KPP solver in the lab or the logarithmically delayed moving frame.

Each step is a Strang cycle: half a step of the exact logistic flow, a full
linear step (diffusion plus, in the moving frame, the drift ``(2 - 3/(2t)) u_x``)
and a second logistic half step. The linear step is Crank-Nicolson with
central differences and Dirichlet ends; backward Euler is available for
start-up steps from discontinuous data.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CFLViolation, InvalidField
from .fronts import FrontRecorder, bramson_shift
from .numerics import Field1D, Frame, Grid1D, calibrated_growth, factor_tridiagonal, logistic_flow
from .records import CheckpointSink, RunRecord
from .wave import WaveProfile

logger = logging.getLogger(__name__)

Observer = Callable[[float, object], None]
SCHEMES = {"cn": 0.5, "euler": 1.0}
RANGE_SLACK = 1e-12


def moving_speed(t: float) -> float:
    """Drift coefficient ``X'(t) = 2 - 3/(2t)`` of the moving frame."""
    return 2.0 - 1.5 / t


def moving_to_lab(t, x):
    """Lab coordinate of the moving-frame point ``x`` at time ``t``."""
    return np.add(x, bramson_shift(t))


def checkpoint_times(t0: float, t_end: float, per_decade: int = 32) -> np.ndarray:
    """Log-spaced targets ``t0 * 10^(k / per_decade)`` up to and including ``t_end``."""
    if t_end <= t0:
        raise ValueError(f"t_end={t_end} must exceed t0={t0}")
    count = math.floor(per_decade * math.log10(t_end / t0) + 1e-9)
    targets = t0 * 10.0 ** (np.arange(count + 1) / per_decade)
    if targets[-1] < t_end * (1 - 1e-12):
        targets = np.append(targets, t_end)
    return targets


@dataclass(frozen=True)
class Solver1DConfig:
    grid: Grid1D
    dt: float = 0.02
    t0: float = 1.0
    frame: Frame = Frame.MOVING
    bc_left: float = 1.0
    bc_right: float = 0.0
    startup_steps: int = 50
    calibrate_speed: bool = True
    checkpoints_per_decade: int = 32

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t0 < 1:
            raise ValueError(f"t0 must be >= 1, got {self.t0}")
        if not (0 <= self.bc_left <= 1 and 0 <= self.bc_right <= 1):
            raise ValueError("boundary values must lie in [0, 1]")
        if Frame(self.frame) is Frame.SELFSIMILAR:
            raise ValueError("the KPP solver runs in the lab or the moving frame")
        if self.startup_steps < 0:
            raise ValueError("startup_steps must be >= 0")
        object.__setattr__(self, "frame", Frame(self.frame))

    @property
    def growth(self) -> float:
        """Logistic rate used by the reaction half steps."""
        if self.calibrate_speed and self.frame is Frame.MOVING:
            return calibrated_growth(self.grid.h, self.dt)
        return 1.0


def check_cfl(dt: float, h: float, frame: Frame) -> None:
    """Advective safeguard ``dt <= h`` in the moving frame."""
    if frame is Frame.MOVING and dt > h * (1 + 1e-12):
        raise CFLViolation(dt, h)


def check_range(values: np.ndarray) -> None:
    """Reject states outside ``[0, 1]``."""
    if values.min() < -RANGE_SLACK or values.max() > 1 + RANGE_SLACK:
        raise InvalidField(f"state leaves [0, 1]: min={values.min():.3e}, max={values.max():.3e}")


def _stencil(h: float, speed: float) -> tuple[float, float, float]:
    return 1.0 / h**2 - 0.5 * speed / h, -2.0 / h**2, 1.0 / h**2 + 0.5 * speed / h


def x_operator(rows: np.ndarray, h: float, speed: float) -> np.ndarray:
    """``u_xx + speed * u_x`` by central differences at the interior columns of ``rows``."""
    lo, mid, up = _stencil(h, speed)
    return lo * rows[:, :-2] + mid * rows[:, 1:-1] + up * rows[:, 2:]


def solve_x(rhs: np.ndarray, weight: float, h: float, speed: float, bc: tuple[float, float]) -> np.ndarray:
    """Solve ``(I - weight * A_x) u = rhs`` for the interior columns with Dirichlet values ``bc``.

    ``rhs`` holds the interior columns only; the result carries the boundary columns.
    """
    left, right = bc
    lo, mid, up = _stencil(h, speed)
    rhs = rhs.copy()
    rhs[:, 0] += weight * lo * left
    rhs[:, -1] += weight * up * right
    n_inner = rhs.shape[1]
    factor = factor_tridiagonal(
        np.full(n_inner - 1, -weight * lo),
        np.full(n_inner, 1.0 - weight * mid),
        np.full(n_inner - 1, -weight * up),
    )
    out = np.empty((rhs.shape[0], n_inner + 2))
    out[:, 1:-1] = factor.solve_rows(rhs)
    out[:, 0] = left
    out[:, -1] = right
    return out


def x_sweep(rows: np.ndarray, h: float, dt: float, speed: float, theta: float, bc: tuple[float, float]) -> np.ndarray:
    """Theta-scheme step of ``u_t = u_xx + speed * u_x`` along the last axis, Dirichlet ends.

    ``rows`` has shape ``(m, n + 1)``; the first and last column hold the boundary values.
    """
    rhs = rows[:, 1:-1].copy()
    if theta < 1.0:
        rhs += (1.0 - theta) * dt * x_operator(rows, h, speed)
    return solve_x(rhs, theta * dt, h, speed, bc)


def strang_step(
    values: np.ndarray,
    t: float,
    dt: float,
    growth: float,
    linear: Callable[[np.ndarray, float], np.ndarray],
) -> np.ndarray:
    """Half logistic flow, ``linear(values, t_mid)``, half logistic flow, clip to ``[0, 1]``."""
    values = logistic_flow(values, 0.5 * dt, growth)
    values = linear(values, t + 0.5 * dt)
    values = logistic_flow(values, 0.5 * dt, growth)
    return np.clip(values, 0.0, 1.0)


def step_1d(
    state: Field1D,
    t: float,
    cfg: Solver1DConfig,
    *,
    dt: float | None = None,
    scheme: str = "cn",
) -> Field1D:
    """Advance ``state`` from ``t`` to ``t + dt`` by one Strang cycle.

    Raises:
        CFLViolation: Moving frame with ``dt > h``.
        InvalidField: The state is outside ``[0, 1]`` or in the wrong frame.
    """
    dt = cfg.dt if dt is None else dt
    if state.frame is not cfg.frame:
        raise InvalidField(f"state is in the {state.frame.value} frame, solver in the {cfg.frame.value} frame")
    check_cfl(dt, cfg.grid.h, cfg.frame)
    check_range(state.values)
    theta = SCHEMES[scheme]
    moving = cfg.frame is Frame.MOVING
    bc = (cfg.bc_left, cfg.bc_right)

    def linear(rows: np.ndarray, t_mid: float) -> np.ndarray:
        speed = moving_speed(t_mid) if moving else 0.0
        return x_sweep(rows, cfg.grid.h, dt, speed, theta, bc)

    values = strang_step(state.values[None, :], t, dt, cfg.growth, linear)[0]
    values[0] = cfg.bc_left
    values[-1] = cfg.bc_right
    return state.with_values(values)


def sample_initial(datum: Callable[[np.ndarray], np.ndarray], grid: Grid1D, frame: Frame = Frame.MOVING, t0: float = 1.0) -> Field1D:
    """Sample lab-frame data; in the moving frame the samples are pre-shifted by ``X(t0)``."""
    frame = Frame(frame)
    xs = grid.points()
    if frame is Frame.MOVING:
        xs = moving_to_lab(t0, xs)
    return Field1D(grid, np.asarray(datum(xs), dtype=np.float64), frame)


def integrate(
    state,
    cfg,
    t_end: float,
    step: Callable,
    observers: Sequence[Observer],
) -> tuple[object, int]:
    """Drive ``step`` from ``cfg.t0`` to ``t_end`` and call observers on the checkpoint schedule.

    Start-up backward-Euler half steps come first; the last step is shortened to land on ``t_end``.
    Returns the final state and the number of steps taken.
    """
    targets = checkpoint_times(cfg.t0, t_end, cfg.checkpoints_per_decade)
    for observer in observers:
        observer(cfg.t0, state)
    pending = 1

    t = cfg.t0
    steps = 0
    for _ in range(cfg.startup_steps):
        state = step(state, t, cfg, dt=0.5 * cfg.dt, scheme="euler")
        steps += 1
        t = cfg.t0 + 0.5 * cfg.dt * steps
    base = t
    k = 0
    while t < t_end * (1 - 1e-13):
        dt = min(cfg.dt, t_end - t)
        state = step(state, t, cfg, dt=dt)
        k += 1
        steps += 1
        t = base + k * cfg.dt if dt == cfg.dt else t_end
        if pending < targets.size and t >= targets[pending] * (1 - 1e-13):
            while pending < targets.size and t >= targets[pending] * (1 - 1e-13):
                pending += 1
            for observer in observers:
                observer(t, state)
    return state, steps


def run_1d(
    u0: Field1D,
    cfg: Solver1DConfig,
    t_end: float,
    observers: Sequence[Observer] = (),
    *,
    profile: WaveProfile | None = None,
    level: float = 0.5,
    field_dir: Path | None = None,
    field_meta: dict | None = None,
    keep: Callable[[float], bool] | None = None,
) -> RunRecord:
    """Integrate to ``t_end`` and collect checkpoints (and the front trace when ``profile`` is given).

    ``field_meta`` goes into every dump sidecar; ``keep`` selects the in-memory checkpoints
    that hold their samples (all of them by default).
    """
    if t_end <= cfg.t0:
        raise ValueError(f"t_end={t_end} must exceed t0={cfg.t0}")
    sink = CheckpointSink(cfg.grid, cfg.frame, field_dir, tag="u1d", meta=field_meta, keep=keep)
    recorder = FrontRecorder(profile, level) if profile is not None else None
    hooks = [sink, *([recorder] if recorder else []), *observers]

    started = time.perf_counter()
    _, steps = integrate(u0, cfg, t_end, step_1d, hooks)
    elapsed = time.perf_counter() - started
    logger.info(
        "1D %s-frame run: %d points, %d steps to t=%g in %.2fs (logistic rate %.8f)",
        cfg.frame.value,
        cfg.grid.size,
        steps,
        t_end,
        elapsed,
        cfg.growth,
    )
    record = RunRecord("run1d", cfg.grid, cfg.frame, sink.checkpoints)
    if recorder is not None:
        record.front = recorder.trace()
    record.provenance["wall_time"] = elapsed
    record.provenance["steps"] = steps
    record.provenance["growth"] = cfg.growth
    return record
