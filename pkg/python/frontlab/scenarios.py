"""Initial-data families trapped between two Heaviside translates, and oscillation sequences.

Every 2D datum is a function of lab coordinates ``(x, y)``; :meth:`Scenario.sample`
places it on a moving-frame grid at ``t0`` and verifies the sandwich
``1 - H(x - x2) <= u0 <= 1 - H(x - x1)`` pointwise before anything runs.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from scipy import special

from .errors import SandwichViolation
from .heat import PiecewiseConstant
from .kpp1d import moving_to_lab
from .kpp2d import sandwich_violation
from .numerics import Field2D, Frame, Grid2D

logger = logging.getLogger(__name__)

Datum = Callable[[np.ndarray], np.ndarray]
Datum2D = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ScenarioKind(str, Enum):
    HEAVISIDE_TRAPPED = "heaviside_trapped"
    TWO_LIMIT = "two_limit"
    PERIODIC_Y = "periodic_y"
    ASYMPT_PERIODIC_Y = "asympt_periodic_y"
    OSCILLATING = "oscillating"


def _require_order(x1: float, x2: float) -> None:
    if not x2 <= x1:
        raise SandwichViolation(f"witnesses must satisfy x2 <= x1, got x2={x2}, x1={x1}", x2 - x1)


@dataclass(frozen=True, eq=False)
class StepDatum:
    """1D lab-frame datum that equals 1 for ``x <= x2`` and 0 for ``x > x1``."""

    func: Datum
    x1: float
    x2: float
    label: str = ""

    def __post_init__(self):
        _require_order(self.x1, self.x2)

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    def to_dict(self) -> dict[str, Any]:
        """JSON-friendly description."""
        return {"label": self.label, "x1": self.x1, "x2": self.x2}


def heaviside(x0: float) -> StepDatum:
    """``1 - H(x - x0)``: 1 for ``x <= x0``, 0 beyond."""
    return StepDatum(lambda x: (x <= x0).astype(np.float64), x0, x0, f"heaviside({x0:g})")


def exp_step(x2: float, x1: float) -> StepDatum:
    """1 up to ``x2``, ``e^{-(x - x2)}`` on ``(x2, x1]``, 0 beyond ``x1``."""
    _require_order(x1, x2)

    def func(x):
        tail = np.exp(-np.clip(x - x2, 0.0, None))
        return np.where(x <= x2, 1.0, np.where(x <= x1, tail, 0.0))

    return StepDatum(func, x1, x2, f"exp_step({x2:g}, {x1:g})")


def _transition(s):
    return 0.5 * (1.0 + special.erf(s))


@dataclass(frozen=True, eq=False)
class Scenario:
    kind: ScenarioKind
    params: dict[str, Any]
    x1: float
    x2: float
    y_extent: tuple[float, float]
    datum: Datum2D
    alpha: PiecewiseConstant | None = None
    sequence: OscillationSequence | None = None
    bounds_1d: tuple[StepDatum, StepDatum] = field(init=False)

    def __post_init__(self):
        _require_order(self.x1, self.x2)
        object.__setattr__(self, "bounds_1d", (heaviside(self.x1), heaviside(self.x2)))

    def values(self, xs, ys) -> np.ndarray:
        """Datum on the lab-frame tensor grid, shape ``(len(ys), len(xs))``."""
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        out = self.datum(xs[None, :], ys[:, None])
        return np.clip(np.broadcast_to(out, (ys.size, xs.size)).astype(np.float64), 0.0, 1.0)

    def sample(self, grid: Grid2D, t0: float = 1.0) -> Field2D:
        """Moving-frame field at ``t0`` on ``grid``.

        Raises:
            SandwichViolation: The sampled datum leaves the band between the witnesses.
        """
        xs = moving_to_lab(t0, grid.gx.points())
        u0 = Field2D(grid, self.values(xs, grid.gy.points()), Frame.MOVING)
        violation = sandwich_violation(u0, self.x1, self.x2, t0)
        if violation > 0:
            raise SandwichViolation(f"{self.kind.value} datum leaves [x2={self.x2}, x1={self.x1}]", violation)
        logger.debug("sampled %s on %dx%d grid", self.kind.value, grid.gx.size, grid.gy.size)
        return u0

    def to_json(self) -> dict[str, Any]:
        """Kind, parameters, witnesses and, when present, the transverse datum and sequence table."""
        payload: dict[str, Any] = {
            "kind": self.kind.value,
            "params": self.params,
            "x1": self.x1,
            "x2": self.x2,
            "y_extent": list(self.y_extent),
        }
        if self.alpha is not None:
            payload["alpha"] = self.alpha.to_dict()
        if self.sequence is not None:
            payload["sequence"] = self.sequence.to_json()
        return payload


def make_heaviside_trapped(
    x1: float,
    x2: float,
    blend: str = "sharp",
    *,
    ripple: float = 0.0,
    ripple_width: float = 4.0,
    y_extent: tuple[float, float] = (0.0, 40.0),
) -> Scenario:
    """Sharp or exponential edge halfway between the witnesses, optionally rippled in ``y``.

    The edge sits at ``(x1 + x2)/2 + ripple * (x1 - x2)/2 * sech(y / ripple_width)``.
    """
    _require_order(x1, x2)
    if x2 == x1:
        raise SandwichViolation("trapped data need x2 < x1", 0.0)
    if blend not in ("sharp", "exp_profile"):
        raise ValueError(f"blend must be 'sharp' or 'exp_profile', got {blend!r}")
    if not abs(ripple) < 1:
        raise ValueError(f"ripple must lie in (-1, 1), got {ripple}")
    mid = 0.5 * (x1 + x2)
    half = 0.5 * (x1 - x2)

    def edge(y):
        return mid + ripple * half / np.cosh(y / ripple_width)

    def datum(x, y):
        if blend == "sharp":
            return (x <= edge(y)).astype(np.float64)
        inner = np.minimum(1.0, np.exp(-(x - edge(y))))
        return np.where(x <= x2, 1.0, np.where(x > x1, 0.0, inner))

    params = {"blend": blend, "ripple": ripple, "ripple_width": ripple_width}
    return Scenario(ScenarioKind.HEAVISIDE_TRAPPED, params, x1, x2, y_extent, datum)


def make_two_limit(
    plus: StepDatum,
    minus: StepDatum,
    width: float = 10.0,
    *,
    y_extent: tuple[float, float] = (-200.0, 200.0),
) -> Scenario:
    """``chi(y/W) u0_plus(x) + (1 - chi(y/W)) u0_minus(x)`` with ``chi(s) = (1 + erf(s))/2``."""
    if width <= 0:
        raise ValueError(f"transition width must be positive, got {width}")

    def datum(x, y):
        low = minus(x)
        return low + _transition(y / width) * (plus(x) - low)

    params = {"plus": plus.to_dict(), "minus": minus.to_dict(), "width": width}
    return Scenario(
        ScenarioKind.TWO_LIMIT,
        params,
        max(plus.x1, minus.x1),
        min(plus.x2, minus.x2),
        y_extent,
        datum,
    )


def make_periodic_y(
    base: StepDatum,
    amplitude: float,
    period: float,
    asymptotic: bool = False,
    *,
    bump_shift: float = 1.0,
    bump_width: float = 20.0,
    y_extent: tuple[float, float] | None = None,
    witnesses: tuple[float, float] | None = None,
) -> Scenario:
    """``base(x + A sin(2 pi y / P))``.

    The asymptotic variant blends toward ``base(x - bump_shift)`` with the weight
    ``exp(-(y / bump_width)^2)``, so it is only periodic far from ``y = 0``.

    Raises:
        SandwichViolation: ``witnesses = (x1, x2)`` are given and too narrow for the shifts.
    """
    if period <= 0:
        raise ValueError(f"period must be positive, got {period}")
    reach = abs(amplitude)
    x1 = base.x1 + reach + (max(bump_shift, 0.0) if asymptotic else 0.0)
    x2 = base.x2 - reach + (min(bump_shift, 0.0) if asymptotic else 0.0)
    if witnesses is not None:
        w1, w2 = witnesses
        gap = max(x1 - w1, w2 - x2)
        if gap > 0:
            raise SandwichViolation(f"shift amplitude {amplitude} does not fit in [{w2}, {w1}]", gap)
        x1, x2 = w1, w2

    def periodic(x, y):
        return base(x + amplitude * np.sin(2.0 * np.pi * y / period))

    def datum(x, y):
        if not asymptotic:
            return periodic(x, y)
        wave = periodic(x, y)
        return wave + np.exp(-((y / bump_width) ** 2)) * (base(x - bump_shift) - wave)

    kind = ScenarioKind.ASYMPT_PERIODIC_Y if asymptotic else ScenarioKind.PERIODIC_Y
    params: dict[str, Any] = {"base": base.to_dict(), "amplitude": amplitude, "period": period}
    if asymptotic:
        params.update(bump_shift=bump_shift, bump_width=bump_width)
    return Scenario(kind, params, x1, x2, y_extent or (0.0, 2.0 * period), datum)


@dataclass(frozen=True, eq=False)
class OscillationSequence:
    """Transverse band edges ``xs`` and sample times ``ts`` (``ts[n]`` pairs ``xs[n]`` with ``xs[n+1]``)."""

    xs: np.ndarray
    ts: np.ndarray
    contrast: float = 4.0
    lambda_amp: float | None = None
    label: str = "custom"

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        ts = np.asarray(self.ts, dtype=np.float64)
        if xs.ndim != 1 or xs.size < 2:
            raise ValueError("an oscillation sequence needs at least two band edges")
        if ts.shape != (xs.size - 1,):
            raise ValueError(f"expected {xs.size - 1} sample times for {xs.size} edges, got {ts.size}")
        if self.contrast < 1:
            raise ValueError(f"contrast M must be >= 1, got {self.contrast}")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ts", ts)
        if self.lambda_amp is None:
            object.__setattr__(self, "lambda_amp", 1.0 / (2.0 * self.contrast))
        elif self.lambda_amp <= 0:
            raise ValueError(f"lambda_amp must be positive, got {self.lambda_amp}")

    @classmethod
    def factorial(cls, n: int = 8, contrast: float = 4.0) -> OscillationSequence:
        """``x_k = sqrt(k!)`` for ``k = 1..n`` and ``t_k = sqrt(k) k!``."""
        if not 2 <= n <= 150:
            raise ValueError(f"n must lie in [2, 150], got {n}")
        ks = range(1, n + 1)
        xs = [math.sqrt(math.factorial(k)) for k in ks]
        ts = [math.sqrt(k) * math.factorial(k) for k in range(1, n)]
        return cls(np.array(xs), np.array(ts), contrast, label="factorial")

    @classmethod
    def desk(cls, ratio: float = 6.0, n_edges: int = 3, contrast: float = 4.0) -> OscillationSequence:
        """Geometric edges ``ratio^k`` with sample times ``t_n = x_n x_{n+1}``."""
        xs = ratio ** np.arange(n_edges, dtype=np.float64)
        return cls(xs, xs[:-1] * xs[1:], contrast, label="desk")

    def alpha(self) -> PiecewiseConstant:
        """Even transverse amplitude: 1 on even-indexed bands, ``M`` on odd ones (``x_0 = 0``)."""
        levels = np.where(np.arange(self.xs.size + 1) % 2 == 0, 1.0, self.contrast)
        return PiecewiseConstant(self.xs, levels, even_symmetric=True)

    def ratios(self) -> np.ndarray:
        """Rows ``(n, x_{n+1}/x_n, x_n^2/t_n, x_{n+1}^2/t_n)``."""
        x_n, x_next = self.xs[:-1], self.xs[1:]
        index = np.arange(1, self.ts.size + 1, dtype=np.float64)
        return np.column_stack([index, x_next / x_n, x_n**2 / self.ts, x_next**2 / self.ts])

    def to_json(self) -> dict[str, Any]:
        """Edges, sample times, amplitude parameters and the ratio table."""
        return {
            "label": self.label,
            "xs": self.xs.tolist(),
            "ts": self.ts.tolist(),
            "contrast": self.contrast,
            "lambda_amp": self.lambda_amp,
            "ratios": self.ratios().tolist(),
        }


@dataclass(frozen=True)
class SequenceReport:
    monotone: bool
    positive: bool
    surrogate: bool
    table: np.ndarray = field(repr=False)
    notes: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        """Monotone positive edges and sample times."""
        return self.monotone and self.positive


def check_sequence(seq: OscillationSequence) -> SequenceReport:
    """Monotonicity, positivity and the ratio table; notes what can only hold in the limit."""
    notes = []
    monotone_x = bool(np.all(np.diff(seq.xs) > 0))
    monotone_t = bool(np.all(np.diff(seq.ts) > 0))
    positive = bool(seq.xs[0] > 0 and seq.ts[0] > 0)
    if not monotone_x:
        notes.append("band edges are not strictly increasing")
    if not monotone_t:
        notes.append("sample times are not strictly increasing")
    if not positive:
        notes.append("edges and sample times must be positive (the datum is extended evenly to y < 0)")

    table = seq.ratios()
    surrogate = table.shape[0] >= 2 and bool(np.allclose(table[:, 1:], table[0, 1:], rtol=1e-12))
    if surrogate:
        notes.append("finite surrogate, fixed ratios")
    elif table.shape[0] >= 2:
        growing = bool(np.all(np.diff(table[:, 1]) > 0) and np.all(np.diff(table[:, 3]) > 0))
        shrinking = bool(np.all(np.diff(table[:, 2]) < 0))
        if growing and shrinking:
            notes.append("ratio requirements hold only in the limit n -> infinity")
        else:
            notes.append("ratio trends do not follow the limiting requirements")
    return SequenceReport(monotone_x and monotone_t, positive, surrogate, table, tuple(notes))


def make_oscillating(seq: OscillationSequence) -> tuple[Scenario, PiecewiseConstant]:
    """``u0 = min(1, lambda_amp * alpha_M(y) * e^{-x})`` for ``x <= 0``, 0 beyond.

    Witnesses are ``x2 = ln(lambda_amp)`` and ``x1 = 0``.

    Raises:
        SandwichViolation: ``lambda_amp * M > 1``.
    """
    alpha = seq.alpha()
    peak = seq.lambda_amp * alpha.bounds()[1]
    if peak > 1.0:
        raise SandwichViolation(f"lambda_amp * M = {peak:.4g} exceeds 1", peak - 1.0)

    x2 = math.log(seq.lambda_amp)

    def datum(x, y):
        envelope = np.minimum(1.0, seq.lambda_amp * alpha(y) * np.exp(-np.minimum(x, 0.0)))
        return np.where(x <= x2, 1.0, np.where(x <= 0.0, envelope, 0.0))

    params = {"contrast": seq.contrast, "lambda_amp": seq.lambda_amp}
    scenario = Scenario(
        ScenarioKind.OSCILLATING,
        params,
        0.0,
        x2,
        (0.0, 2.0 * float(seq.xs[-1])),
        datum,
        alpha=alpha,
        sequence=seq,
    )
    return scenario, alpha
