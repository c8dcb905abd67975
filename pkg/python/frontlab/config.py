"""Experiment configuration: TOML files mapped onto frozen dataclasses.

Every physical default lives here. A file names its pipeline at the top level
(``pipeline = "run1d"``) and overrides any subset of the sections below; unknown
sections or keys and constraint violations raise :class:`ConfigError` with the
offending key and its line.
"""

from __future__ import annotations

import dataclasses
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .diffusive import DirichletOptions
from .errors import ConfigError
from .heat import PiecewiseConstant
from .kpp1d import Solver1DConfig
from .kpp2d import Solver2DConfig, YBoundary
from .numerics import Frame, Grid1D, Grid2D
from .scenarios import (
    OscillationSequence,
    Scenario,
    ScenarioKind,
    StepDatum,
    exp_step,
    heaviside,
    make_heaviside_trapped,
    make_oscillating,
    make_periodic_y,
    make_two_limit,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PIPELINES = ("wave", "run1d", "run2d", "heat", "dirichlet", "suite")
DATUM_KINDS = ("heaviside", "exp_step")


def _fail(section: str, key: str, message: str) -> ConfigError:
    return ConfigError(message, key=f"{section}.{key}")


@dataclass(frozen=True)
class GridSection:
    x_min: float = -60.0
    x_max: float | None = None
    hx: float = 0.05
    y_min: float | None = None
    y_max: float | None = None
    hy: float = 0.25

    def __post_init__(self):
        if self.hx <= 0:
            raise _fail("grid", "hx", f"must be positive, got {self.hx}")
        if self.hy <= 0:
            raise _fail("grid", "hy", f"must be positive, got {self.hy}")
        if self.x_min > 0:
            raise _fail("grid", "x_min", "the moving-frame grid must contain x = 0")

    def x_grid(self, t_end: float) -> Grid1D:
        """``[x_min, x_max]``; ``x_max`` defaults to ``60 + 4 sqrt(t_end)``."""
        x_max = self.x_max if self.x_max is not None else 60.0 + 4.0 * math.sqrt(t_end)
        return Grid1D.from_spacing(self.x_min, x_max, self.hx)

    def y_grid(self, extent: tuple[float, float]) -> Grid1D:
        """Transverse grid over ``extent`` unless ``y_min``/``y_max`` override it."""
        y_min = self.y_min if self.y_min is not None else extent[0]
        y_max = self.y_max if self.y_max is not None else extent[1]
        return Grid1D.from_spacing(y_min, y_max, self.hy)


@dataclass(frozen=True)
class SolverSection:
    dt: float = 0.02
    t0: float = 1.0
    t_end: float = 2000.0
    frame: str = "moving"
    y_bc: str = "neumann"
    startup_steps: int = 50
    calibrate_speed: bool = True
    checkpoints_per_decade: int = 32
    threads: int = 1
    save_fields: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise _fail("solver", "dt", f"must be positive, got {self.dt}")
        if self.t0 < 1:
            raise _fail("solver", "t0", f"must be >= 1, got {self.t0}")
        if self.t_end <= self.t0:
            raise _fail("solver", "t_end", f"must exceed t0={self.t0}, got {self.t_end}")
        if self.frame not in (Frame.LAB.value, Frame.MOVING.value):
            raise _fail("solver", "frame", f"must be 'lab' or 'moving', got {self.frame!r}")
        if self.y_bc not in {b.value for b in YBoundary}:
            raise _fail("solver", "y_bc", f"must be 'neumann' or 'periodic', got {self.y_bc!r}")
        if self.threads < 1:
            raise _fail("solver", "threads", f"must be >= 1, got {self.threads}")
        if self.startup_steps < 0:
            raise _fail("solver", "startup_steps", "must be >= 0")

    def solver_1d(self, grid: Grid1D) -> Solver1DConfig:
        """1D solver settings on ``grid``."""
        return Solver1DConfig(
            grid,
            dt=self.dt,
            t0=self.t0,
            frame=Frame(self.frame),
            startup_steps=self.startup_steps,
            calibrate_speed=self.calibrate_speed,
            checkpoints_per_decade=self.checkpoints_per_decade,
        )

    def solver_2d(self, grid: Grid2D, y_bc: str | None = None) -> Solver2DConfig:
        """2D solver settings on ``grid``."""
        return Solver2DConfig(
            grid,
            dt=self.dt,
            t0=self.t0,
            y_bc=YBoundary(y_bc or self.y_bc),
            threads=self.threads,
            startup_steps=self.startup_steps,
            calibrate_speed=self.calibrate_speed,
            checkpoints_per_decade=self.checkpoints_per_decade,
        )


@dataclass(frozen=True)
class WaveSection:
    half_width: float = 40.0
    step: float = 0.005
    tail_window: tuple[float, float] = (8.0, 12.0)
    corrected: bool = True

    def __post_init__(self):
        if self.half_width < 30:
            raise _fail("wave", "half_width", f"must be >= 30, got {self.half_width}")
        if not 0 < self.step <= 1e-2:
            raise _fail("wave", "step", f"must lie in (0, 0.01], got {self.step}")


@dataclass(frozen=True)
class FrontSection:
    level: float = 0.5
    levels: tuple[float, ...] = (0.3, 0.5, 0.7)
    fit_window: tuple[float, float] = (50.0, 2000.0)
    drift_times: tuple[float, float] = (500.0, 2000.0)
    shape_time: float = 1000.0
    slaving_window: tuple[float, float] = (500.0, 2000.0)
    periodic_times: tuple[float, float] = (1000.0, 2000.0)

    def __post_init__(self):
        for key, level in [("level", self.level), *[("levels", v) for v in self.levels]]:
            if not 0.05 < level < 0.95:
                raise _fail("front", key, f"levels must lie in (0.05, 0.95), got {level}")
        if not self.fit_window[0] < self.fit_window[1]:
            raise _fail("front", "fit_window", f"must be increasing, got {list(self.fit_window)}")
        if not 0 < self.periodic_times[0] < self.periodic_times[1]:
            raise _fail("front", "periodic_times", f"must be positive and increasing, got {list(self.periodic_times)}")


@dataclass(frozen=True)
class ScenarioSection:
    kind: str = "heaviside"
    x1: float = 0.0
    x2: float = -1.0
    blend: str = "sharp"
    ripple: float = 0.0
    ripple_width: float = 4.0
    plus: tuple[float, float] = (0.0, 0.0)
    minus: tuple[float, float] = (-1.0, -1.0)
    width: float = 10.0
    amplitude: float = 0.5
    period: float = 20.0
    bump_shift: float = 1.0
    bump_width: float = 20.0
    sequence: str = "desk"
    ratio: float = 6.0
    n_edges: int = 3
    factorial_n: int = 8
    contrast: float = 4.0
    lambda_amp: float | None = None
    y_extent: tuple[float, float] | None = None

    def __post_init__(self):
        kinds = {*DATUM_KINDS, *(k.value for k in ScenarioKind)}
        if self.kind not in kinds:
            raise _fail("scenario", "kind", f"must be one of {sorted(kinds)}, got {self.kind!r}")
        if self.sequence not in ("desk", "factorial"):
            raise _fail("scenario", "sequence", f"must be 'desk' or 'factorial', got {self.sequence!r}")
        if self.x2 > self.x1:
            raise _fail("scenario", "x2", f"must not exceed x1={self.x1}, got {self.x2}")

    @property
    def is_2d(self) -> bool:
        """Whether the scenario needs the 2D solver."""
        return self.kind not in DATUM_KINDS

    def datum_1d(self) -> StepDatum:
        """1D datum; ``exp_step`` uses ``(x2, x1)``, ``heaviside`` sits at ``x1``."""
        if self.kind == "exp_step":
            return exp_step(self.x2, self.x1)
        return heaviside(self.x1)

    def limit_data(self) -> tuple[StepDatum, StepDatum]:
        """1D data reached as ``y -> +inf`` and ``y -> -inf``; each pair is ``(x1, x2)``."""
        return tuple(heaviside(x1) if x1 == x2 else exp_step(x2, x1) for x1, x2 in (self.plus, self.minus))

    def oscillation_sequence(self) -> OscillationSequence:
        """Desk surrogate or the factorial sequence."""
        if self.sequence == "factorial":
            seq = OscillationSequence.factorial(self.factorial_n, self.contrast)
        else:
            seq = OscillationSequence.desk(self.ratio, self.n_edges, self.contrast)
        if self.lambda_amp is None:
            return seq
        return OscillationSequence(seq.xs, seq.ts, seq.contrast, self.lambda_amp, seq.label)

    def build(self) -> Scenario:
        """The 2D scenario this section describes."""
        kind = ScenarioKind(self.kind)
        extent = {"y_extent": self.y_extent} if self.y_extent is not None else {}
        if kind is ScenarioKind.HEAVISIDE_TRAPPED:
            return make_heaviside_trapped(
                self.x1, self.x2, self.blend, ripple=self.ripple, ripple_width=self.ripple_width, **extent
            )
        if kind is ScenarioKind.TWO_LIMIT:
            return make_two_limit(*self.limit_data(), self.width, **extent)
        if kind in (ScenarioKind.PERIODIC_Y, ScenarioKind.ASYMPT_PERIODIC_Y):
            return make_periodic_y(
                heaviside(0.0),
                self.amplitude,
                self.period,
                kind is ScenarioKind.ASYMPT_PERIODIC_Y,
                bump_shift=self.bump_shift,
                bump_width=self.bump_width,
                y_extent=self.y_extent,
            )
        scenario, _ = make_oscillating(self.oscillation_sequence())
        if self.y_extent is not None:
            scenario = dataclasses.replace(scenario, y_extent=self.y_extent)
        return scenario


@dataclass(frozen=True)
class HeatSection:
    breakpoints: tuple[float, ...] = (-5.0, 5.0)
    values: tuple[float, ...] = (1.0, 2.0, 1.0)
    y_min: float = -100.0
    y_max: float = 100.0
    h: float = 0.05
    dt: float = 0.01
    t_end: float = 100.0
    factorial_n: int = 10**7
    factorial_small: int = 8

    def __post_init__(self):
        if len(self.values) != len(self.breakpoints) + 1:
            raise _fail("heat", "values", f"needs {len(self.breakpoints) + 1} entries, got {len(self.values)}")
        if self.t_end <= 1:
            raise _fail("heat", "t_end", f"the heat clock starts at 1, got {self.t_end}")
        if self.factorial_n < 2:
            raise _fail("heat", "factorial_n", f"must be >= 2, got {self.factorial_n}")

    def datum(self) -> PiecewiseConstant:
        """Piecewise-constant start value."""
        return PiecewiseConstant(list(self.breakpoints), list(self.values))

    def grid(self) -> Grid1D:
        """Transverse grid of the heat check."""
        return Grid1D.from_spacing(self.y_min, self.y_max, self.h)


@dataclass(frozen=True)
class DirichletSection:
    epsilons: tuple[float, ...] = (0.05, 0.1, 0.2)
    lam: float = 0.4
    c0: float = 1.0
    tau_end: float = 8.0
    xi_max: float = 12.0
    xi_step: float = 0.05
    y_min: float = -40.0
    y_max: float = 40.0
    hy: float = 0.25
    dt: float = 0.01
    stiff_ratio: float = 0.0
    spectral_fallback: bool = True
    eps_max: float = 0.2
    record_every: int = 10
    decay_tau: float = 6.0
    decay_epsilon: float = 0.2
    zeta_max: float = 12.0
    zeta_step: float = 0.05
    delta: float = 0.1
    epsilon_slaving: float = 0.1
    heat_epsilon: float = 0.2
    heat_tau: float = 1.0
    heat_hy: float = 0.05
    heat_jump: tuple[float, float] = (1.0, 2.0)

    def __post_init__(self):
        for eps in self.epsilons:
            if not 0 < eps <= self.eps_max:
                raise _fail("dirichlet", "epsilons", f"each epsilon must lie in (0, {self.eps_max}], got {eps}")
        if not 0 < self.heat_epsilon <= self.eps_max:
            raise _fail("dirichlet", "heat_epsilon", f"must lie in (0, {self.eps_max}], got {self.heat_epsilon}")
        if self.heat_tau <= 0 or self.heat_hy <= 0:
            raise _fail("dirichlet", "heat_tau", "heat_tau and heat_hy must be positive")
        if not self.y_min < 0 < self.y_max:
            raise _fail("dirichlet", "y_min", f"the y range must contain 0, got [{self.y_min}, {self.y_max}]")
        if self.lam <= 0:
            raise _fail("dirichlet", "lam", f"must be positive, got {self.lam}")
        if self.xi_max < 8:
            raise _fail("dirichlet", "xi_max", f"must be >= 8, got {self.xi_max}")

    def options(self, hy: float | None = None) -> DirichletOptions:
        """Solver options for :func:`frontlab.diffusive.run_dirichlet`, optionally on a finer ``y`` grid."""
        return DirichletOptions(
            xi_max=self.xi_max,
            xi_step=self.xi_step,
            y_grid=Grid1D.from_spacing(self.y_min, self.y_max, hy or self.hy),
            dt=self.dt,
            stiff_ratio=self.stiff_ratio,
            spectral_fallback=self.spectral_fallback,
            eps_max=self.eps_max,
            record_every=self.record_every,
        )


@dataclass(frozen=True)
class GatesSection:
    wave_residual: float = 1e-6
    tail_deviation: float = 1e-2
    slope_min: float = -1.65
    slope_max: float = -1.35
    drift: float = 0.1
    shape: float = 0.02
    sandwich: float = 1e-8
    heat: float = 1e-6
    spectral: float = 1e-8
    rayleigh: float = 0.99
    beta_scaled: float = 10.0
    beta_spread: float = 3.0
    r_envelope: float = 10.0
    slaving_alpha: float = 1e-6
    decay_fraction: float = 0.1
    decay_envelope: float = 2.0
    energy_slack: float = 0.05
    slaving_front: float = 0.1
    merge: float = 0.1
    periodic_oscillation: float = 0.05
    periodic_drift: float = 0.05
    oscillation_match: float = 0.15
    oscillation_gap: float = 0.5
    desk_contrast: float = 0.35
    factorial: float = 0.05


@dataclass(frozen=True)
class SuiteSection:
    members: tuple[str, ...] = ()


SECTIONS: dict[str, type] = {
    "grid": GridSection,
    "solver": SolverSection,
    "wave": WaveSection,
    "front": FrontSection,
    "scenario": ScenarioSection,
    "heat": HeatSection,
    "dirichlet": DirichletSection,
    "gates": GatesSection,
    "suite": SuiteSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    pipeline: str
    name: str = ""
    grid: GridSection = field(default_factory=GridSection)
    solver: SolverSection = field(default_factory=SolverSection)
    wave: WaveSection = field(default_factory=WaveSection)
    front: FrontSection = field(default_factory=FrontSection)
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    heat: HeatSection = field(default_factory=HeatSection)
    dirichlet: DirichletSection = field(default_factory=DirichletSection)
    gates: GatesSection = field(default_factory=GatesSection)
    suite: SuiteSection = field(default_factory=SuiteSection)
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"must be one of {list(PIPELINES)}, got {self.pipeline!r}", key="pipeline")
        if self.pipeline == "run1d" and self.scenario.is_2d:
            raise _fail("scenario", "kind", f"run1d needs one of {list(DATUM_KINDS)}, got {self.scenario.kind!r}")
        if self.pipeline == "run2d" and not self.scenario.is_2d:
            raise _fail("scenario", "kind", f"run2d needs a 2D scenario, got {self.scenario.kind!r}")
        if self.pipeline in ("run1d", "run2d") and self.solver.frame == Frame.MOVING.value and self.solver.dt > self.grid.hx:
            raise _fail("solver", "dt", f"must not exceed grid.hx={self.grid.hx} in the moving frame, got {self.solver.dt}")
        if self.pipeline == "suite" and not self.suite.members:
            raise _fail("suite", "members", "a suite needs at least one member config")

    def snapshot(self) -> dict[str, Any]:
        """Plain-data copy of every setting (the input of the config hash)."""
        data = dataclasses.asdict(self)
        data.pop("source")
        return data

    def with_threads(self, threads: int) -> ExperimentConfig:
        """Copy with the solver thread count replaced."""
        return dataclasses.replace(self, solver=dataclasses.replace(self.solver, threads=threads))

    def member_paths(self) -> list[Path]:
        """Suite members resolved against the directory of this file."""
        base = Path(self.source).parent if self.source else Path.cwd()
        return [base / member for member in self.suite.members]


def _key_line(text: str, section: str | None, key: str) -> int | None:
    """1-based line of ``key`` inside ``[section]`` (top level when ``section`` is None)."""
    current = None
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        header = re.match(r"^\[\s*([A-Za-z0-9_.-]+)\s*\]", line)
        if header:
            current = header.group(1)
            if section is not None and current == section and key == "":
                return number
            continue
        if current == section and pattern.match(raw):
            return number
    return None


def _coerce(annotation: str, value: Any, where: str) -> Any:
    optional = "None" in annotation
    base = annotation.replace("| None", "").strip()
    if value is None and optional:
        return None
    if base.startswith("tuple"):
        if not isinstance(value, list):
            raise ConfigError(f"expected an array, got {type(value).__name__}", key=where)
        item = "str" if "str" in base else "float"
        return tuple(_coerce(item, v, where) for v in value)
    if base == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", key=where)
        return value
    if base == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", key=where)
        return value
    if base == "float":
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise ConfigError(f"expected a number, got {value!r}", key=where)
        return float(value)
    if base == "str":
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", key=where)
        return value
    raise ConfigError(f"unsupported setting type {annotation}", key=where)


def _section(name: str, raw: Any) -> Any:
    cls = SECTIONS[name]
    if not isinstance(raw, dict):
        raise ConfigError("expected a table", key=name)
    known = {f.name: f for f in dataclasses.fields(cls)}
    values = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError("unknown key", key=f"{name}.{key}")
        values[key] = _coerce(str(known[key].type), value, f"{name}.{key}")
    return cls(**values)


def _with_location(error: ConfigError, text: str, source: str | None) -> ConfigError:
    line = error.line
    if line is None and error.key:
        section, _, key = error.key.rpartition(".")
        line = _key_line(text, section or None, key)
        if line is None and not section:
            line = _key_line(text, key, "")
    return ConfigError(error.message, error.key, line, source)


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from TOML text.

    Raises:
        ConfigError: Malformed TOML, unknown sections or keys, or a violated constraint.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        line = getattr(err, "lineno", None)
        if line is None:
            found = re.search(r"line (\d+)", str(err))
            line = int(found.group(1)) if found else None
        raise ConfigError(f"invalid TOML: {err}", line=line, source=source) from err
    try:
        top = {key: raw.pop(key) for key in ("pipeline", "name") if key in raw}
        if "pipeline" not in top:
            raise ConfigError("missing top-level key", key="pipeline")
        for key in ("pipeline", "name"):
            if key in top and not isinstance(top[key], str):
                raise ConfigError("expected a string", key=key)
        sections = {}
        for name, value in raw.items():
            if name not in SECTIONS:
                raise ConfigError("unknown section", key=name)
            sections[name] = _section(name, value)
        return ExperimentConfig(top["pipeline"], top.get("name", ""), **sections, source=source)
    except ConfigError as err:
        raise _with_location(err, text, source) from None


def load_config(path: Path | str) -> ExperimentConfig:
    """Read and validate a configuration file.

    Raises:
        ConfigError: The file cannot be read or does not validate.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err.strerror}", source=str(path)) from err
    return parse_config(text, str(path))
