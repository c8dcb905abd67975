"""Run records, acceptance gates and the on-disk formats they use.

Field dumps are raw little-endian float64 (``<f8``), row-major, with a JSON
sidecar next to them (``<name>.f8`` + ``<name>.json``) holding the shape, grid,
time, frame and whatever the sink was given as ``meta`` (the runner passes the
config hash).
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from .numerics import Field1D, Field2D, Frame, Grid1D, Grid2D

if TYPE_CHECKING:
    from .fronts import FrontTrace

logger = logging.getLogger(__name__)

FIELD_DTYPE = "<f8"


def save_json(path: Path, payload: Any) -> None:
    """Write ``payload`` as indented, key-sorted JSON."""
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, Frame):
        return obj.value
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def config_hash(snapshot: dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a config snapshot."""
    canonical = json.dumps(snapshot, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_field(path: Path, values: np.ndarray, meta: dict[str, Any]) -> Path:
    """Dump ``values`` as ``<f8`` to ``path`` and its metadata to the JSON sidecar."""
    path = Path(path).with_suffix(".f8")
    path.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(values, dtype=FIELD_DTYPE).tofile(path)
    sidecar = {**meta, "shape": list(np.shape(values)), "dtype": FIELD_DTYPE, "order": "C"}
    save_json(path.with_suffix(".json"), sidecar)
    return path


def read_field(path: Path) -> tuple[np.ndarray, dict[str, Any]]:
    """Inverse of :func:`write_field`."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    values = np.fromfile(path, dtype=meta.get("dtype", FIELD_DTYPE)).reshape(meta["shape"])
    return values.astype(np.float64), meta


@dataclass
class Checkpoint:
    """Solution at one checkpoint time, held in memory or dumped to disk."""

    t: float
    values: np.ndarray | None = None
    path: Path | None = None

    @property
    def available(self) -> bool:
        """Whether the samples can be loaded."""
        return self.values is not None or self.path is not None

    def load(self) -> np.ndarray:
        """Samples of this checkpoint."""
        if self.values is not None:
            return self.values
        if self.path is None:
            raise FileNotFoundError(f"checkpoint at t={self.t} was not kept (neither values nor a dump)")
        return read_field(self.path)[0]


@dataclass(frozen=True)
class Gate:
    """One acceptance criterion evaluated on a measured value."""

    name: str
    measured: float
    threshold: float
    comparison: str = "<="

    @property
    def passed(self) -> bool:
        """Whether the measurement satisfies the threshold."""
        if not math.isfinite(self.measured):
            return False
        if self.comparison == "<=":
            return self.measured <= self.threshold
        if self.comparison == ">=":
            return self.measured >= self.threshold
        raise ValueError(f"unknown comparison {self.comparison!r}")

    def to_dict(self) -> dict[str, Any]:
        """JSON-friendly view including the verdict."""
        return {
            "name": self.name,
            "measured": self.measured,
            "threshold": self.threshold,
            "comparison": self.comparison,
            "passed": self.passed,
        }


def check(name: str, measured: float, threshold: float, comparison: str = "<=") -> Gate:
    """Build a :class:`Gate` and log its verdict."""
    gate = Gate(name, float(measured), float(threshold), comparison)
    if gate.passed:
        logger.info("gate %s passed: %.6g %s %.6g", name, gate.measured, comparison, threshold)
    else:
        logger.warning("gate %s FAILED: %.6g not %s %.6g", name, gate.measured, comparison, threshold)
    return gate


@dataclass
class RunRecord:
    kind: str
    grid: Grid1D | Grid2D
    frame: Frame
    checkpoints: list[Checkpoint] = field(default_factory=list)
    front: FrontTrace | None = None
    fits: dict[str, Any] = field(default_factory=dict)
    gates: list[Gate] = field(default_factory=list)
    tables: dict[str, tuple[list[str], np.ndarray]] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)
    scenario: dict[str, Any] | None = None
    provenance: dict[str, Any] = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        """Checkpoint times."""
        return np.array([c.t for c in self.checkpoints])

    @property
    def passed(self) -> bool:
        """True when every gate passed (vacuously for no gates)."""
        return all(g.passed for g in self.gates)

    def field_at(self, index: int) -> Field1D | Field2D:
        """Checkpoint ``index`` wrapped as a field on the record's grid."""
        values = self.checkpoints[index].load()
        if isinstance(self.grid, Grid2D):
            return Field2D(self.grid, values, self.frame)
        return Field1D(self.grid, values, self.frame)

    def add_table(self, name: str, columns: list[str], rows) -> None:
        """Attach a CSV table written by :func:`frontlab.runner.emit_report`."""
        data = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        if data.size and data.shape[1] != len(columns):
            raise ValueError(f"table {name!r} has {data.shape[1]} columns, header names {len(columns)}")
        self.tables[name] = (columns, data)

    def summary(self) -> dict[str, Any]:
        """JSON-friendly summary without the bulk data."""
        return {
            "kind": self.kind,
            "frame": self.frame.value,
            "grid": self.grid.to_dict(),
            "checkpoints": [
                {"t": c.t, "path": str(c.path) if c.path is not None else None} for c in self.checkpoints
            ],
            "fits": self.fits,
            "gates": [g.to_dict() for g in self.gates],
            "scenario": self.scenario,
            "provenance": self.provenance,
        }


class CheckpointSink:
    """Collects checkpoints of a run, in memory or as ``<f8`` dumps under ``directory``.

    Without a directory only the checkpoints accepted by ``keep`` hold their samples;
    the others record the time alone. ``meta`` is merged into every dump sidecar.
    """

    def __init__(
        self,
        grid: Grid1D | Grid2D,
        frame: Frame,
        directory: Path | None = None,
        tag: str = "u",
        *,
        meta: dict[str, Any] | None = None,
        keep: Callable[[float], bool] | None = None,
    ):
        self.grid = grid
        self.frame = frame
        self.directory = Path(directory) if directory is not None else None
        self.tag = tag
        self.meta = dict(meta or {})
        self.keep = keep
        self.checkpoints: list[Checkpoint] = []

    def __call__(self, t: float, state: Field1D | Field2D) -> None:
        """Observer hook: store ``state`` at time ``t``."""
        if self.directory is None:
            kept = self.keep is None or self.keep(t)
            self.checkpoints.append(Checkpoint(t, state.values.copy() if kept else None))
            return
        name = f"{self.tag}_{len(self.checkpoints):04d}"
        meta = {**self.meta, "t": t, "frame": self.frame.value, "grid": self.grid.to_dict()}
        path = write_field(self.directory / name, state.values, meta)
        self.checkpoints.append(Checkpoint(t, None, path))
