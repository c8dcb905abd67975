"""Exception hierarchy shared by every frontlab module."""

from __future__ import annotations


class FrontlabError(Exception):
    """Base class for all errors raised by frontlab."""


class SingularSystem(FrontlabError):
    def __init__(self, row: int, pivot: float):
        super().__init__(f"tridiagonal pivot {pivot:.3e} at row {row} is below 1e-300")
        self.row = row
        self.pivot = pivot


class NonConvergence(FrontlabError):
    pass


class WindowOutOfRange(FrontlabError, ValueError):
    pass


class CFLViolation(FrontlabError):
    def __init__(self, dt: float, h: float):
        super().__init__(f"dt={dt} exceeds the advective safeguard dt <= h={h}")
        self.dt = dt
        self.h = h


class NoFront(FrontlabError):
    pass


class InsufficientData(FrontlabError):
    pass


class GridMismatch(FrontlabError, ValueError):
    pass


class InvalidField(FrontlabError, ValueError):
    pass


class SandwichViolation(FrontlabError):
    def __init__(self, message: str, violation: float = float("nan")):
        super().__init__(message)
        self.violation = violation


class StiffnessFailure(FrontlabError):
    pass


class WindowEmpty(FrontlabError):
    pass


class ConfigError(FrontlabError, ValueError):
    """Invalid experiment configuration.

    Attributes:
        key: Dotted key that triggered the error (``"solver.dt"``), if known.
        line: 1-based line of that key in the source file, if known.
        source: Path of the configuration file, if known.
    """

    def __init__(
        self,
        message: str,
        key: str | None = None,
        line: int | None = None,
        source: str | None = None,
    ):
        self.message = message
        self.key = key
        self.line = line
        self.source = source
        super().__init__(self._format())

    def _format(self) -> str:
        where = self.source or "<config>"
        if self.line is not None:
            where = f"{where}:{self.line}"
        if self.key:
            return f"{where}: {self.key}: {self.message}"
        return f"{where}: {self.message}"
