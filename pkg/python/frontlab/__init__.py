"""Fisher-KPP front propagation: solvers, front tracking and the experiments that gate them."""

from .errors import (
    CFLViolation,
    ConfigError,
    FrontlabError,
    GridMismatch,
    InsufficientData,
    InvalidField,
    NoFront,
    NonConvergence,
    SandwichViolation,
    SingularSystem,
    StiffnessFailure,
    WindowEmpty,
    WindowOutOfRange,
)
from .numerics import Field1D, Field2D, Frame, Grid1D, Grid2D

__version__ = "0.1.0"

__all__ = [
    "CFLViolation",
    "ConfigError",
    "Field1D",
    "Field2D",
    "Frame",
    "FrontlabError",
    "Grid1D",
    "Grid2D",
    "GridMismatch",
    "InsufficientData",
    "InvalidField",
    "NoFront",
    "NonConvergence",
    "SandwichViolation",
    "SingularSystem",
    "StiffnessFailure",
    "WindowEmpty",
    "WindowOutOfRange",
    "__version__",
]
