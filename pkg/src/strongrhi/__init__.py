"""Strong A_p weights on non-atomic grid measures."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    DegenerateInputError,
    InputError,
    PreconditionError,
    StrongRHIError,
    UndefinedResultError,
)
from .measure import AxisGrid, GridMeasure, GridRect, Rect, Weight  # noqa: E402
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "AxisGrid",
    "BACKEND",
    "ConvergenceError",
    "DegenerateInputError",
    "GridMeasure",
    "GridRect",
    "InputError",
    "PreconditionError",
    "Rect",
    "StrongRHIError",
    "UndefinedResultError",
    "Weight",
]
