"""Exception taxonomy shared by the library and the CLI.

Exit-code mapping used by the CLI: 1 for usage/validation problems,
2 for data/format problems. Solver non-convergence is not an exception
(see solver.RefineResult.converged) and maps to exit code 3.
"""

from __future__ import annotations


class RefineError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 2


class ValidationError(RefineError):
    """A parameter, flag, or config value is outside its allowed range."""

    exit_code = 1


class ShapeError(RefineError):
    """Array dimensions do not match the operation's contract."""


class DataError(RefineError):
    """Array values violate a contract (non-finite, negative, asymmetric)."""


class FormatError(RefineError):
    """Malformed array file. Carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset

    def __str__(self) -> str:
        base = self.args[0] if self.args else ""
        if self.offset is None:
            return base
        return f"{base} (at byte offset {self.offset})"


class UnsupportedDtypeError(FormatError):
    """Array file declares a dtype outside little-endian float32/float64."""


class LengthMismatchError(FormatError):
    """Array file payload is shorter or longer than the header promises."""


class GenerationError(RefineError):
    """Synthetic scenario generation produced a degenerate instance."""


class NumericalError(RefineError):
    """A factorization or solve failed on invariant-violating input."""
