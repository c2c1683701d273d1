"""Exception taxonomy shared by every module.

The CLI maps these onto process exit codes: usage/config problems exit 1,
bad data exits 2, numerical failures exit 3.
"""


class GradcoordError(Exception):
    """Base class for all library errors."""


class ArgumentError(GradcoordError):
    """Caller passed inconsistent shapes, invalid options, or bad config."""

    exit_code = 1


class DataError(GradcoordError):
    """Input data violates a contract (non-finite entries, empty sets, ...)."""

    exit_code = 2


class DegenerateInputError(DataError):
    """An input is degenerate where the operation is undefined (zero vector)."""


class NumericalError(GradcoordError):
    """A numerical routine failed or produced a non-finite result."""

    exit_code = 3


class SymmetryError(ArgumentError):
    """Matrix expected to be symmetric is not, beyond tolerance."""


class FactorizationError(NumericalError):
    """Matrix factorization failed (e.g. Cholesky on an indefinite matrix)."""


class StabilityError(ArgumentError):
    """Linear-system spec violates its stability precondition."""


class SingularityError(NumericalError):
    """A denominator that must be nonzero vanished."""


def exit_code_for(exc: BaseException) -> int:
    """Exit code for an exception per the CLI contract (unknown -> 1)."""
    return getattr(exc, "exit_code", 1)
