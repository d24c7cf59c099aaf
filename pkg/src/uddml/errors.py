"""Exception types shared across the package.

The CLI maps these onto exit codes: InvalidInputError -> 2 (schema/usage),
PreconditionError -> 3 (statistical precondition), anything else -> 4.
"""


class UddmlError(Exception):
    """Base class for package errors."""


class InvalidInputError(UddmlError):
    """Malformed input: wrong shapes, non-finite values, bad schema."""


class PreconditionError(UddmlError):
    """A statistical precondition fails (arm too small, no admissible
    generator, fold starvation)."""
