"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class HiertreeError(Exception):
    exit_code = 1


class ValidationError(HiertreeError, ValueError):
    """Malformed input, bad arguments, or a violated data invariant."""

    exit_code = 2


class DegenerateInputError(HiertreeError, ArithmeticError):
    """Input is well-formed but numerically unusable (zero marginals, flat lift range, NaN)."""

    exit_code = 4
