"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class BnpsError(Exception):
    exit_code = 1


class DataError(BnpsError, ValueError):
    """Malformed input data, schema mismatch, invalid identifiers."""

    exit_code = 3


class NumericError(BnpsError, ArithmeticError):
    """A numerical procedure could not produce a finite answer."""

    exit_code = 4


class DegenerateArmError(NumericError):
    pass


class SeparationError(NumericError):
    pass
