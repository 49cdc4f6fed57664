"""Exception hierarchy shared by all stages.

Each class carries the process exit code the command line maps it to.
"""


class UltrasegError(Exception):
    exit_code = 1


class ValidationError(UltrasegError, ValueError):
    """Bad arguments or inconsistent configuration."""

    exit_code = 2


class DataError(UltrasegError, ValueError):
    """Input data violates a format or content invariant."""

    exit_code = 3


class NumericalError(UltrasegError, ArithmeticError):
    exit_code = 4
