"""Exception hierarchy.

The CLI maps each family to a process exit code: input problems exit 2,
analysis problems (not enough data to say anything) exit 3, numeric
failures exit 4.
"""

from __future__ import annotations


class LargeActiveError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1
    kind = "error"


class InputError(LargeActiveError, ValueError):
    exit_code = 2
    kind = "input"


class ParseError(InputError):
    """A document or log stream does not follow its grammar."""

    kind = "parse"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class ValidationError(InputError):
    """Structurally valid input that breaks a model invariant."""

    kind = "validation"

    def __init__(self, violations):
        self.violations = tuple(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class ConfigurationError(InputError):
    kind = "configuration"


class UnknownTargetError(InputError):
    kind = "unknown-target"


class AnalysisError(LargeActiveError):
    """The data does not support the requested analysis."""

    exit_code = 3
    kind = "analysis"


class NumericError(LargeActiveError, ArithmeticError):
    exit_code = 4
    kind = "numeric"

    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual norm {residual:.3e})"
        super().__init__(message)
