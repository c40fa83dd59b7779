"""Exception hierarchy shared by every rvstar module."""

from __future__ import annotations


class RVStarError(Exception):
    """Base class for all errors raised by rvstar."""


class InvalidParameter(RVStarError, ValueError):
    pass


class ShapeMismatch(RVStarError, ValueError):
    pass


class OriginPoint(RVStarError, ValueError):
    """The polar map is undefined at the origin."""


class BracketFailure(RVStarError, RuntimeError):
    """No finite bracket for a monotone root search inside the allowed range."""


class NoClosedForm(RVStarError, NotImplementedError):
    pass


class ContractViolation(RVStarError, ValueError):
    """A user-supplied test function broke its declared contract."""


class SupportViolation(ContractViolation):
    """A test function is nonzero inside the neighbourhood where it must vanish."""


class NoExceedances(RVStarError, ValueError):
    """The threshold is too high for the sample."""


class InsufficientData(RVStarError, ValueError):
    pass


class NonPositiveThreshold(RVStarError, ValueError):
    pass


class ConfigError(RVStarError):
    """Bad experiment configuration; ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(field)
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class TaskError(RVStarError):
    def __init__(self, task: str, cause: BaseException):
        self.task = task
        self.cause = cause
        super().__init__(f"task {task!r} failed: {cause}")


class ParseError(RVStarError, ValueError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


class UnknownSuite(RVStarError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else "unknown suite"
