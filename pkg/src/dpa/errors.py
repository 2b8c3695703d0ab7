"""Exception hierarchy shared by the analyzer."""

from __future__ import annotations


class DpaError(Exception):
    """Base class for every error raised by this package."""


class MalformedConstraint(DpaError, ValueError):
    """A constraint mentions a variable the polytope does not know."""


class NonIntegrable(DpaError, ArithmeticError):
    """A variable is unbounded on a piece that carries nonzero density."""


class InvalidSupport(DpaError, ValueError):
    """A uniform factor was requested with lo >= hi."""


class ModelError(DpaError):
    """Model text failed to parse or validate.

    ``path`` locates the offending element (``processes[1].steps[0].hi``);
    ``line``/``column`` are set for syntax errors.
    """

    def __init__(self, message: str, path: str | None = None,
                 line: int | None = None, column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        where = []
        if path:
            where.append(path)
        if line is not None:
            where.append(f"line {line}, column {column}")
        super().__init__(f"{'; '.join(where)}: {message}" if where else message)


class AnalysisError(DpaError):
    """Raised while exploring a model: scheduler deadlock, resource overflow."""


class DeadlockError(AnalysisError):
    pass


class ResourceViolation(AnalysisError):
    pass


class UnsupportedQuery(DpaError):
    pass


class UnknownHistory(DpaError, KeyError):
    pass


class UnknownEvent(DpaError, KeyError):
    pass
