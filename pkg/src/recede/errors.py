"""Exception hierarchy shared by every recede module."""


class RecedeError(Exception):
    """Base class for all errors raised by recede."""


class ValidationError(RecedeError, ValueError):
    pass


class ParseError(RecedeError, ValueError):
    """Malformed problem document.

    ``line`` is set for JSON syntax errors, ``field`` for schema errors.
    """

    def __init__(self, message, *, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class DimensionMismatch(RecedeError, ValueError):
    pass


class NonSmoothPoint(RecedeError):
    """Gradient requested on (or within 1e-9 of) a kink."""


class NotConvexSet(RecedeError):
    pass


class MaxIterations(RecedeError):
    pass


class EmptySet(RecedeError):
    pass


class InfeasibleSet(EmptySet):
    pass


class DegenerateCone(RecedeError):
    pass


class SamplingStalled(RecedeError):
    pass


class ConfigError(RecedeError, ValueError):
    pass


class EmptySublevelSet(RecedeError):
    pass


class TooManyConstraints(RecedeError):
    pass


class NonsmoothUnsupported(RecedeError):
    pass


class EmptySolSet(RecedeError):
    pass


class NoFarFeasiblePoints(RecedeError):
    pass


class UnboundedRecordsPresent(RecedeError):
    pass
