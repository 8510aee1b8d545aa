"""Exception hierarchy shared by all modules."""


class DwschedError(Exception):
    """Base class for every error raised by this package."""


class CyclicGraph(DwschedError):
    pass


class ShapeMismatch(DwschedError):
    """Schedule, assignment or order input does not cover the instance exactly."""


class InconsistentOrder(DwschedError):
    """Precedence plus resource sequencing contains a cycle."""


class InfeasibleSchedule(DwschedError):
    def __init__(self, report):
        super().__init__("schedule is infeasible: " + "; ".join(f"{c}: {d}" for c, d in report.violations[:5]))
        self.report = report


class HorizonTooSmall(DwschedError):
    pass


class MultipleStarts(DwschedError):
    pass


class SinkFailure(DwschedError):
    pass


class InfeasibleWarmStart(DwschedError):
    pass


class TooLarge(DwschedError):
    pass


class InvalidParams(DwschedError):
    pass


class ParseError(DwschedError):
    """Malformed document. ``code`` is e.g. ``MISSING_FIELD`` or ``BAD_VALUE``."""

    def __init__(self, message, code="MALFORMED", line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        text = f"{code}: {message}"
        super().__init__(f"{text} ({', '.join(where)})" if where else text)
        self.code = code
        self.line = line
        self.field = field


class ValidationFailed(DwschedError):
    def __init__(self, report):
        super().__init__("invalid instance: " + "; ".join(f"{c}: {m}" for c, m in report.violations))
        self.report = report
