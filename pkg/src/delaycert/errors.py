"""Exception hierarchy.

Every error raised on purpose by the package derives from ``DelayCertError`` so
callers (the CLI in particular) can map failures to exit codes.
"""


class DelayCertError(Exception):
    pass


class StructuralError(DelayCertError, ValueError):
    """Shapes, dimensions or basic invariants do not line up."""


class ConfigurationError(DelayCertError, ValueError):
    """A model, channel or run configuration is invalid."""


class HistoryRangeError(DelayCertError, ValueError):
    def __init__(self, s, domain, channel=None):
        self.s = s
        self.domain = domain
        self.channel = channel
        where = f"channel {channel}" if channel is not None else "history"
        super().__init__(f"{where}: s={s!r} outside history domain [{domain[0]!r}, {domain[1]!r}]")


class NumericOverflowError(DelayCertError, ArithmeticError):
    pass


class CertificateInvalidError(DelayCertError):
    def __init__(self, message, worst_t=None, worst_ratio=None):
        self.worst_t = worst_t
        self.worst_ratio = worst_ratio
        super().__init__(message)


class InversionError(DelayCertError):
    pass


class ToleranceNotMetError(DelayCertError):
    pass


class NonConvergenceError(DelayCertError):
    def __init__(self, message, residuals):
        self.residuals = list(residuals)
        super().__init__(message)


class DelayTooSmallError(DelayCertError):
    pass


class MisuseError(DelayCertError):
    pass


class DegenerateFitError(DelayCertError):
    pass
