"""Exception hierarchy shared by all modules."""


class FloquetRDError(Exception):
    """Base class for all toolkit errors."""


class NonConvergence(FloquetRDError):
    pass


class DegenerateOrbit(FloquetRDError):
    pass


class IntegratorFailure(FloquetRDError):
    pass


class NonSimpleNeutralMode(FloquetRDError):
    pass


class InsufficientPoints(FloquetRDError):
    pass


class GridTooCoarse(FloquetRDError):
    pass


class PerturbationTooWide(FloquetRDError):
    pass


class BlowUp(FloquetRDError):
    """Raised when the field leaves the bounded region; carries the failure time."""

    def __init__(self, t, message=None):
        self.t = float(t)
        super().__init__(message or f"solution blew up at t = {self.t:.6g}")


class OutOfTube(FloquetRDError):
    pass


class EmptyWindow(FloquetRDError):
    pass


class UnderResolved(FloquetRDError):
    pass


class ConfigError(FloquetRDError):
    """Configuration problem, optionally pinned to a line of the source file."""

    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
