"""Exception hierarchy."""


class WgqedError(Exception):
    """Base class for all package errors."""


class OutOfBandError(WgqedError, ValueError):
    """Energy lies at or beyond a band edge where the quantity is undefined."""


class BranchCutError(WgqedError, ValueError):
    """Green's function requested on its branch cut."""


class InitialStateError(WgqedError, ValueError):
    """Unsupported initial excitation pattern."""


class HorizonError(WgqedError):
    """Requested time exceeds the reflection-free window of the finite chain."""


class IntegratorError(WgqedError):
    """Norm drift exceeded the integrator's declared tolerance."""


class SymmetryViolationError(WgqedError):
    """Emitters with identical roles developed different amplitudes."""


class QuadratureError(WgqedError):
    """Branch-cut integrand failed its magnitude guard."""


class ParseError(WgqedError, ValueError):
    """Scenario document is malformed; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)
