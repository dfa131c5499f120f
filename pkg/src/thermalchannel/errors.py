"""Exception types shared by all modules."""


class ThermalChannelError(Exception):
    """Base class. ``record()`` gives a JSON-friendly description."""

    def record(self):
        return {"error": type(self).__name__, "message": str(self)}


class NonHermitian(ThermalChannelError, ValueError):
    pass


class NegativeSpectrum(ThermalChannelError, ValueError):
    pass


class DimMismatch(ThermalChannelError, ValueError):
    pass


class SingularMarginal(ThermalChannelError, RuntimeError):
    pass


class RankDeficientInput(ThermalChannelError, ValueError):
    pass


class EnergyOutOfRange(ThermalChannelError, ValueError):
    pass


class ParamOutOfRange(ThermalChannelError, ValueError):
    pass


class ScaleExceeded(ThermalChannelError, ValueError):
    pass


class Infeasible(ThermalChannelError, RuntimeError):
    pass


class NotConverged(ThermalChannelError, RuntimeError):
    """Raised when an iterative method stops early; ``best`` holds the best result."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
