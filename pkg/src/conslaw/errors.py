"""Exception taxonomy shared by all conslaw modules."""


class ConslawError(Exception):
    """Base class for all conslaw errors."""


class InputError(ConslawError, ValueError):
    """Malformed or out-of-contract argument values."""


class GeometryError(ConslawError):
    """A requested region does not fit inside the available grid."""


class StabilityError(ConslawError):
    """Time step violates the stability (CFL) bound."""


class NumericalError(ConslawError):
    """NaN/Inf or other numerical breakdown detected mid-computation."""


class ConstructionError(ConslawError):
    """A derived object (scaling map, hull, ...) cannot be built."""


class UnsupportedFluxError(ConslawError):
    """Operation requires flux properties the given flux does not have."""


class LevelLostError(ConslawError):
    """Backward characteristic search found no admissible foot point.

    Carries the best near-miss so callers can diagnose whether the
    tolerance was too tight or the level genuinely left the envelope
    interval.
    """

    def __init__(self, message, time=None, best_point=None, best_gap=None):
        super().__init__(message)
        self.time = time
        self.best_point = best_point
        self.best_gap = best_gap
