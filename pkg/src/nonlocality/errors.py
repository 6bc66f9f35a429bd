"""Exception hierarchy shared by all modules."""


class NonlocalityError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(NonlocalityError, ValueError):
    pass


class NotHermitian(NonlocalityError, ValueError):
    pass


class NotNormalized(NonlocalityError, ValueError):
    pass


class NotOrthonormal(NonlocalityError, ValueError):
    pass


class NotMaximallyEntangled(NonlocalityError, ValueError):
    pass


class ZeroProbabilityOutcome(NonlocalityError, ValueError):
    pass


class EigenvalueNotInSpectrum(NonlocalityError, ValueError):
    pass


class InvalidRaySet(NonlocalityError, ValueError):
    pass


class InvalidSquare(NonlocalityError, ValueError):
    pass


class InconsistentState(NonlocalityError, ValueError):
    pass


class StepTooLarge(NonlocalityError, ValueError):
    pass


class StartOnNode(NonlocalityError, ValueError):
    """Raised when a trajectory would start on the nodal line z = 0."""
