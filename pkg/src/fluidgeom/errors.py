"""Exception hierarchy shared by all modules."""


class FluidGeomError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(FluidGeomError, ValueError):
    """Input violates a documented precondition."""


class GridMismatch(ValidationError):
    pass


class DegenerateSurface(ValidationError):
    pass


class SingularMetric(ValidationError):
    pass


class NegativeDiscriminant(ValidationError):
    pass


class NonpositiveDensity(ValidationError):
    """Density reached zero or below; ``time`` is when, if known."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class NonpositiveCurvature(ValidationError):
    pass


class CFLViolation(ValidationError):
    pass


class NegativeRadicand(ValidationError):
    pass


class DivisionByZeroForm(ValidationError):
    pass


class DegenerateSymbol(ValidationError):
    pass


class LostSPD(FluidGeomError):
    """Marching produced a non-SPD metric; ``width`` holds the strip reached."""

    def __init__(self, message, width=0.0, metric=None):
        super().__init__(message)
        self.width = width
        self.metric = metric


class ProfileBlowup(FluidGeomError):
    """Shear-profile slope exceeded the blow-up guard.

    ``interval`` is the x2 interval integrated before the guard tripped and
    ``slope`` the last accepted value of f'.
    """

    def __init__(self, message, interval=None, slope=None):
        super().__init__(message)
        self.interval = interval
        self.slope = slope


class OutsideCone(ValidationError):
    pass


class ClosureFailure(FluidGeomError):
    pass


class NonOrthonormalFrame(ValidationError):
    pass


class RankCondition(FluidGeomError):
    pass


class AmplitudeOverflow(FluidGeomError):
    pass


class KernelWiderThanGrid(ValidationError):
    pass


class StageStall(FluidGeomError):
    def __init__(self, message, stage=0, partial=None):
        super().__init__(message)
        self.stage = stage
        self.partial = partial


class BudgetExceeded(ValidationError):
    """The frequency schedule exceeds what the grid can resolve.

    ``stage`` is the stage index reached and ``partial`` the map and diagnostics
    produced before the run stopped (``None`` if nothing ran).
    """

    def __init__(self, message, stage=0, partial=None):
        super().__init__(message)
        self.stage = stage
        self.partial = partial


class UnknownKey(ValidationError):
    pass


class TypeMismatch(ValidationError):
    pass


class MissingRequired(ValidationError):
    pass


class IoError(FluidGeomError, OSError):
    pass
