"""Exception hierarchy shared by all modules."""


class VflError(Exception):
    """Base class for computational failures (CLI exit code 1)."""


class PreconditionError(VflError, ValueError):
    pass


class NonAdmissibleTau(VflError):
    pass


class NewtonDivergence(VflError):
    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class InsufficientAnnulus(VflError):
    pass


class CGStall(VflError):
    pass


class DriftExceeded(VflError):
    pass


class MatchingDegenerate(VflError):
    pass


class DegreeMismatch(VflError):
    pass


class NotUnipotent(VflError):
    pass


class NonUnit(VflError):
    pass


class GradingMismatch(VflError):
    pass


class NonPositiveValuation(VflError):
    pass


class ConstraintViolated(VflError):
    pass


class CutoffTooSmall(VflError):
    pass
