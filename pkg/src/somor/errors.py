"""Exception types raised across the package."""


class SomorError(Exception):
    """Base class for all package errors."""

    code = "Error"


class PoleAtFrequency(SomorError):
    code = "PoleAtFrequency"


class DimensionMismatch(SomorError, ValueError):
    code = "DimensionMismatch"


class SingularOperator(SomorError):
    code = "SingularOperator"

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class UnsupportedSpec(SomorError, ValueError):
    code = "UnsupportedSpec"


class RankDeficient(SomorError):
    code = "RankDeficient"


class UnstablePencil(SomorError):
    code = "UnstablePencil"


class SingularE(SomorError):
    code = "SingularE"


class Breakdown(SomorError):
    code = "Breakdown"


class SingularShift(SomorError):
    code = "SingularShift"


class MissingRealization(SomorError, KeyError):
    code = "MissingRealization"

    def __str__(self):
        return Exception.__str__(self)


class NotConstantCoefficient(SomorError):
    code = "NotConstantCoefficient"


class SingularCoupling(SomorError):
    code = "SingularCoupling"


class Exhausted(SomorError):
    """All candidate blocks were used before the target order was reached.

    The partial selection is attached as ``result`` so callers can still
    use the recorded history.
    """

    code = "Exhausted"

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ZeroReference(SomorError, ZeroDivisionError):
    code = "ZeroReference"


class EmptyCurve(SomorError, ValueError):
    code = "EmptyCurve"


class NotApplicable(SomorError):
    code = "NotApplicable"

    def __init__(self, message, reason="NotApplicable"):
        super().__init__(message)
        self.reason = reason
