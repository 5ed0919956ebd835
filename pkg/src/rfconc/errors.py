"""Exception hierarchy. Every error raised on purpose derives from RFConcError."""


class RFConcError(Exception):
    """Base class for library errors (CLI maps these to exit code 2)."""


class DimensionMismatch(RFConcError, ValueError):
    pass


# hermite
class QuadratureNotConverged(RFConcError):
    pass


class UnboundedActivation(RFConcError):
    pass


class NegativeTail(RFConcError):
    pass


# dataset
class DegenerateDraw(RFConcError):
    pass


class ParseError(RFConcError, ValueError):
    pass


class ZeroNormSample(RFConcError, ValueError):
    def __init__(self, row):
        super().__init__(f"sample in row {row} has (near) zero norm and cannot be normalized")
        self.row = row


class NotUnitNorm(RFConcError, ValueError):
    pass


class AngleTooLarge(RFConcError):
    pass


class NoAdmissibleEll(RFConcError):
    pass


# kernel
class TailNotConvergent(RFConcError):
    pass


class NotPositiveDefinite(RFConcError):
    pass


# ridge
class SingularSystem(RFConcError):
    pass


class ZeroDiagonal(RFConcError):
    pass


class LambdaZero(RFConcError, ValueError):
    pass


# experiment
class InsufficientData(RFConcError):
    pass


class NonPositiveDiff(RFConcError):
    pass


class ConfigError(RFConcError):
    """Aggregated configuration problems; ``errors`` holds one message per issue."""

    def __init__(self, errors, path=None):
        self.errors = list(errors)
        self.path = path
        head = f"{path}: " if path else ""
        super().__init__(head + "; ".join(self.errors))
