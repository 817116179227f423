"""Exception types raised across the toolkit."""


class BubblingError(Exception):
    """Base class for toolkit errors."""


class DomainError(BubblingError, ValueError):
    """Parameters outside the admissible range (n >= 3, 0 < gamma < 1, ...)."""


class PoleSingularity(BubblingError, ValueError):
    pass


class NonFiniteSample(BubblingError, FloatingPointError):
    pass


class QuadratureUnderResolved(BubblingError):
    pass


class TruncationError(BubblingError):
    pass


class CalibrationFailure(BubblingError):
    pass


class ConvergenceFailure(BubblingError):
    pass


class ExpressionSyntaxError(BubblingError, SyntaxError):
    """Malformed curvature expression; ``position`` is the 0-based offset."""

    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ArityError(BubblingError, ValueError):
    pass


class PositivityViolation(BubblingError, ValueError):
    def __init__(self, message, witness=None, value=None):
        super().__init__(message)
        self.witness = witness
        self.value = value


class DegenerateCritical(BubblingError):
    """A critical point with a (near) zero Hessian eigenvalue: (nd) fails."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class LaplacianDegenerate(DegenerateCritical):
    """A critical point where the Laplacian of K (nearly) vanishes."""


class CombinatorialOverflow(BubblingError):
    pass


class AmbiguousMatch(BubblingError):
    pass


class StepFailure(BubblingError):
    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class StepTooLarge(BubblingError):
    pass


class ConfigError(BubblingError, ValueError):
    pass
