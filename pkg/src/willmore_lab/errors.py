"""Exception hierarchy shared by all modules.

The command line maps these onto exit codes: validation problems give 1,
numerical nonconvergence gives 2 (see ``willmore_lab.cli``).
"""


class WillmoreLabError(Exception):
    """Base class for every error raised by the package."""


# arithmetic -----------------------------------------------------------------

class PoleEvaluation(WillmoreLabError, ZeroDivisionError):
    """A rational function was evaluated at (or numerically at) a pole."""


class IllConditioned(WillmoreLabError):
    """Root clusters could not be separated or certified at working precision."""


# validation failures ----------------------------------------------------------

class ValidationFailure(WillmoreLabError):
    """Null-curve data violates one of the planar-end invariants."""


class NullIdentityViolation(ValidationFailure):
    pass


class LogEndDetected(ValidationFailure):
    pass


class BranchPointDetected(ValidationFailure):
    pass


class WrongPoleOrder(ValidationFailure):
    pass


class FlatSurface(ValidationFailure):
    """Constant Gauss map: the data describes a plane."""


class DegenerateEnd(ValidationFailure):
    pass


class NotComplexOrthogonal(ValidationFailure):
    pass


class OriginOnSurface(ValidationFailure):
    pass


class OverlappingEndDisks(ValidationFailure):
    pass


class UnequalEndValues(ValidationFailure):
    pass


class EndValueDegenerate(ValidationFailure):
    pass


class SymmetryMismatch(ValidationFailure):
    pass


class NotSpiny(ValidationFailure):
    pass


class PathThroughPole(ValidationFailure):
    pass


class FormatError(ValidationFailure):
    """Malformed or unsupported surface data file."""


# numerical nonconvergence -------------------------------------------------------

class NumericalFailure(WillmoreLabError):
    pass


class SolveFailure(NumericalFailure):
    pass


class QuadratureNonconvergence(NumericalFailure):
    pass


class ExtrapolationDivergence(NumericalFailure):
    pass


class NonconvergentEntry(NumericalFailure):
    pass


class EigenFailure(NumericalFailure):
    pass
