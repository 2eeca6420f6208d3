"""Exception types shared across the package."""


class ContestError(Exception):
    """Base class for all domain errors raised by this package."""


class NonMonotoneReward(ContestError):
    """Reward vector is not nonincreasing in rank or has negative entries."""


class DegenerateReward(ContestError):
    """All ranks pay the same reward; the game has no content."""


class DriftTooLarge(ContestError):
    """Drift meets or exceeds the threshold above which the support diverges."""


class DimensionMismatch(ContestError):
    """Operands have incompatible player counts."""


class OutOfRange(ContestError):
    """Argument outside the domain of the requested evaluator."""


class InvalidDistribution(ContestError):
    """Discrete distribution violates its invariants."""


class IdenticalSchemes(ContestError):
    """Comparison requires two distinct reward schemes."""


class NoFeasibleScheme(ContestError):
    """No candidate scheme satisfies the drift bound."""


class StepTooCoarse(ContestError):
    """Euler time step too large relative to the support width."""
