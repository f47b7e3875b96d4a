"""Exception types shared across the library."""


class GmsError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(GmsError):
    """Vectors or grids of incompatible dimensionality were combined."""


class DegenerateData(GmsError):
    """Input data has no usable structure (e.g. all rows identical)."""


class NotFitted(GmsError):
    """A model was queried before it was fitted or loaded."""


class FactorizationFailure(GmsError):
    """Covariance factorization failed even after jitter escalation."""


class AllZeroScores(GmsError):
    """A score vector cannot be normalized because it sums to zero."""


class BudgetExhausted(GmsError):
    """Proposal budget ran out before enough samples were accepted.

    Carries the partial result so callers can still inspect what was
    found and at which acceptance rate.
    """

    def __init__(self, message, items, acceptance_rate, hillclimb_invocations):
        super().__init__(message)
        self.items = items
        self.acceptance_rate = acceptance_rate
        self.hillclimb_invocations = hillclimb_invocations
