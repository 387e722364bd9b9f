"""Exception types shared across the package."""


class ConeUndefined(ValueError):
    """A cone-angle formula produced a sine larger than 1.

    The enclosing-ball construction is vacuous in this regime (the ball
    diameter exceeds the separation), so no cone guarantee exists.
    """


class GuaranteeVacuous(ValueError):
    """A guarantee function evaluated to a non-positive budget.

    The cone is too wide for the requested distortion at this (N, M); the
    implication it encodes is true but uninformative.
    """


class NumericalBreakdown(RuntimeError):
    """A matrix factorization failed beyond the allowed jitter escalation."""


class Unachievable(RuntimeError):
    """The empirical quantile stays above the target even at the largest M."""


class RankDeficient(ValueError):
    """Design matrix for a fit does not have full column rank."""
