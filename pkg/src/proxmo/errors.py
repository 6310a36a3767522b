"""Exception hierarchy shared across the package."""


class ProxmoError(Exception):
    """Base class for all package errors."""


class InvalidInput(ProxmoError, ValueError):
    """A precondition on an argument was violated."""


class NonBinaryReward(InvalidInput):
    pass


class GroupTooSmall(InvalidInput):
    pass


class DegenerateRate(InvalidInput):
    pass


class EmptyCorpus(InvalidInput):
    pass


class EmptyCandidateSet(InvalidInput):
    pass


class ShapeMismatch(InvalidInput):
    pass


class LengthMismatch(InvalidInput):
    pass


class StaleSnapshot(ProxmoError):
    """Stored behavior data no longer agrees with the policy snapshot."""


class NoAdmissibleActions(InvalidInput):
    pass


class InvalidAction(InvalidInput):
    pass


class EpisodeFinished(ProxmoError):
    pass


class InvalidConfig(InvalidInput):
    pass


class NumericalDivergence(ProxmoError, FloatingPointError):
    """Raised when the objective or its gradient becomes non-finite."""
