"""Exception hierarchy shared across the package."""


class SparseTuneError(Exception):
    """Base class for all errors raised by sparsetune."""


class DimensionError(SparseTuneError, ValueError):
    """Array shapes or counts are inconsistent."""


class EnsembleConstraintError(SparseTuneError, ValueError):
    """A matrix ensemble cannot be built at the requested size."""


class RankError(SparseTuneError, ArithmeticError):
    """A column-restricted least-squares system is numerically singular."""

    def __init__(self, message, support_size=None, iteration=None):
        super().__init__(message)
        self.support_size = support_size
        self.iteration = iteration


class DivergenceError(SparseTuneError, ArithmeticError):
    """A solver iterate became non-finite."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class DegenerateThresholdError(SparseTuneError, ValueError):
    """An order-statistic threshold would keep every entry (or none)."""


class ConfigError(SparseTuneError, ValueError):
    """An experiment or solver configuration is invalid."""

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems or [])


class NormalizationError(SparseTuneError, ValueError):
    """The sensing matrix does not have unit-norm columns."""


class EstimateUndefinedError(SparseTuneError):
    """Transition data is all-success or all-failure; widen the rho grid."""


class TuningFailedError(SparseTuneError):
    """Every candidate configuration produced an undefined transition."""
