"""Exception hierarchy shared across the package."""


class BehestError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatchError(BehestError):
    pass


class NonFinitePayoffError(BehestError):
    pass


class SymmetryViolationError(BehestError):
    pass


class InvalidRangeError(BehestError):
    pass


class NonPositiveValueError(BehestError):
    pass


class DimensionMismatchError(BehestError):
    pass


class InvalidStrategyError(BehestError):
    pass


class InvalidWeightsError(BehestError):
    pass


class NegativeTauError(BehestError):
    pass


class InvalidSpecError(BehestError):
    pass


class MissingEmpiricalError(BehestError):
    pass


class NoOtherObservationsError(BehestError):
    pass


class NoConvergenceError(BehestError):
    pass


class OutOfBoundsError(BehestError):
    pass


class SchemaMismatchError(BehestError):
    pass


class EmptyDatasetError(BehestError):
    pass


class AllRestartsFailedError(BehestError):
    pass


class TooFewParticipantsError(BehestError):
    pass


class TooFewSamplesError(BehestError):
    pass


class OddGameCountError(BehestError):
    pass


class InvalidConfigError(BehestError):
    pass


class MissingResultsError(BehestError):
    pass
