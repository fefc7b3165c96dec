"""Error taxonomy shared by the library, the CLI, and the HTTP service.

Every error carries a stable machine-readable ``code`` so that the CLI can
emit it in error JSON and clients can map it back to typed exceptions.
"""


class MatchkitError(Exception):
    """Base class for all toolkit errors."""

    code = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class DimensionMismatch(MatchkitError):
    code = "dimension_mismatch"


class EmptySample(MatchkitError):
    code = "empty_sample"


class InvalidM(MatchkitError):
    code = "invalid_m"


class InvalidK(MatchkitError):
    code = "invalid_k"


class GroupTooSmall(MatchkitError):
    code = "group_too_small"


class NonFiniteOutcome(MatchkitError):
    code = "non_finite_outcome"


class BadTreatmentValue(MatchkitError):
    code = "bad_treatment_value"


class InputTooLarge(MatchkitError):
    code = "input_too_large"


class FoldTooSmall(MatchkitError):
    code = "fold_too_small"


class PropensityOutOfRange(MatchkitError):
    code = "propensity_out_of_range"


class NegativeInput(MatchkitError):
    code = "negative_input"


class OutsideSupport(MatchkitError):
    code = "outside_support"


class MalformedInput(MatchkitError):
    code = "malformed_input"


class EmptyRun(MatchkitError):
    code = "empty_run"


class InternalInconsistency(MatchkitError):
    """Raised when two algebraically equivalent computations disagree."""

    code = "internal_inconsistency"
