"""Exception types shared across the package.

Every error raised on a contract violation derives from SlcrecError so
callers can catch the package's failures with a single except clause while
still being able to distinguish individual conditions.
"""

from __future__ import annotations


class SlcrecError(Exception):
    """Base class for all errors raised by slcrec."""


# --- data layer -----------------------------------------------------------


class SchemaError(SlcrecError):
    """A feature schema definition violates its invariants."""


class SchemaMismatchError(SlcrecError):
    """Input columns do not match the declared schema."""

    def __init__(self, missing: list[str], extra: list[str]):
        self.missing = list(missing)
        self.extra = list(extra)
        super().__init__(f"schema mismatch: missing columns {self.missing}, extra columns {self.extra}")


class ParseError(SlcrecError):
    """A data row could not be parsed; carries row number and column."""

    def __init__(self, row: int, column: str, detail: str):
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column {column!r}: {detail}")


class UnknownCategoryError(SlcrecError):
    """A nominal context value is not a declared category of its dimension."""

    def __init__(self, dimension: str, value: str):
        self.dimension = dimension
        self.value = value
        super().__init__(f"unknown category {value!r} for dimension {dimension!r}")


class EmptyDatasetError(SlcrecError):
    """An operation that requires interactions received none."""


class DegenerateSplitError(SlcrecError):
    """A train/test split would leave one side empty."""


class InvalidSpecError(SlcrecError):
    """A synthetic-dataset spec has out-of-range fields."""


# --- nn kernel ------------------------------------------------------------


class ShapeMismatchError(SlcrecError):
    """Operand shapes are inconsistent with the layer or metric contract."""


class EmptyInputError(SlcrecError):
    """A metric or loss received zero-length inputs."""


class NonFiniteGradientError(SlcrecError):
    """A gradient contained NaN or infinity; the update step was aborted."""

    def __init__(self, param_name: str):
        self.param_name = param_name
        super().__init__(f"non-finite gradient for parameter {param_name!r}")


class NonDeterministicClosureError(SlcrecError):
    """Two evaluations of a gradient-check closure at the same point differed."""


class UnknownIdError(SlcrecError, KeyError):
    """An embedding lookup used an id that is not in the vocabulary."""

    def __init__(self, id_: str):
        self.id = id_
        SlcrecError.__init__(self, f"unknown id {id_!r}")


# --- encoders / training --------------------------------------------------


class EmptyCorpusError(SlcrecError):
    """Encoder training received an empty corpus."""


class RaggedSequencesError(SlcrecError):
    """Sequence corpus contains sequences of differing lengths."""


class DivergedTrainingError(SlcrecError):
    """Training loss became non-finite."""


class EncoderSchemaMismatchError(SlcrecError):
    """An encoder model was applied to data from a different feature schema."""


# --- recommender / eval ---------------------------------------------------


class InvalidConfigError(SlcrecError):
    """A model or run configuration is internally inconsistent."""


class UnknownUserError(SlcrecError):
    """Prediction was requested for a user absent from the model vocabulary."""

    def __init__(self, user_id: str):
        self.user_id = user_id
        super().__init__(f"unknown user {user_id!r}")


class UnknownItemError(SlcrecError):
    """Prediction was requested for an item absent from the model vocabulary."""

    def __init__(self, item_id: str):
        self.item_id = item_id
        super().__init__(f"unknown item {item_id!r}")


class PositiveNotInCandidatesError(SlcrecError):
    """A ranked candidate set does not contain the positive item."""
