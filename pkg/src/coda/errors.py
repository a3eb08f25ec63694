"""Exception types shared across the package."""


class CodaError(Exception):
    """Base class for all package errors."""


class ParseError(CodaError):
    """A dataset file contains a malformed record.

    Carries a locator (file/line or record path) so the offending record
    can be found without re-running the parser.
    """

    def __init__(self, locator: str, reason: str):
        self.locator = locator
        self.reason = reason
        super().__init__(f"{locator}: {reason}")


class TaskMismatch(CodaError):
    """The declared file format cannot represent the requested task."""


class InsufficientData(CodaError):
    """Too few documents for the requested operation."""


class PayloadInvalid(CodaError):
    """An augmentation record lacks a usable reconstructed payload."""


class BackendUnavailable(CodaError):
    """A remote backend could not be reached or kept failing after retries."""


class TimeoutExceeded(CodaError):
    """A remote backend did not answer within the configured timeout."""


class EmptyReply(CodaError):
    """A backend answered successfully but returned no usable text."""


class DimensionMismatch(CodaError):
    """An embedding batch returned vectors of differing dimensions."""


class ConceptParseError(CodaError):
    """A concept-mining reply contained no extractable concept line."""


class ScorerUnavailable(CodaError):
    """The language-model scorer cannot score the given texts."""


class GroupSizeMismatch(CodaError):
    """Augmentation groups passed to a corpus metric have unequal sizes."""


class MissingPhrasing(CodaError):
    """No label-clause phrasing is configured for a dataset/label."""
