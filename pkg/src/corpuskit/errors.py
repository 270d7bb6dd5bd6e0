"""Exception hierarchy shared by every corpuskit module."""


class CorpusKitError(Exception):
    """Base class for all corpuskit errors."""


class IngestError(CorpusKitError):
    """Raw input bytes could not be decoded as UTF-8."""

    def __init__(self, message: str, byte_offset: int | None = None):
        super().__init__(message)
        self.byte_offset = byte_offset


class RecordError(CorpusKitError):
    """A JSONL corpus line is malformed; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(message)
        self.line_number = line_number


class EmptyDocumentError(CorpusKitError):
    """An operation that needs words or sentences got a document with none."""


class EmptyCorpusError(CorpusKitError):
    """An operation that needs at least one document got an empty corpus."""


class ResourceError(CorpusKitError):
    """A required resource (stoplist, lexicon, classifier, ...) is missing."""


class ConfigError(CorpusKitError):
    """A configuration file or parameter set is invalid."""


class CalibrationError(CorpusKitError):
    """Percentile calibration had no defined values to work with."""


class SignatureMismatchError(CorpusKitError):
    """MinHash signatures with different length or seed were compared."""


class ConsistencyError(CorpusKitError):
    """Cross-referenced artifacts (corpus vs. clusters) disagree."""


class TrainError(CorpusKitError):
    """Model training could not proceed (e.g. empty training corpus)."""


class NotPaginatedError(CorpusKitError):
    """A page-level statistic was requested for a document without pages."""


class DecodeError(CorpusKitError):
    """Token ids could not be decoded back into text."""


class ModelFormatError(CorpusKitError):
    """A serialized model file is corrupt or has an unsupported version."""
