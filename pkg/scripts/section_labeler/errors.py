"""
Exception hierarchy for the section labeler

Library code raises these; only the command-line layer turns them into
diagnostics and exit codes.
"""


class SectionLabelerError(Exception):
    """Base class for every error raised by the package"""

    exit_code = 1


class ConfigError(SectionLabelerError):
    """Malformed or invalid configuration"""

    exit_code = 2


class ModelFileError(SectionLabelerError):
    """Model bundle missing, unreadable or incompatible"""

    exit_code = 3


class EmptyCorpusError(SectionLabelerError):
    """A corpus or data split had no usable reports"""

    exit_code = 4


class AnnotationError(SectionLabelerError):
    """Standoff annotations that cannot be aligned to their text"""

    exit_code = 5


class DegenerateDataError(SectionLabelerError):
    """Training data that cannot support the requested fit (e.g. one class)"""

    exit_code = 6


class DimensionMismatchError(SectionLabelerError):
    """Array shapes that do not agree with a layer or table"""

    exit_code = 7


class NonFiniteGradientError(SectionLabelerError):
    """A gradient tensor contained NaN or infinity"""

    exit_code = 8


class EmbeddingFormatError(SectionLabelerError):
    """A word-vector file that is unreadable or inconsistent"""

    exit_code = 9
