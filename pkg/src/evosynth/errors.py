"""Exception hierarchy shared across the library."""


class EvoSynthError(Exception):
    """Base class for all library errors."""


# network construction and training

class InvalidSpec(EvoSynthError):
    """Layer specification is empty, has a zero dimension, or is dimension-incompatible."""


class ShapeMismatch(EvoSynthError):
    """Input or gradient shapes do not match the network."""


class InvalidLabel(EvoSynthError):
    """A label is not a valid class index."""


class DatasetTooSmall(EvoSynthError):
    """Fewer training samples than one batch after the validation split."""


class NumericFailure(EvoSynthError):
    """A NaN or infinity appeared where only finite values are allowed."""


# genetic encoding

class DeadLayer(EvoSynthError):
    """A layer has no active synapse with nonzero weight."""


# data loading and persistence

class ParseError(EvoSynthError):
    """Malformed input file; the message names the offending location."""


class EmptyDataset(EvoSynthError):
    """The source contains no samples."""


class NonFiniteFeature(EvoSynthError):
    """A feature value is NaN or infinite; the message names the row."""


class BadMagic(EvoSynthError):
    """An IDX file does not start with the expected magic number."""


class CountMismatch(EvoSynthError):
    """Image and label counts of an IDX pair disagree."""


class TruncatedFile(EvoSynthError):
    """A binary file ends before the declared payload."""


class InvalidParam(EvoSynthError):
    """A generator parameter is out of range."""


class IoError(EvoSynthError):
    """A file could not be read or written; the message names the path."""


class FormatVersionUnsupported(EvoSynthError):
    """A model file declares a format version this library does not know."""


class IntegrityError(EvoSynthError):
    """A model file violates its own structural contract."""


# command line

class ConfigError(EvoSynthError):
    """A run configuration file fails schema validation."""
