"""Exception hierarchy.

Everything raised on bad input derives from :class:`EMGTokenError`, which the
command-line front end maps to exit code 2.
"""


class EMGTokenError(ValueError):
    """Base class for data and validation errors."""


# signal_model
class UnreadableFile(EMGTokenError):
    pass


class MalformedRow(EMGTokenError):
    pass


class NonFiniteSample(EMGTokenError):
    def __init__(self, row, column, message=None):
        self.row = row
        self.column = column
        super().__init__(message or f"non-finite sample at row {row}, column {column}")


class EmptyRecording(EMGTokenError):
    pass


class InvalidRecording(EMGTokenError):
    pass


class InvalidConfig(EMGTokenError):
    pass


# preprocess
class InvalidBand(EMGTokenError):
    pass


class RecordingTooShort(EMGTokenError):
    pass


class RecordingShorterThanWindow(EMGTokenError):
    pass


# features
class SegmentTooShort(EMGTokenError):
    pass


class InsufficientData(EMGTokenError):
    pass


class NonFiniteFeature(EMGTokenError):
    pass


# codebook
class TooFewSamples(EMGTokenError):
    pass


class ConfigMismatch(EMGTokenError):
    pass


class VersionMismatch(EMGTokenError):
    pass


class CorruptCodebook(EMGTokenError):
    pass


# selection / consistency / quality
class LengthMismatch(EMGTokenError):
    pass


class EmptySequence(EMGTokenError):
    pass


class MissingReference(EMGTokenError):
    pass


class LabelOutOfRange(EMGTokenError):
    pass


class ChannelMismatch(EMGTokenError):
    pass


class CodebookMismatch(EMGTokenError):
    pass


class InvalidProfile(EMGTokenError):
    pass
