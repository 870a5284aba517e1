"""Exception hierarchy shared by every stage of the pipeline."""


class LatentHIError(Exception):
    """Base class for all package errors."""


class ParseError(LatentHIError):
    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class IntegrityError(LatentHIError):
    pass


class UnknownDatasetError(LatentHIError):
    pass


class ShapeError(LatentHIError, ValueError):
    pass


class TrainingError(LatentHIError):
    pass


class CalibrationError(LatentHIError):
    pass


class ConfigError(LatentHIError):
    pass


class MetricError(LatentHIError):
    pass


class CheckpointError(LatentHIError):
    pass


class ChecksumError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class KindMismatchError(CheckpointError):
    pass
