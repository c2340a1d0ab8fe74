"""Exception types shared across the toolkit."""


class DataError(ValueError):
    """Malformed or inconsistent input data (carries file/line context in the message)."""


class TrainingError(RuntimeError):
    """Non-finite loss or gradient encountered during optimization."""


class CheckpointFormatError(RuntimeError):
    """Checkpoint file has wrong magic bytes or an unsupported version."""


class CheckpointCorruptError(RuntimeError):
    """Checkpoint file is truncated or internally inconsistent."""


class ScoringError(ValueError):
    """Predictions and gold annotations do not line up."""
