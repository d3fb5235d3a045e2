"""Exception types shared across the toolkit.

The CLI maps these onto process exit codes: ConfigError -> 2,
TrainingDivergedError -> 3, I/O failures (OSError) -> 4.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class DegenerateInputError(ValueError):
    """Input is structurally valid but numerically degenerate (e.g. constant grid)."""


class GenerationError(RuntimeError):
    """Dataset generation could not produce usable samples."""


class DatasetFormatError(RuntimeError):
    """Dataset file is corrupt or does not match the experiment configuration."""


class TrainingDivergedError(RuntimeError):
    """Loss became NaN/Inf during training."""

    def __init__(self, message: str, epoch: int):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch
