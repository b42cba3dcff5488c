"""Exception types shared across the package."""


class S4rlError(Exception):
    pass


class ConfigurationError(S4rlError, ValueError):
    """A shape, width or configuration value is invalid."""


class ShapeError(ConfigurationError):
    pass


class NumericalError(S4rlError, FloatingPointError):
    """A NaN or Inf was produced where finite values are required."""


class TrainingHalted(NumericalError):
    def __init__(self, step: int, term: str, detail: str = ""):
        self.step = step
        self.term = term
        msg = f"training halted at step {step}: non-finite value in {term}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class DatasetFormatError(S4rlError, ValueError):
    """Dataset file is truncated, corrupted or of an unknown version."""


class ChecksumError(DatasetFormatError):
    pass
