"""Error taxonomy shared across the package.

Validation failures are programming or input errors and map to CLI exit
code 2; numeric and training failures map to exit code 3.
"""


class ValidationError(ValueError):
    """An input violates a structural contract (shape, symmetry, range)."""


class ConfigurationError(ValidationError):
    """A config file or CLI flag combination is unusable."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""


class TrainingError(RuntimeError):
    """Training diverged or could not proceed."""

    def __init__(self, message: str, epoch: int | None = None):
        if epoch is not None:
            message = f"{message} (epoch {epoch})"
        super().__init__(message)
        self.epoch = epoch


class DegenerateBoundaryError(RuntimeError):
    """A sampled decision boundary is unusable (tied logits or zero normal)."""


class StallError(RuntimeError):
    """Greedy selection cannot make progress with the given candidates."""
