"""Exception and warning types shared across the toolkit."""


class ParameterError(ValueError):
    """A numeric parameter lies outside its admissible domain."""


class GridMismatchError(ValueError):
    """Two objects that must share a time grid do not."""


class EmptySampleError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


class NumericOverflowError(ArithmeticError):
    """Drift evaluation produced a non-finite value during integration."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite drift value at step {step}")


class UnsupportedDriftError(ValueError):
    pass


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class HypothesisRejected(RuntimeError):
    """A stability experiment refused to run because a hypothesis check failed."""

    def __init__(self, checks):
        self.checks = checks
        self.failed = [c.name for c in checks if c.status == "fail"]
        super().__init__(f"hypothesis check failed: {', '.join(self.failed)}")


class AccuracyWarning(UserWarning):
    pass
