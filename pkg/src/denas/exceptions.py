"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value violates its contract."""


class DataError(ValueError):
    """A dataset file is missing, malformed, or inconsistent."""


class TrainingDiverged(RuntimeError):
    """Training produced a non-finite loss."""


class EvaluationError(RuntimeError):
    """A fitness evaluator failed; carries the offending candidate."""

    def __init__(self, message, genome=None):
        super().__init__(message)
        self.genome = genome
