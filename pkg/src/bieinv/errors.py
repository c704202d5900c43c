"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Bad or inconsistent run configuration."""


class ContractViolation(ValueError):
    """Caller broke an API precondition (e.g. mismatched lengths)."""


class GeometryError(ValueError):
    """Point not on the boundary / not inside the domain, bad shape, etc."""


class SingularityError(ValueError):
    """Kernel evaluated at (nearly) coincident points."""


class DataError(ValueError):
    """Boundary data missing or invalid."""


class IngestionError(ValueError):
    """Boundary data file failed validation."""


class NumericError(ArithmeticError):
    """Non-finite value produced where a finite one is required."""


class TrainingDiverged(RuntimeError):
    """Training aborted after repeated divergence.

    Carries the epoch index, the last checkpoint parameters and the partial
    metrics so a runner can flush what it has.
    """

    def __init__(self, message, epoch, checkpoint, metrics):
        super().__init__(message)
        self.epoch = epoch
        self.checkpoint = checkpoint
        self.metrics = metrics


class RecoveryWarning(UserWarning):
    """Recovered medium violates positivity on part of the grid."""
