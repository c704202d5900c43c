"""Inverse identification of elliptic media from boundary data.

The solver reformulates -div(eps grad u) = f as a Poisson problem with an
equivalent source, enforces Green's third identity against the measured
Dirichlet/Neumann pair on collocation points, trains small residual networks
for the source and the solution, and recovers the medium from the transport
relation linking the two.
"""

from ._version import __version__
from ._backend import BACKEND, available_backends
from .config import RunConfig, load_config
from .errors import (ConfigurationError, ContractViolation, DataError,
                     GeometryError, IngestionError, NumericError,
                     RecoveryWarning, SingularityError, TrainingDiverged)
from .network import NetworkParams, DiscriminatorParams, init, param_count
from .problems import ProblemData, make_problem
from .recovery import MediumField, recover_piecewise, recover_smooth
from .runner import (RunResult, ingest_boundary_data, run_convergence_study,
                     run_experiment, run_forward)
from .trainer import RunMetrics, TrainResult, train

__all__ = [
    "__version__", "BACKEND", "available_backends",
    "RunConfig", "load_config",
    "ConfigurationError", "ContractViolation", "DataError", "GeometryError",
    "IngestionError", "NumericError", "RecoveryWarning", "SingularityError",
    "TrainingDiverged",
    "NetworkParams", "DiscriminatorParams", "init", "param_count",
    "ProblemData", "make_problem",
    "MediumField", "recover_piecewise", "recover_smooth",
    "RunResult", "ingest_boundary_data", "run_convergence_study",
    "run_experiment", "run_forward",
    "RunMetrics", "TrainResult", "train",
]
