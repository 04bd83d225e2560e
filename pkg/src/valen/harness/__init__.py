from .config import RunConfig, METHODS
from .bundle import SolverBundle, checkpoint_hash
from .training import train
from .evaluate import evaluate
from .ablate import ablate
from .report import report

__all__ = [
    "RunConfig",
    "METHODS",
    "SolverBundle",
    "checkpoint_hash",
    "train",
    "evaluate",
    "ablate",
    "report",
]
