"""PolyFrameLab - experiment drivers."""
from typing import Optional

from app.core.schemas import ExperimentConfig, ExperimentKind
from app.core.storage import ResultStore
from app.core.utils import error_handler
from app.experiments.base import ExperimentResult
from app.experiments.bounds import run_bounds
from app.experiments.conditioning import run_conditioning_sweep
from app.experiments.converge import run_convergence
from app.experiments.errormap import run_error_map
from app.experiments.scheduler import TrialScheduler

_DRIVERS = {
    ExperimentKind.CONVERGE: run_convergence,
    ExperimentKind.CONDITIONING: run_conditioning_sweep,
    ExperimentKind.ERRORMAP: run_error_map,
    ExperimentKind.BOUNDS: run_bounds,
}


@error_handler
def run_experiment(config: ExperimentConfig, store: Optional[ResultStore] = None,
                   scheduler: Optional[TrialScheduler] = None) -> ExperimentResult:
    """Dispatch on `config.experiment`."""
    return _DRIVERS[config.experiment](config, store, scheduler)


__all__ = [
    "ExperimentResult",
    "TrialScheduler",
    "run_bounds",
    "run_conditioning_sweep",
    "run_convergence",
    "run_error_map",
    "run_experiment",
]
