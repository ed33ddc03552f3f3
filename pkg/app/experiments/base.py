"""
Shared plumbing for experiment drivers.
"""
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from app.core.domains import SampleSet, draw_samples, estimate_volume_fraction, volume_fraction
from app.core.errors import PolyFrameError
from app.core.framesolver import evaluate_approximant
from app.core.schemas import ConditionReport, ExperimentConfig, Measure, TrialRecord
from app.core.storage import ResultStore
from app.core.targets import TargetFunction, make_target
from app.core.utils import VOLUME_STREAM, Stopwatch, log_event, logger
from app.experiments.config_loader import config_digest, config_payload
from app.experiments.schedule import SchedulePoint, resolve_schedule, trial_seed
from app.experiments.scheduler import TrialOutcome, TrialScheduler


@dataclass
class ExperimentResult:
    """Aggregated rows, per-trial records and any files written."""
    rows: List[Any]
    records: List[TrialRecord] = field(default_factory=list)
    paths: List[Path] = field(default_factory=list)
    extras: Dict[str, Any] = field(default_factory=dict)


class ExperimentDriver:
    """
    Base class for the four experiment families.

    Subclasses implement `trial` (one fit) and `aggregate` (medians per
    schedule point); `run` resolves the schedule, dispatches trials to the
    work pool and writes results when a store is attached.
    """

    label = "experiment"

    def __init__(self, config: ExperimentConfig, store: Optional[ResultStore] = None,
                 scheduler: Optional[TrialScheduler] = None):
        self.config = config
        self.store = store
        self.scheduler = scheduler or TrialScheduler()
        self.payload = config_payload(config)
        self.config_hash = config_digest(config)
        self.domain = config.domain
        self.basis = config.basis
        self.measure = config.measure
        self.points: List[SchedulePoint] = []
        self._targets: Dict[int, TargetFunction] = {}
        self._volume: Optional[float] = None
        # Guards the per-run caches filled from worker threads.
        self._cache_lock = threading.RLock()

    def seed_for(self, schedule_index: int, trial: int) -> int:
        return trial_seed(self.config, schedule_index, trial)

    def target_for(self, point: SchedulePoint) -> TargetFunction:
        """Target shared by all trials of a point (seeded by the config seed)."""
        with self._cache_lock:
            if point.index not in self._targets:
                self._targets[point.index] = make_target(self.config.target, self.domain.dimension, self.basis,
                                                         point.index_set, seed=self.config.seed)
            return self._targets[point.index]

    def draw(self, count: int, seed: int) -> SampleSet:
        return draw_samples(self.domain, count, seed, self.measure)

    def volume(self) -> float:
        """v_Omega under nu: analytic when known (uniform), else Monte-Carlo."""
        with self._cache_lock:
            if self._volume is None:
                seed = self.config.seed ^ VOLUME_STREAM
                if self.measure == Measure.UNIFORM:
                    self._volume = volume_fraction(self.domain, seed=seed, count=self.config.gram_points)
                else:
                    self._volume = estimate_volume_fraction(self.domain, self.config.gram_points,
                                                            seed, self.measure).fraction
            return self._volume

    @staticmethod
    def report_entry(schedule_index: int, trial: int, report: ConditionReport) -> Dict[str, Any]:
        """A condition report tagged with the trial that produced it."""
        return {"schedule_index": schedule_index, "trial": trial, **report.model_dump()}

    @staticmethod
    def collect_reports(outcomes) -> List[Dict[str, Any]]:
        reports = []
        for outcome in outcomes:
            reports.extend(outcome.extras.get("reports", []))
        return reports

    def residuals(self, point: SchedulePoint, coefficients, samples: SampleSet, values) -> np.ndarray:
        """f(y_i) - f_eps(y_i) on the training points."""
        return np.asarray(values) - evaluate_approximant(coefficients, point.index_set, self.basis, samples.points)

    def base_record(self, point: SchedulePoint, trial: int, **fields) -> TrialRecord:
        return TrialRecord(
            schedule_index=point.index, trial=trial, seed=self.seed_for(point.index, trial),
            n=point.n, N=point.n_basis, M=point.samples, rule=point.rule.label(),
            epsilon=fields.pop("epsilon", self.config.epsilon), config_hash=self.config_hash, **fields,
        )

    def failure(self, schedule_index: int, trial: int, error: PolyFrameError) -> TrialOutcome:
        record = self.base_record(self.points[schedule_index], trial, ok=False, error=str(error))
        return TrialOutcome(schedule_index=schedule_index, trial=trial, records=[record])

    def tasks(self):
        return [(p.index, t) for p in self.points for t in range(self.config.trials)]

    def trial(self, schedule_index: int, trial: int) -> TrialOutcome:
        raise NotImplementedError

    def aggregate(self, outcomes: List[TrialOutcome]) -> ExperimentResult:
        raise NotImplementedError

    def write(self, result: ExperimentResult) -> ExperimentResult:
        name = self.config.run_name()
        result.paths.append(self.store.write_table(f"{name}.csv", result.rows, self.payload))
        if result.records:
            result.paths.append(self.store.write_table(f"{name}_trials.csv", result.records, self.payload))
        if result.extras.get("condition_reports"):
            artifact = {"config_hash": self.config_hash, "seed": self.config.seed,
                        "reports": result.extras["condition_reports"]}
            result.paths.append(self.store.write_json(f"{name}_conditions.json", artifact))
        return result

    def run(self) -> ExperimentResult:
        logger.info(f"Running {self.label} experiment '{self.config.run_name()}' ({self.config_hash})")
        with Stopwatch(f"{self.label} {self.config.run_name()}") as timer:
            self.points = resolve_schedule(self.config)
            outcomes = self.scheduler.run(self.tasks(), self.trial, self.failure)
            result = self.aggregate(outcomes)
            if self.store is not None:
                self.write(result)
        log_event("experiment_finished", {
            "experiment": self.label, "name": self.config.run_name(), "rows": len(result.rows),
            "config_hash": self.config_hash, "seconds": round(timer.elapsed, 3),
        })
        return result
