"""
Work pool for independent trials and deterministic aggregation of their outcomes.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from app.core.config import settings
from app.core.errors import NumericError, PolyFrameError, SamplingError
from app.core.schemas import TrialRecord
from app.core.utils import log_event, logger

Task = Tuple[int, int]


@dataclass
class TrialOutcome:
    """Records of one (schedule index, trial) plus driver-specific extras."""
    schedule_index: int
    trial: int
    records: List[TrialRecord] = field(default_factory=list)
    extras: Dict[str, Any] = field(default_factory=dict)
    error: Optional[PolyFrameError] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class PointSummary:
    """Successful outcomes of one schedule point and its failure bookkeeping."""
    schedule_index: int
    ok: List[TrialOutcome]
    failed: int
    flagged: bool


class TrialScheduler:
    """
    Runs trials on a thread pool.

    Numeric and sampling failures are caught per trial and turned into failed
    outcomes; results come back sorted by (schedule index, trial).
    """

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers or settings.MAX_WORKERS

    def _guarded(self, work: Callable[[int, int], TrialOutcome],
                 on_failure: Callable[[int, int, PolyFrameError], TrialOutcome]) -> Callable[[Task], TrialOutcome]:
        def run(task: Task) -> TrialOutcome:
            s, t = task
            try:
                return work(s, t)
            except (NumericError, SamplingError) as e:
                log_event("trial_failed", {"schedule_index": s, "trial": t, "error": str(e)}, level="WARNING")
                outcome = on_failure(s, t, e)
                outcome.error = e
                return outcome
        return run

    def run(self, tasks: Sequence[Task], work: Callable[[int, int], TrialOutcome],
            on_failure: Callable[[int, int, PolyFrameError], TrialOutcome]) -> List[TrialOutcome]:
        guarded = self._guarded(work, on_failure)
        if self.max_workers <= 1:
            outcomes = [guarded(task) for task in tasks]
        else:
            with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                outcomes = list(pool.map(guarded, tasks))
        return sorted(outcomes, key=lambda o: (o.schedule_index, o.trial))


def summarize_point(schedule_index: int, outcomes: Sequence[TrialOutcome]) -> PointSummary:
    """Split outcomes of one point; abort when every trial failed."""
    mine = [o for o in outcomes if o.schedule_index == schedule_index]
    ok = [o for o in mine if o.ok]
    failed = len(mine) - len(ok)
    if mine and not ok:
        last = mine[-1].error
        logger.error(f"All {len(mine)} trials of schedule point {schedule_index} failed; aborting")
        raise last
    flagged = failed > settings.FAILURE_FRACTION_LIMIT * len(mine)
    if flagged:
        log_event("schedule_point_flagged", {
            "schedule_index": schedule_index, "failed": failed, "trials": len(mine),
        }, level="WARNING")
    return PointSummary(schedule_index=schedule_index, ok=ok, failed=failed, flagged=flagged)
