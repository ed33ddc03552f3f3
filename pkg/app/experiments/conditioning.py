"""
Conditioning sweep: C', C'' and C_{Y,Lambda,eps} against N for several
oversampling rules and thresholds.
"""
import math
from typing import List, Optional

from app.core.diagnostics import condition_constants, constant_spread, monte_carlo_gram, universal_cap
from app.core.framesolver import assemble_design_matrix, condition_number, factorize
from app.core.schemas import ConditioningRow, ExperimentConfig
from app.core.storage import ResultStore
from app.core.utils import GRAM_STREAM, lower_median
from app.experiments.base import ExperimentDriver, ExperimentResult
from app.experiments.scheduler import TrialOutcome, TrialScheduler, summarize_point


def _fraction_above(values: List[float], threshold: float) -> float:
    return sum(v > threshold for v in values) / len(values) if values else 0.0


class ConditioningDriver(ExperimentDriver):
    """One SVD and one Gram estimate per trial serve every threshold of the sweep."""

    label = "conditioning"

    def trial(self, schedule_index: int, trial: int) -> TrialOutcome:
        point = self.points[schedule_index]
        seed = self.seed_for(schedule_index, trial)

        samples = self.draw(point.samples, seed)
        factors = factorize(assemble_design_matrix(samples, point.index_set, self.basis))
        gram = monte_carlo_gram(self.domain, point.index_set, self.basis, self.config.gram_points,
                                seed ^ GRAM_STREAM, self.measure)
        cond = condition_number(factors)

        records, reports = [], []
        for epsilon in self.config.threshold_sweep():
            report = condition_constants(factors, epsilon, gram)
            reports.append(self.report_entry(schedule_index, trial, report))
            records.append(self.base_record(
                point, trial,
                epsilon=epsilon,
                condition_number=cond,
                c_prime=report.c_prime,
                c_double_prime=report.c_double_prime,
                c_max=report.c_max,
                c_unregularized=report.c_unregularized,
                c_max_spread=constant_spread(factors, epsilon, gram),
            ))
        return TrialOutcome(schedule_index=schedule_index, trial=trial, records=records,
                            extras={"reports": reports})

    def failure(self, schedule_index, trial, error):
        outcome = super().failure(schedule_index, trial, error)
        template = outcome.records[0]
        outcome.records = [template.model_copy(update={"epsilon": eps}) for eps in self.config.threshold_sweep()]
        return outcome

    def aggregate(self, outcomes: List[TrialOutcome]) -> ExperimentResult:
        threshold = 1.0 / math.sqrt(1.0 - self.config.bounds.delta)
        volume = self.volume()
        rows, records = [], []
        for point in self.points:
            summary = summarize_point(point.index, outcomes)
            for epsilon in self.config.threshold_sweep():
                ok = [r for o in summary.ok for r in o.records if r.epsilon == epsilon]
                c_max = [r.c_max for r in ok]
                c_unreg = [r.c_unregularized for r in ok]
                rows.append(ConditioningRow(
                    schedule_index=point.index,
                    N=point.n_basis,
                    M=point.samples,
                    n=point.n,
                    rule=point.rule.label(),
                    epsilon=epsilon,
                    c_prime=lower_median(r.c_prime for r in ok),
                    c_double_prime=lower_median(r.c_double_prime for r in ok),
                    c_max=lower_median(c_max),
                    c_unregularized=lower_median(c_unreg),
                    condition_number=lower_median(r.condition_number for r in ok),
                    universal_cap=universal_cap(volume, epsilon),
                    fraction_c_max_above=_fraction_above(c_max, threshold),
                    fraction_c_unregularized_above=_fraction_above(c_unreg, threshold),
                    trials_ok=len(summary.ok),
                    trials_failed=summary.failed,
                    flagged=summary.flagged,
                    trial=-1,
                    seed=self.config.seed,
                    config_hash=self.config_hash,
                ))
        for outcome in outcomes:
            records.extend(outcome.records)
        return ExperimentResult(rows=rows, records=records, extras={
            "volume_fraction": volume, "condition_reports": self.collect_reports(outcomes),
        })


def run_conditioning_sweep(config: ExperimentConfig, store: Optional[ResultStore] = None,
                           scheduler: Optional[TrialScheduler] = None) -> ExperimentResult:
    """Per (schedule point, epsilon): medians over trials of the conditioning constants."""
    return ConditioningDriver(config, store, scheduler).run()
