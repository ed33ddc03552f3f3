"""
Convergence experiment: median L2(Omega, mu) and sampled L-infinity errors versus M.
"""
from typing import List, Optional

from app.core.framesolver import coefficient_l2_norm, estimate_errors, evaluate_approximant, fit
from app.core.schemas import ConvergenceRow, ExperimentConfig
from app.core.storage import ResultStore
from app.core.utils import EVAL_STREAM, lower_median
from app.experiments.base import ExperimentDriver, ExperimentResult
from app.experiments.scheduler import TrialOutcome, TrialScheduler, summarize_point


class ConvergenceDriver(ExperimentDriver):
    """Fresh training and evaluation samples per trial; medians per schedule point."""

    label = "converge"

    def trial(self, schedule_index: int, trial: int) -> TrialOutcome:
        point = self.points[schedule_index]
        seed = self.seed_for(schedule_index, trial)
        target = self.target_for(point)

        samples = self.draw(point.samples, seed)
        result = fit(samples, target, point.index_set, self.basis, self.config.epsilon)
        coefficients = result.solution.coefficients

        evaluation = self.draw(self.config.error_points, seed ^ EVAL_STREAM)
        approx = evaluate_approximant(coefficients, point.index_set, self.basis, evaluation.points)
        errors = estimate_errors(target(evaluation.points), approx,
                                 self.residuals(point, coefficients, samples, result.sample_values))

        record = self.base_record(
            point, trial,
            l2_error=errors.l2,
            linf_error=errors.linf,
            coefficient_norm=coefficient_l2_norm(result.solution),
        )
        return TrialOutcome(schedule_index=schedule_index, trial=trial, records=[record])

    def aggregate(self, outcomes: List[TrialOutcome]) -> ExperimentResult:
        rows, records = [], []
        for point in self.points:
            summary = summarize_point(point.index, outcomes)
            ok = [o.records[0] for o in summary.ok]
            rows.append(ConvergenceRow(
                schedule_index=point.index,
                M=point.samples,
                N=point.n_basis,
                n=point.n,
                rule=point.rule.label(),
                l2_error=lower_median(r.l2_error for r in ok),
                linf_error=lower_median(r.linf_error for r in ok),
                coefficient_norm=lower_median(r.coefficient_norm for r in ok),
                trials_ok=len(ok),
                trials_failed=summary.failed,
                flagged=summary.flagged,
                trial=-1,
                seed=self.config.seed,
                config_hash=self.config_hash,
            ))
        for outcome in outcomes:
            records.extend(outcome.records)
        return ExperimentResult(rows=rows, records=records)


def run_convergence(config: ExperimentConfig, store: Optional[ResultStore] = None,
                    scheduler: Optional[TrialScheduler] = None) -> ExperimentResult:
    """Per schedule point: `trials` independent fits, medians of their errors."""
    return ConvergenceDriver(config, store, scheduler).run()
