"""
Bound checks: measured errors, coefficients and conditioning constants
against their theoretical upper bounds.

The Gram estimate H and the L2 error share one Monte-Carlo point set Z, and
sup-norms are taken over Z together with the training points, which makes
the error and coefficient inequalities hold exactly for the sampled norms.
"""
import math
from typing import Dict, List, Optional

import numpy as np

from app.core.diagnostics import condition_constants, constant_spread, monte_carlo_gram, universal_cap
from app.core.errors import ConfigError
from app.core.framesolver import (
    coefficient_l2_norm,
    estimate_errors,
    evaluate_approximant,
    fit,
    truncate_pointwise,
)
from app.core.polybasis import ProjectionResult, projection_coefficients
from app.core.schemas import BoundsRow, ExperimentConfig
from app.core.storage import ResultStore
from app.core.utils import EVAL_STREAM, logger
from app.experiments.base import ExperimentDriver, ExperimentResult
from app.experiments.schedule import SchedulePoint
from app.experiments.scheduler import TrialOutcome, TrialScheduler, summarize_point

ROUNDOFF = 1e-9


def _rms(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(values) ** 2)))
def _row(point: SchedulePoint, trial: int, seed: int, check: str, lhs: float, rhs: float,
         tolerance: float, config_hash: str) -> BoundsRow:
    slack = rhs - lhs
    return BoundsRow(schedule_index=point.index, trial=trial, seed=seed, n=point.n, N=point.n_basis,
                     M=point.samples, check=check, lhs=lhs, rhs=rhs, slack=slack, tolerance=tolerance,
                     passed=bool(slack >= -tolerance), config_hash=config_hash)


class BoundsDriver(ExperimentDriver):
    """Per trial: error, coefficient, universal-cap and contraction checks; per point: the
    expectation bound for the truncated estimator."""

    label = "bounds"

    def __init__(self, config: ExperimentConfig, store: Optional[ResultStore] = None,
                 scheduler: Optional[TrialScheduler] = None):
        super().__init__(config, store, scheduler)
        self._projections: Dict[int, ProjectionResult] = {}

    def projection_for(self, point: SchedulePoint) -> ProjectionResult:
        with self._cache_lock:
            if point.index not in self._projections:
                self._projections[point.index] = projection_coefficients(
                    self.target_for(point), point.index_set, self.basis, self.config.quadrature_order)
            return self._projections[point.index]

    def truncation_bound(self, point: SchedulePoint) -> float:
        bound = self.config.bounds.truncation_bound
        if bound is None:
            bound = self.target_for(point).bound
        if bound is None:
            raise ConfigError(f"target {self.config.target.id.value} has no known bound L; "
                              "set bounds.truncation_bound")
        return bound

    def trial(self, schedule_index: int, trial: int) -> TrialOutcome:
        point = self.points[schedule_index]
        seed = self.seed_for(schedule_index, trial)
        target = self.target_for(point)
        projection = self.projection_for(point)
        epsilon = self.config.epsilon
        lam, basis = point.index_set, self.basis

        samples = self.draw(point.samples, seed)
        result = fit(samples, target, lam, basis, epsilon)
        c_eps = result.solution.coefficients
        c_p = projection.coefficients

        gram = monte_carlo_gram(self.domain, lam, basis, self.config.error_points, seed ^ EVAL_STREAM, self.measure)
        z = gram.samples.points
        f_z = target(z)
        approx_z = evaluate_approximant(c_eps, lam, basis, z)
        errors = estimate_errors(f_z, approx_z, self.residuals(point, c_eps, samples, result.sample_values))

        p_gap_z = f_z - evaluate_approximant(c_p, lam, basis, z)
        p_gap_y = self.residuals(point, c_p, samples, result.sample_values)
        sup_gap = float(max(np.abs(p_gap_z).max(), np.abs(p_gap_y).max()))
        p_norm = float(np.linalg.norm(c_p))
        report = condition_constants(result.factors, epsilon, gram)

        rows: List[BoundsRow] = []
        rhs = (1.0 + report.c_max) * (sup_gap + epsilon * p_norm)
        rows.append(_row(point, trial, seed, "error_bound", errors.l2, rhs,
                         3.0 * errors.l2_standard_error + ROUNDOFF * rhs, self.config_hash))

        rhs = sup_gap + epsilon * p_norm
        lhs = epsilon * coefficient_l2_norm(result.solution)
        rows.append(_row(point, trial, seed, "coefficient_bound", lhs, rhs, ROUNDOFF * max(rhs, 1.0),
                         self.config_hash))

        cap = universal_cap(self.volume(), epsilon)
        if math.isfinite(cap):
            spread = constant_spread(result.factors, epsilon, gram)
            rows.append(_row(point, trial, seed, "universal_cap", report.c_max, cap, 3.0 * spread * cap,
                             self.config_hash))

        bound = self.truncation_bound(point)
        truncated_sq = _rms(f_z - truncate_pointwise(approx_z, bound)) ** 2
        if np.abs(f_z).max() <= bound:
            lhs = math.sqrt(truncated_sq)
            rows.append(_row(point, trial, seed, "truncation_contraction", lhs, errors.l2,
                             ROUNDOFF * max(errors.l2, 1.0), self.config_hash))

        record = self.base_record(point, trial, l2_error=errors.l2, linf_error=errors.linf,
                                  coefficient_norm=coefficient_l2_norm(result.solution),
                                  c_prime=report.c_prime, c_double_prime=report.c_double_prime,
                                  c_max=report.c_max, c_unregularized=report.c_unregularized)
        return TrialOutcome(schedule_index=schedule_index, trial=trial, records=[record], extras={
            "rows": rows,
            "reports": [self.report_entry(schedule_index, trial, report)],
            "truncated_sq": truncated_sq,
            "projection_bound_sq": (_rms(p_gap_z) + epsilon * p_norm) ** 2,
        })

    def expectation_row(self, point: SchedulePoint, ok: List[TrialOutcome]) -> BoundsRow:
        """mean ||f - T_L(f_eps)||^2 <= 3 (2-delta)/(1-delta) E_ub^2 + 4 L^2 gamma."""
        delta, gamma = self.config.bounds.delta, self.config.bounds.gamma
        bound = self.truncation_bound(point)
        lhs_values = np.array([o.extras["truncated_sq"] for o in ok])
        e_values = np.array([o.extras["projection_bound_sq"] for o in ok])
        factor = 3.0 * (2.0 - delta) / (1.0 - delta)
        lhs = float(lhs_values.mean())
        rhs = factor * float(e_values.mean()) + 4.0 * bound ** 2 * gamma
        tolerance = 0.0
        if len(ok) > 1:
            tolerance = 3.0 * (lhs_values.std(ddof=1) + factor * e_values.std(ddof=1)) / math.sqrt(len(ok))
        return _row(point, -1, self.config.seed, "truncated_expectation", lhs, rhs,
                    tolerance + ROUNDOFF * rhs, self.config_hash)

    def aggregate(self, outcomes: List[TrialOutcome]) -> ExperimentResult:
        rows, records = [], []
        for point in self.points:
            summary = summarize_point(point.index, outcomes)
            for outcome in summary.ok:
                rows.extend(outcome.extras["rows"])
            rows.append(self.expectation_row(point, summary.ok))
        for outcome in outcomes:
            records.extend(outcome.records)
        violations = sum(not r.passed for r in rows)
        if violations:
            logger.warning(f"{violations} of {len(rows)} bound checks violated")
        return ExperimentResult(rows=rows, records=records, extras={
            "violations": violations, "condition_reports": self.collect_reports(outcomes),
        })


def run_bounds(config: ExperimentConfig, store: Optional[ResultStore] = None,
               scheduler: Optional[TrialScheduler] = None) -> ExperimentResult:
    """Measured quantities against their bounds; `passed` means slack >= -tolerance."""
    return BoundsDriver(config, store, scheduler).run()
