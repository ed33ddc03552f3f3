"""
Pointwise error map of a single fit on a G x G grid over D (2-D only).
"""
from typing import Optional

import numpy as np

from app.core.config import settings
from app.core.domains import contains_batch
from app.core.framesolver import coefficient_l2_norm, evaluate_approximant, fit
from app.core.schemas import ErrorMapRow, ExperimentConfig
from app.core.storage import ResultStore
from app.experiments.base import ExperimentDriver, ExperimentResult
from app.experiments.scheduler import TrialOutcome, TrialScheduler, summarize_point


def error_grid(half_width: float, size: int) -> np.ndarray:
    """Uniform size x size grid on [-T, T]^2, y1 varying slowest."""
    axis = np.linspace(-half_width, half_width, size)
    y1, y2 = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([y1.ravel(), y2.ravel()], axis=1)


class ErrorMapDriver(ExperimentDriver):
    """Fits once at the last schedule point; grid points outside Omega get the sentinel."""

    label = "errormap"

    def tasks(self):
        return [(self.points[-1].index, 0)]

    def trial(self, schedule_index: int, trial: int) -> TrialOutcome:
        point = self.points[schedule_index]
        seed = self.seed_for(schedule_index, trial)
        target = self.target_for(point)

        samples = self.draw(point.samples, seed)
        result = fit(samples, target, point.index_set, self.basis, self.config.epsilon)
        coefficients = result.solution.coefficients

        grid = error_grid(self.domain.half_width, self.config.grid_size)
        inside = contains_batch(self.domain, grid)
        errors = np.full(grid.shape[0], settings.ERROR_MAP_SENTINEL)
        if inside.any():
            approx = evaluate_approximant(coefficients, point.index_set, self.basis, grid[inside])
            errors[inside] = np.abs(target(grid[inside]) - approx)

        max_error = float(errors[inside].max()) if inside.any() else 0.0
        record = self.base_record(point, trial, linf_error=max_error,
                                  coefficient_norm=coefficient_l2_norm(result.solution))
        return TrialOutcome(schedule_index=schedule_index, trial=trial, records=[record], extras={
            "grid": grid, "inside": inside, "errors": errors, "fit": result,
        })

    def aggregate(self, outcomes) -> ExperimentResult:
        outcome = outcomes[0]
        summarize_point(outcome.schedule_index, outcomes)
        grid, inside, errors = outcome.extras["grid"], outcome.extras["inside"], outcome.extras["errors"]
        record = outcome.records[0]
        rows = [
            ErrorMapRow(y1=float(y[0]), y2=float(y[1]), inside=bool(flag), abs_error=float(e),
                        trial=record.trial, seed=record.seed, config_hash=self.config_hash)
            for y, flag, e in zip(grid, inside, errors)
        ]
        return ExperimentResult(rows=rows, records=list(outcome.records), extras={
            "fit": outcome.extras["fit"],
            "max_abs_error": outcome.records[0].linf_error,
            "outside_count": int((~inside).sum()),
        })

    def write(self, result: ExperimentResult) -> ExperimentResult:
        super().write(result)
        record = result.records[0]
        artifact = {
            "config_hash": self.config_hash, "seed": record.seed,
            "n": record.n, "N": record.N, "M": record.M,
            "max_abs_error": result.extras["max_abs_error"],
            "solution": result.extras["fit"].to_dict(),
        }
        result.paths.append(self.store.write_json(f"{self.config.run_name()}_fit.json", artifact))
        return result


def run_error_map(config: ExperimentConfig, store: Optional[ResultStore] = None,
                  scheduler: Optional[TrialScheduler] = None) -> ExperimentResult:
    """|f - f_eps| on a uniform grid, sentinel outside Omega."""
    return ErrorMapDriver(config, store, scheduler).run()
