"""
Resolve an experiment schedule into concrete (n, N, M) points.
"""
import math
from dataclasses import dataclass
from typing import List, Optional

from app.core.diagnostics import monte_carlo_gram, nikolskii_constant_estimate, sample_complexity_bound
from app.core.domains import lambda_rectangle_constant
from app.core.errors import ConfigError
from app.core.indexsets import MultiIndexSet, cardinality, index_set, largest_n_for_budget, samples_for
from app.core.config import settings
from app.core.schemas import ExperimentConfig, Measure, OversamplingRule, RuleKind, ScheduleMode
from app.core.utils import SCHEDULE_STREAM, log_event, split_seed


@dataclass(frozen=True)
class SchedulePoint:
    """One sweep position: index set, sample count and the rule that produced it."""
    index: int
    n: int
    index_set: MultiIndexSet
    samples: int
    rule: OversamplingRule

    @property
    def n_basis(self) -> int:
        return len(self.index_set)


def trial_seed(config: ExperimentConfig, schedule_index: int, trial: int) -> int:
    """seed XOR (s * trials + t)."""
    return split_seed(config.seed, schedule_index * config.trials + trial)


def _known_lambda(config: ExperimentConfig) -> Optional[float]:
    if config.measure != Measure.UNIFORM:
        return None
    return lambda_rectangle_constant(config.domain)


def chernoff_samples(config: ExperimentConfig, lam: MultiIndexSet) -> int:
    """M from the sample-complexity bound: lambda when tabulated, else a Nikolskii estimate."""
    delta, gamma = config.bounds.delta, config.bounds.gamma
    known = _known_lambda(config)
    if known is not None:
        return sample_complexity_bound(len(lam), delta, gamma, lambda_constant=known)
    gram = monte_carlo_gram(config.domain, lam, config.basis, config.gram_points,
                            config.seed ^ SCHEDULE_STREAM, config.measure)
    estimate = nikolskii_constant_estimate(config.domain, lam, config.basis, seed=config.seed ^ SCHEDULE_STREAM,
                                           gram=gram, measure=config.measure)
    return sample_complexity_bound(len(lam), delta, gamma, nikolskii_squared=estimate.value ** 2)


def _chernoff_degree_for_budget(config: ExperimentConfig, budget: int) -> int:
    kind, d = config.index_set, config.domain.dimension
    best, n = 0, 0
    while cardinality(kind, n, d) <= settings.CARDINALITY_CAP:
        if chernoff_samples(config, index_set(kind, n, d)) > budget:
            break
        best = n
        n += 1
    return best


def resolve_schedule(config: ExperimentConfig) -> List[SchedulePoint]:
    """Rules outermost, schedule values innermost; indices count up from 0."""
    kind, d = config.index_set, config.domain.dimension
    points = []
    for rule in config.schedule.rules:
        for value in config.schedule.values:
            if config.schedule.mode == ScheduleMode.DEGREE:
                n = value
                lam = index_set(kind, n, d)
                if rule.kind == RuleKind.CHERNOFF:
                    m = chernoff_samples(config, lam)
                else:
                    m = samples_for(len(lam), rule)
            else:
                if value < 1:
                    raise ConfigError("budget schedules need M >= 1")
                m = value
                if rule.kind == RuleKind.CHERNOFF:
                    n = _chernoff_degree_for_budget(config, m)
                else:
                    n = largest_n_for_budget(kind, d, m, rule)
                lam = index_set(kind, n, d)
            points.append(SchedulePoint(index=len(points), n=n, index_set=lam, samples=m, rule=rule))

    log_event("schedule_resolved", {
        "experiment": config.experiment.value,
        "points": [(p.n, p.n_basis, p.samples, p.rule.label()) for p in points],
    }, level="DEBUG")
    return points


def oversampling_ratio(point: SchedulePoint) -> float:
    return point.samples / point.n_basis if point.n_basis else math.inf
