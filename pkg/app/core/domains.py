"""
Irregular domains inside the bounding box D = (-T, T)^d: membership,
rejection sampling from restricted measures, and analytic metadata.
"""
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import comb, gamma

from app.core.config import settings
from app.core.errors import DomainError, ParameterError, SamplingError, ShapeError
from app.core.schemas import DomainKind, DomainSpec, Measure
from app.core.targets import closed_form
from app.core.utils import RNG_ALGORITHM, log_event, logger, make_generator

Proposal = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class SampleSet:
    """M points drawn i.i.d. from a measure restricted to a domain."""
    points: np.ndarray
    measure: Measure
    seed: int
    domain: DomainSpec
    proposals: int

    def __post_init__(self):
        self.points.setflags(write=False)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def acceptance_rate(self) -> float:
        return self.size / self.proposals if self.proposals else 0.0


@dataclass(frozen=True)
class VolumeEstimate:
    """Monte-Carlo estimate of nu(Omega) with its binomial standard error."""
    fraction: float
    standard_error: float
    samples: int


def _as_batch(domain: DomainSpec, points) -> np.ndarray:
    batch = np.atleast_2d(np.asarray(points, dtype=float))
    if batch.shape[1] != domain.dimension:
        raise ShapeError(f"points have dimension {batch.shape[1]}, domain has {domain.dimension}")
    limit = domain.half_width
    if np.any(np.abs(batch) > limit):
        bad = batch[np.any(np.abs(batch) > limit, axis=1)][0]
        raise DomainError(f"point {bad.tolist()} lies outside the bounding box (-{limit:g}, {limit:g})^{domain.dimension}")
    return batch


def _mandelbrot(batch: np.ndarray) -> np.ndarray:
    c = (1.25 * batch[:, 0] - 0.75) + 1j * (1.15 * batch[:, 1])
    z = np.zeros_like(c)
    alive = np.ones(c.shape, dtype=bool)
    radius = settings.MANDELBROT_ESCAPE_RADIUS
    for _ in range(settings.MANDELBROT_MAX_ITER):
        z[alive] = z[alive] ** 2 + c[alive]
        alive &= np.abs(z) <= radius
        if not alive.any():
            break
    return alive


def contains_batch(domain: DomainSpec, points) -> np.ndarray:
    """Vectorized membership of a (P, d) batch; raises DomainError outside D."""
    y = _as_batch(domain, points)
    kind = domain.kind
    inner_box = np.all(np.abs(y) <= 1.0, axis=1)

    if kind == DomainKind.FULL_BOX:
        return np.ones(y.shape[0], dtype=bool)
    if kind == DomainKind.L_SHAPE:
        inside = ~((y[:, 0] > 0) & (y[:, 1] > 0))
    elif kind == DomainKind.LINEAR_CONSTRAINT:
        inside = y[:, 0] + y[:, 1] <= 1.0
    elif kind == DomainKind.DISC_EXCLUSION:
        inside = y[:, 0] ** 2 + y[:, 1] ** 2 >= domain.rho
    elif kind in (DomainKind.CIRCLE, DomainKind.UNIT_BALL):
        radius = 1.0 if kind == DomainKind.UNIT_BALL else domain.radius
        inside = np.linalg.norm(y, axis=1) <= radius
    elif kind == DomainKind.ANNULUS:
        norms = np.linalg.norm(y, axis=1)
        inside = (norms >= domain.inner_radius) & (norms <= domain.outer_radius)
    elif kind == DomainKind.CORNER:
        inside = y.sum(axis=1) <= 1.0
    elif kind == DomainKind.NORM_EXCLUSION:
        inside = np.linalg.norm(y, axis=1) >= domain.radius
    elif kind == DomainKind.IMPLICIT_NONNEG:
        with np.errstate(invalid="ignore"):
            inside = closed_form(domain.function_id)(y) >= 0
    elif kind == DomainKind.MANDELBROT:
        inside = _mandelbrot(y)
    elif kind == DomainKind.SLAB:
        inside = (y[:, 0] >= domain.lower) & (y[:, 0] <= domain.upper)
    else:
        raise ParameterError(f"unknown domain kind {kind}")
    return inside & inner_box


def contains(domain: DomainSpec, point) -> bool:
    """Membership of a single d-vector."""
    point = np.asarray(point, dtype=float)
    if point.ndim != 1:
        raise ShapeError("contains expects a single d-vector; use contains_batch for batches")
    return bool(contains_batch(domain, point)[0])


def _ball_fraction(radius: float, d: int) -> Optional[float]:
    if radius > 1.0:
        return None
    volume = math.pi ** (d / 2) * radius ** d / gamma(d / 2 + 1)
    return float(volume / 2 ** d)


def _irwin_hall_cdf(x: float, d: int) -> float:
    total = sum((-1) ** k * comb(d, k, exact=True) * (x - k) ** d for k in range(int(math.floor(x)) + 1))
    return float(total / math.factorial(d))


def analytic_volume_fraction(domain: DomainSpec) -> Optional[float]:
    """Vol(Omega)/Vol(D) where elementary geometry gives it; None otherwise."""
    kind, d = domain.kind, domain.dimension
    if kind == DomainKind.FULL_BOX:
        return 1.0
    if kind == DomainKind.L_SHAPE:
        fraction = 0.75
    elif kind == DomainKind.LINEAR_CONSTRAINT:
        fraction = 7.0 / 8.0
    elif kind == DomainKind.DISC_EXCLUSION:
        fraction = 1.0 - math.pi * domain.rho / 4.0 if domain.rho <= 1.0 else None
    elif kind in (DomainKind.CIRCLE, DomainKind.UNIT_BALL):
        fraction = _ball_fraction(1.0 if kind == DomainKind.UNIT_BALL else domain.radius, d)
    elif kind == DomainKind.ANNULUS:
        outer = _ball_fraction(domain.outer_radius, d)
        fraction = None if outer is None else outer - _ball_fraction(domain.inner_radius, d)
    elif kind == DomainKind.NORM_EXCLUSION:
        ball = _ball_fraction(domain.radius, d)
        fraction = None if ball is None else 1.0 - ball
    elif kind == DomainKind.CORNER:
        # (y_i + 1)/2 are uniform on (0,1): Irwin-Hall CDF at (d + 1)/2.
        fraction = _irwin_hall_cdf((d + 1) / 2.0, d)
    elif kind == DomainKind.SLAB:
        fraction = (domain.upper - domain.lower) / 2.0
    else:
        fraction = None
    if fraction is None:
        return None
    return fraction / domain.half_width ** d


def lambda_rectangle_constant(domain: DomainSpec) -> Optional[float]:
    """lambda of the lambda-rectangle property where it is known.

    Balls, annuli and the Mandelbrot set lack the property; exclusion and
    corner domains in general position are not tabulated.
    """
    kind = domain.kind
    if kind in (DomainKind.FULL_BOX, DomainKind.SLAB):
        return 1.0
    if kind == DomainKind.L_SHAPE:
        # Two 1x2 rectangles of area 2 cover an area of 3.
        return 2.0 / 3.0
    if kind == DomainKind.LINEAR_CONSTRAINT:
        return 4.0 / 7.0
    if kind == DomainKind.CORNER and domain.dimension == 2:
        return 4.0 / 7.0
    return None


def _uniform_proposal(d: int, half_width: float) -> Proposal:
    return lambda rng, size: rng.uniform(-half_width, half_width, size=(size, d))


def _chebyshev_proposal(d: int, half_width: float) -> Proposal:
    return lambda rng, size: half_width * np.cos(np.pi * rng.random((size, d)))


def _proposal(domain: DomainSpec, measure: Measure) -> Proposal:
    if Measure(measure) == Measure.CHEBYSHEV:
        return _chebyshev_proposal(domain.dimension, domain.half_width)
    return _uniform_proposal(domain.dimension, domain.half_width)


def _rejection_sample(domain: DomainSpec, count: int, seed: int, measure: Measure) -> SampleSet:
    if count < 1:
        raise ParameterError(f"sample count must be >= 1, got {count}")
    propose = _proposal(domain, measure)
    rng = make_generator(seed)
    block = settings.REJECTION_BLOCK_SIZE
    cap = settings.REJECTION_CAP_FACTOR * count

    kept = []
    accepted = 0
    proposals = 0
    while accepted < count:
        if proposals >= cap:
            rate = accepted / proposals if proposals else 0.0
            log_event("sampling_failed", {
                "domain": domain.descriptor(), "requested": count,
                "accepted": accepted, "proposals": proposals, "acceptance_rate": rate,
            }, level="ERROR")
            raise SamplingError(
                f"rejection sampling on {domain.descriptor()} accepted {accepted} of {proposals} "
                f"proposals (rate {rate:.3g}); cap of {cap} reached",
                acceptance_rate=rate,
            )
        candidates = propose(rng, block)
        mask = contains_batch(domain, candidates)
        hits = np.flatnonzero(mask)
        needed = count - accepted
        if hits.size >= needed:
            kept.append(candidates[hits[:needed]])
            proposals += int(hits[needed - 1]) + 1
            accepted = count
        else:
            kept.append(candidates[hits])
            proposals += block
            accepted += hits.size

    points = np.concatenate(kept, axis=0)
    log_event("samples_drawn", {
        "domain": domain.descriptor(), "measure": Measure(measure).value, "M": count,
        "seed": seed, "rng": RNG_ALGORITHM, "acceptance_rate": count / proposals,
    }, level="DEBUG")
    return SampleSet(points=points, measure=Measure(measure), seed=seed, domain=domain, proposals=proposals)


def draw_uniform_samples(domain: DomainSpec, count: int, seed: int) -> SampleSet:
    """I.i.d. uniform samples on Omega by rejection from uniform proposals on D."""
    return _rejection_sample(domain, count, seed, Measure.UNIFORM)


def draw_chebyshev_samples(domain: DomainSpec, count: int, seed: int) -> SampleSet:
    """I.i.d. samples from the tensor Chebyshev density restricted to Omega."""
    return _rejection_sample(domain, count, seed, Measure.CHEBYSHEV)


def draw_samples(domain: DomainSpec, count: int, seed: int, measure: Measure = Measure.UNIFORM) -> SampleSet:
    if Measure(measure) == Measure.CHEBYSHEV:
        return draw_chebyshev_samples(domain, count, seed)
    return draw_uniform_samples(domain, count, seed)


def estimate_volume_fraction(domain: DomainSpec, count: int, seed: int,
                             measure: Measure = Measure.UNIFORM) -> VolumeEstimate:
    """Monte-Carlo mean of the indicator of Omega under nu."""
    if count < 1:
        raise ParameterError(f"sample count must be >= 1, got {count}")
    rng = make_generator(seed)
    propose = _proposal(domain, measure)
    hits = 0
    block = settings.REJECTION_BLOCK_SIZE
    remaining = count
    while remaining > 0:
        size = min(block, remaining)
        hits += int(contains_batch(domain, propose(rng, size)).sum())
        remaining -= size
    fraction = hits / count
    standard_error = math.sqrt(fraction * (1.0 - fraction) / count)
    return VolumeEstimate(fraction=fraction, standard_error=standard_error, samples=count)


def volume_fraction(domain: DomainSpec, seed: int = 0, count: Optional[int] = None) -> float:
    """Analytic fraction when known, otherwise a Monte-Carlo estimate."""
    analytic = analytic_volume_fraction(domain)
    if analytic is not None:
        return analytic
    estimate = estimate_volume_fraction(domain, count or settings.GRAM_POINTS, seed)
    logger.debug(f"volume fraction of {domain.descriptor()} estimated as {estimate.fraction:.4f}")
    return estimate.fraction
