"""
Conditioning constants, Nikolskii-constant estimates, and sample-complexity
formulas for polynomial frame approximation.
"""
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
import scipy.linalg
from numpy.polynomial.legendre import leggauss

from app.core.config import settings
from app.core.domains import SampleSet, draw_samples
from app.core.errors import NumericError, ParameterError, ShapeError
from app.core.framesolver import DesignMatrix, SvdFactors, factorize
from app.core.indexsets import MultiIndexSet
from app.core.polybasis import LEGENDRE, tensor_basis_eval
from app.core.schemas import BasisKind, BasisSpec, ConditionReport, DomainKind, DomainSpec, Measure
from app.core.utils import POOL_STREAM, log_event, logger


@dataclass(frozen=True)
class MonteCarloGram:
    """H with rows phi_n(z_k)/sqrt(K); H*H estimates the Gram matrix on Omega."""
    matrix: np.ndarray
    samples: SampleSet
    index_set: MultiIndexSet
    basis: BasisSpec

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def seed(self) -> int:
        return self.samples.seed

    def gram(self) -> np.ndarray:
        return self.matrix.T @ self.matrix


@dataclass(frozen=True)
class NikolskiiEstimate:
    """Sampled sup of sqrt(Phi(y)* G^-1 Phi(y)), a lower bound of the constant."""
    value: float
    candidates: int
    regularized: bool


def monte_carlo_gram(domain: DomainSpec, index_set: MultiIndexSet, basis: BasisSpec = LEGENDRE,
                     count: Optional[int] = None, seed: int = 0,
                     measure: Measure = Measure.UNIFORM) -> MonteCarloGram:
    """Draw K points from mu and form H = (phi_n(z_k)/sqrt(K))."""
    count = settings.GRAM_POINTS if count is None else int(count)
    if count < len(index_set):
        logger.warning(f"Gram estimate uses K={count} points for N={len(index_set)} functions; "
                       "H*H will be singular")
    samples = draw_samples(domain, count, seed, measure)
    matrix = tensor_basis_eval(index_set, samples.points, basis) / np.sqrt(count)
    matrix.setflags(write=False)
    return MonteCarloGram(matrix=matrix, samples=samples, index_set=index_set, basis=basis)


def _gram_matrix(h: Union[MonteCarloGram, np.ndarray]) -> np.ndarray:
    return h.matrix if isinstance(h, MonteCarloGram) else np.asarray(h, dtype=float)


def _factors(a: Union[DesignMatrix, np.ndarray, SvdFactors]) -> SvdFactors:
    return a if isinstance(a, SvdFactors) else factorize(a)


def c_upsilon_lambda(a: Union[DesignMatrix, np.ndarray, SvdFactors],
                     h: Union[MonteCarloGram, np.ndarray]) -> float:
    """sqrt of the largest generalized eigenvalue of (H*H, A*A).

    Whitening A*A through its SVD turns this into ||H V S^-1||_2; a rank
    deficient A gives infinity.
    """
    factors = _factors(a)
    hm = _gram_matrix(h)
    if hm.shape[1] != factors.n_columns:
        raise ShapeError(f"H has {hm.shape[1]} columns, A has {factors.n_columns}")
    padded = factors.padded_singular_values()
    if padded[0] == 0 or padded[-1] <= settings.RANK_TOLERANCE * padded[0]:
        return float("inf")
    whitened = (hm @ factors.v_complete) / padded
    return float(np.linalg.norm(whitened, 2))


def condition_constants(a: Union[DesignMatrix, np.ndarray, SvdFactors], epsilon: float,
                        h: Union[MonteCarloGram, np.ndarray]) -> ConditionReport:
    """C' ~ ||H V Sigma_eps^+||_2 and C'' ~ ||H V I_eps^perp||_2 / eps."""
    if epsilon < 0:
        raise ParameterError(f"epsilon must be >= 0, got {epsilon}")
    factors = _factors(a)
    hm = _gram_matrix(h)
    if hm.shape[1] != factors.n_columns:
        raise ShapeError(f"H has {hm.shape[1]} columns, A has {factors.n_columns}")

    sigma = factors.padded_singular_values()
    keep = sigma > epsilon
    hv = hm @ factors.v_complete

    c_prime = float(np.linalg.norm(hv[:, keep] / sigma[keep], 2)) if keep.any() else 0.0
    if keep.all():
        c_double_prime = 0.0
    elif epsilon == 0:
        # The unregularized mapping has no C'' term.
        logger.warning("epsilon = 0 with a singular design matrix; reporting C'' = 0")
        c_double_prime = 0.0
    else:
        c_double_prime = float(np.linalg.norm(hv[:, ~keep], 2) / epsilon)

    unregularized = c_upsilon_lambda(factors, hm)
    report = ConditionReport(
        c_prime=c_prime,
        c_double_prime=c_double_prime,
        c_max=max(c_prime, c_double_prime),
        c_unregularized=unregularized,
        epsilon=float(epsilon),
        retained_rank=int(keep.sum()),
        sigma_min=float(sigma[-1]),
        sigma_max=float(sigma[0]),
        gram_sample_count=hm.shape[0],
        seed=h.seed if isinstance(h, MonteCarloGram) else None,
    )
    log_event("condition_constants_computed", {
        "epsilon": epsilon, "c_prime": c_prime, "c_double_prime": c_double_prime,
        "retained_rank": report.retained_rank, "K": hm.shape[0],
    }, level="DEBUG")
    return report


def universal_cap(volume_fraction: float, epsilon: float) -> float:
    """1 / (sqrt(v_Omega) eps), the worst-case size of C_{Y,Lambda,eps}."""
    if volume_fraction <= 0 or epsilon <= 0:
        return float("inf")
    return 1.0 / (math.sqrt(volume_fraction) * epsilon)


def constant_spread(a: Union[DesignMatrix, np.ndarray, SvdFactors], epsilon: float,
                    h: Union[MonteCarloGram, np.ndarray]) -> float:
    """Relative Monte-Carlo standard error of C_{Y,Lambda,eps} from a K-point Gram estimate.

    Measured along the direction attaining the constant: the top right
    singular vector of H V Sigma_eps^+ or of H V I_eps^perp / eps.
    """
    factors = _factors(a)
    hm = _gram_matrix(h)
    sigma = factors.padded_singular_values()
    keep = sigma > epsilon
    hv = hm @ factors.v_complete
    blocks = []
    if keep.any():
        blocks.append(hv[:, keep] / sigma[keep])
    if (~keep).any() and epsilon > 0:
        blocks.append(hv[:, ~keep] / epsilon)
    best, best_norm = None, -1.0
    for block in blocks:
        _, s, vt = np.linalg.svd(block, full_matrices=False)
        if s[0] > best_norm:
            best, best_norm = block @ vt[0], s[0]
    if best is None or best_norm == 0:
        return 0.0
    k = hm.shape[0]
    squared = (best * math.sqrt(k)) ** 2
    # Half the relative error of the squared norm.
    return float(squared.std(ddof=1) / (math.sqrt(k) * squared.mean()) / 2.0)


def _gram_inverse_form(gram: np.ndarray) -> Tuple[Callable[[np.ndarray], np.ndarray], bool]:
    """Map Phi to diag(Phi G^-1 Phi*): Cholesky when well conditioned, else a clipped eigen-inverse."""
    eigenvalues = scipy.linalg.eigvalsh(gram)
    condition = eigenvalues[-1] / eigenvalues[0] if eigenvalues[0] > 0 else np.inf
    if condition <= settings.GRAM_CONDITION_LIMIT:
        try:
            factor = scipy.linalg.cho_factor(gram, lower=True)
            return (lambda phi: np.einsum("ij,ji->i", phi, scipy.linalg.cho_solve(factor, phi.T))), False
        except np.linalg.LinAlgError:
            pass
    logger.warning(f"Gram estimate is ill-conditioned (cond={condition:.3g}); using a regularized inverse")
    w, q = scipy.linalg.eigh(gram)
    w = np.maximum(w, w[-1] / settings.GRAM_CONDITION_LIMIT)
    return (lambda phi: np.sum((phi @ q) ** 2 / w, axis=1)), True


def nikolskii_constant_estimate(domain: DomainSpec, index_set: MultiIndexSet, basis: BasisSpec = LEGENDRE,
                                pool_points: Optional[int] = None, seed: int = 0,
                                gram: Optional[MonteCarloGram] = None,
                                measure: Measure = Measure.UNIFORM) -> NikolskiiEstimate:
    """Max over candidate points of sqrt(Phi(y)* G^-1 Phi(y)).

    Candidates are the Gram points plus a fresh pool drawn from seed ^ POOL_STREAM.
    """
    pool_points = settings.NIKOLSKII_POOL_POINTS if pool_points is None else int(pool_points)
    gram = gram or monte_carlo_gram(domain, index_set, basis, seed=seed, measure=measure)
    pool = draw_samples(domain, pool_points, seed ^ POOL_STREAM, measure)
    candidates = np.concatenate([gram.samples.points, pool.points], axis=0)

    inverse_form, regularized = _gram_inverse_form(gram.gram())
    best = 0.0
    for start in range(0, candidates.shape[0], 8192):
        phi = tensor_basis_eval(index_set, candidates[start:start + 8192], basis)
        best = max(best, float(np.sqrt(np.max(inverse_form(phi)))))
    log_event("nikolskii_estimated", {
        "domain": domain.descriptor(), "N": len(index_set), "estimate": best,
        "candidates": candidates.shape[0], "regularized": regularized,
    }, level="DEBUG")
    return NikolskiiEstimate(value=best, candidates=candidates.shape[0], regularized=regularized)


def chernoff_exponent(delta: float) -> float:
    """(1 - delta) log(1 - delta) + delta."""
    if not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    return (1 - delta) * math.log(1 - delta) + delta


def sample_complexity_bound(n_basis: int, delta: float, gamma: float,
                            lambda_constant: Optional[float] = None,
                            nikolskii_squared: Optional[float] = None) -> int:
    """Smallest M guaranteeing C_{Y,Lambda} <= 1/sqrt(1-delta) with probability 1-gamma.

    With lambda: N^2 / lambda; with a Nikolskii constant: its square; each
    times log(N/gamma) / ((1-delta) log(1-delta) + delta).
    """
    if not 0 < gamma < 1:
        raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")
    if n_basis < 1:
        raise ParameterError("N must be >= 1")
    if (lambda_constant is None) == (nikolskii_squared is None):
        raise ParameterError("give exactly one of lambda_constant or nikolskii_squared")
    if lambda_constant is not None:
        if not 0 < lambda_constant <= 1:
            raise ParameterError(f"lambda must lie in (0, 1], got {lambda_constant}")
        leading = n_basis ** 2 / lambda_constant
    else:
        if nikolskii_squared <= 0:
            raise ParameterError("Nikolskii constant must be positive")
        leading = nikolskii_squared
    return math.ceil(leading / chernoff_exponent(delta) * math.log(n_basis / gamma))


def chernoff_failure_probability(n_basis: int, samples: int, nikolskii_squared: float, delta: float) -> float:
    """N exp(-M c_delta / Nik^2), the matrix Chernoff tail for lambda_min <= 1 - delta."""
    return min(1.0, n_basis * math.exp(-samples * chernoff_exponent(delta) / nikolskii_squared))


def _chebyshev_value(degree: int, x: float) -> float:
    previous, current = 1.0, x
    if degree == 0:
        return previous
    for _ in range(degree - 1):
        previous, current = current, 2 * x * current - previous
    return current


def cond_lower_bound_1d(n_basis: int, omega_length: float) -> float:
    """T_{N-1}(4/|Omega| - 1) / N^2, a sample-independent lower bound on cond(A) in 1-D."""
    if n_basis < 1:
        raise ParameterError("N must be >= 1")
    if not 0 < omega_length <= 2:
        raise ParameterError(f"|Omega| must lie in (0, 2], got {omega_length}")
    return _chebyshev_value(n_basis - 1, 4.0 / omega_length - 1.0) / n_basis ** 2


def _gauss_box(lower: np.ndarray, upper: np.ndarray, q: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre nodes on a box with weights summing to its volume."""
    nodes_1d, weights_1d = leggauss(q)
    axes, weights = [], []
    for lo, hi in zip(lower, upper):
        half = (hi - lo) / 2.0
        axes.append(lo + half * (nodes_1d + 1.0))
        weights.append(half * weights_1d)
    grids = np.meshgrid(*axes, indexing="ij")
    wgrids = np.meshgrid(*weights, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    w = np.ones(nodes.shape[0])
    for g in wgrids:
        w *= g.ravel()
    return nodes, w


def _rectangle_partition(domain: DomainSpec) -> List[Tuple[np.ndarray, np.ndarray]]:
    d = domain.dimension
    full = (-np.ones(d), np.ones(d))
    if domain.kind == DomainKind.FULL_BOX:
        t = domain.half_width
        return [(-t * np.ones(d), t * np.ones(d))]
    if domain.kind == DomainKind.SLAB:
        lower, upper = full[0].copy(), full[1].copy()
        lower[0], upper[0] = domain.lower, domain.upper
        return [(lower, upper)]
    if domain.kind == DomainKind.L_SHAPE:
        # {y1 <= 0} and {y1 > 0, y2 <= 0}, disjoint.
        left_hi = full[1].copy()
        left_hi[0] = 0.0
        right_lo, right_hi = full[0].copy(), full[1].copy()
        right_lo[0], right_hi[1] = 0.0, 0.0
        return [(full[0].copy(), left_hi), (right_lo, right_hi)]
    raise ParameterError(f"no rectangle partition for {domain.kind.value}")


def exact_gram(domain: DomainSpec, index_set: MultiIndexSet, basis: BasisSpec = LEGENDRE,
               q: Optional[int] = None) -> np.ndarray:
    """Gram matrix <phi_m, phi_n>_{L2(Omega, mu)} for uniform mu.

    Computed by tensor Gauss-Legendre quadrature on a disjoint rectangle
    partition of Omega (full box, slab, L-shape). Exact for polynomial
    bases once q >= max degree + 1.
    """
    if basis.kind == BasisKind.CHEBYSHEV:
        raise ParameterError("exact_gram supports the uniform measure only")
    q = q or index_set.max_degree() + settings.QUADRATURE_MARGIN
    pieces = _rectangle_partition(domain)
    gram = np.zeros((len(index_set), len(index_set)))
    volume = 0.0
    for lower, upper in pieces:
        nodes, weights = _gauss_box(lower, upper, q)
        phi = tensor_basis_eval(index_set, nodes, basis)
        gram += phi.T @ (weights[:, None] * phi)
        volume += weights.sum()
    if volume <= 0:
        raise NumericError("rectangle partition has zero volume")
    return gram / volume
