"""
Orthonormal tensor bases on the bounding box D, Sobolev weights, and
projection coefficients by tensor quadrature.

All families are orthonormal with respect to the probability measure nu on D:
uniform on (-1,1) for Legendre, arcsine for Chebyshev, uniform on (-T,T)
for cosine.
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from app.core.config import settings
from app.core.errors import DomainError, ParameterError, ShapeError
from app.core.indexsets import MultiIndexSet
from app.core.schemas import BasisKind, BasisSpec, SobolevKind, SobolevWeightSpec
from app.core.utils import logger

LEGENDRE = BasisSpec(kind=BasisKind.LEGENDRE)
CHEBYSHEV = BasisSpec(kind=BasisKind.CHEBYSHEV)

# Rows of f evaluations per quadrature chunk.
_CHUNK_ROWS = 16_384


def _check_box(y: np.ndarray, half_width: float, what: str):
    outside = np.abs(y) > half_width * (1 + 1e-14)
    if np.any(outside):
        if settings.STRICT_BASIS_EVALUATION:
            raise DomainError(f"{what}: {int(outside.sum())} coordinates outside (-{half_width:g}, {half_width:g})")
        logger.warning(f"{what}: evaluating {int(outside.sum())} coordinates outside the bounding box")


def legendre_table(max_degree: int, y) -> np.ndarray:
    """Orthonormal Legendre values sqrt(2n+1) P_n(y) for n = 0..max_degree.

    Returns shape (len(y), max_degree + 1).
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    table = np.empty((y.size, max_degree + 1))
    table[:, 0] = 1.0
    if max_degree >= 1:
        table[:, 1] = y
    for k in range(1, max_degree):
        table[:, k + 1] = ((2 * k + 1) * y * table[:, k] - k * table[:, k - 1]) / (k + 1)
    table *= np.sqrt(2 * np.arange(max_degree + 1) + 1)
    return table


def chebyshev_table(max_degree: int, y) -> np.ndarray:
    """Orthonormal Chebyshev values: 1, then sqrt(2) T_n(y)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    table = np.empty((y.size, max_degree + 1))
    table[:, 0] = 1.0
    if max_degree >= 1:
        table[:, 1] = y
    for k in range(1, max_degree):
        table[:, k + 1] = 2 * y * table[:, k] - table[:, k - 1]
    table[:, 1:] *= np.sqrt(2.0)
    return table


def cosine_table(max_degree: int, y, half_width: float = 1.0) -> np.ndarray:
    """Orthonormal cosines: 1, then sqrt(2) cos(n pi (y + T) / (2T))."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    phase = np.pi * (y + half_width) / (2 * half_width)
    table = np.cos(np.outer(phase, np.arange(max_degree + 1)))
    table[:, 1:] *= np.sqrt(2.0)
    return table


def basis_table(basis: BasisSpec, max_degree: int, y) -> np.ndarray:
    """1-D table of degrees 0..max_degree for the given family."""
    if max_degree < 0:
        raise ParameterError("degree must be >= 0")
    if basis.kind == BasisKind.LEGENDRE:
        return legendre_table(max_degree, y)
    if basis.kind == BasisKind.CHEBYSHEV:
        return chebyshev_table(max_degree, y)
    return cosine_table(max_degree, y, basis.half_width)


def _evaluate_1d(basis: BasisSpec, n: int, y, what: str):
    if n < 0:
        raise ParameterError(f"{what}: degree must be >= 0, got {n}")
    values = np.atleast_1d(np.asarray(y, dtype=float))
    _check_box(values, basis.half_width, what)
    column = basis_table(basis, n, values)[:, n]
    return float(column[0]) if np.ndim(y) == 0 else column


def legendre_1d(n: int, y):
    """sqrt(2n+1) P_n(y) via the three-term recurrence."""
    return _evaluate_1d(LEGENDRE, n, y, "legendre_1d")


def chebyshev_1d(n: int, y):
    """Orthonormal Chebyshev value w.r.t. the arcsine probability measure."""
    return _evaluate_1d(CHEBYSHEV, n, y, "chebyshev_1d")


def cosine_1d(n: int, y, half_width: float = 1.0):
    """Orthonormal cosine on (-T, T)."""
    if half_width < 1:
        raise ParameterError("cosine half-width T must be >= 1")
    return _evaluate_1d(BasisSpec(kind=BasisKind.COSINE, half_width=half_width), n, y, "cosine_1d")


def tensor_basis_eval(index_set: MultiIndexSet, points, basis: BasisSpec = LEGENDRE) -> np.ndarray:
    """Evaluate prod_k psi_{n_k}(y_k) for every index in canonical order.

    A single d-vector gives an N-vector; a (P, d) batch gives a (P, N) matrix.
    """
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    batch = np.atleast_2d(points)
    if batch.shape[1] != index_set.dimension:
        raise ShapeError(
            f"points have dimension {batch.shape[1]}, index set has dimension {index_set.dimension}"
        )
    _check_box(batch, basis.half_width, "tensor_basis_eval")

    values = np.ones((batch.shape[0], len(index_set)))
    degrees = index_set.coordinate_degrees()
    for k in range(index_set.dimension):
        table = basis_table(basis, int(degrees[k]), batch[:, k])
        values *= table[:, index_set.indices[:, k]]
    return values[0] if single else values


def sobolev_weight(index: Sequence[int], spec: SobolevWeightSpec) -> float:
    """Weight chi for an index: sum over j of prod_k (n_k (n_k + 1))^{j_k}.

    Classical sums over |j|_1 <= m, mixed over |j|_inf <= m; 0^0 = 1.
    """
    m = spec.order
    eigen = [float(int(e) * (int(e) + 1)) for e in index]
    if spec.kind == SobolevKind.MIXED:
        return float(np.prod([sum(lam ** j for j in range(m + 1)) for lam in eigen]))
    # terms[t] sums the products with |j|_1 = t.
    terms = np.zeros(m + 1)
    terms[0] = 1.0
    for lam in eigen:
        powers = lam ** np.arange(m + 1)
        terms = np.convolve(terms, powers)[:m + 1]
    return float(terms.sum())


def sobolev_norm(coefficients: np.ndarray, index_set: MultiIndexSet, spec: SobolevWeightSpec) -> float:
    """sqrt(sum chi_n |c_n|^2), the coefficient form of the Sobolev norm."""
    weights = np.array([sobolev_weight(row, spec) for row in index_set.indices])
    return float(np.sqrt(np.sum(weights * np.abs(coefficients) ** 2)))


def quadrature_1d(basis: BasisSpec, q: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and probability weights matched to the basis measure."""
    if q < 1:
        raise ParameterError("quadrature order must be >= 1")
    if basis.kind == BasisKind.LEGENDRE:
        nodes, weights = leggauss(q)
        return nodes, weights / 2.0
    if basis.kind == BasisKind.CHEBYSHEV:
        k = np.arange(1, q + 1)
        return np.cos((2 * k - 1) * np.pi / (2 * q)), np.full(q, 1.0 / q)
    # Composite trapezoid with q intervals; exact for cosine products up to
    # combined frequency 2q - 1.
    t = basis.half_width
    nodes = np.linspace(-t, t, q + 1)
    weights = np.full(q + 1, 1.0 / q)
    weights[[0, -1]] = 0.5 / q
    return nodes, weights


def quadrature_rule(basis: BasisSpec, q: int, d: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor rule: (P, d) nodes and P weights summing to one."""
    nodes_1d, weights_1d = quadrature_1d(basis, q)
    grids = np.meshgrid(*([nodes_1d] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.ones(nodes.shape[0])
    for w in np.meshgrid(*([weights_1d] * d), indexing="ij"):
        weights *= w.ravel()
    return nodes, weights


def required_order(index_set: MultiIndexSet, basis: BasisSpec) -> int:
    """Smallest order integrating products of two basis functions exactly."""
    return index_set.max_degree() + 1


def default_order(index_set: MultiIndexSet) -> int:
    return index_set.max_degree() + settings.QUADRATURE_MARGIN


def quadrature_norm(values: np.ndarray, weights: np.ndarray) -> float:
    """Discrete L2(nu) norm sqrt(sum w |v|^2)."""
    return float(np.sqrt(np.sum(weights * np.abs(values) ** 2)))


@dataclass(frozen=True)
class ProjectionResult:
    """Projection coefficients with the quadrature that produced them."""
    coefficients: np.ndarray
    quadrature_order: int
    sufficient: bool
    warnings: List[str] = field(default_factory=list)


def projection_coefficients(
    f: Callable[[np.ndarray], np.ndarray],
    index_set: MultiIndexSet,
    basis: BasisSpec = LEGENDRE,
    q: Optional[int] = None,
) -> ProjectionResult:
    """Coefficients <f, psi_n> in L2(D, nu) by tensor quadrature.

    `f` takes a (P, d) batch and returns P values. Exact for f in P_Lambda
    once q >= max degree + 1.
    """
    q = default_order(index_set) if q is None else int(q)
    warnings = []
    sufficient = q >= required_order(index_set, basis)
    if not sufficient:
        message = (f"quadrature order {q} below {required_order(index_set, basis)}; "
                   "coefficients are not exact on P_Lambda")
        warnings.append(message)
        logger.warning(message)

    nodes, weights = quadrature_rule(basis, q, index_set.dimension)
    coefficients = np.zeros(len(index_set))
    for start in range(0, nodes.shape[0], _CHUNK_ROWS):
        chunk = nodes[start:start + _CHUNK_ROWS]
        values = np.asarray(f(chunk), dtype=float).reshape(-1)
        psi = tensor_basis_eval(index_set, chunk, basis)
        coefficients += psi.T @ (weights[start:start + _CHUNK_ROWS] * values)
    coefficients.setflags(write=False)
    return ProjectionResult(coefficients=coefficients, quadrature_order=q,
                            sufficient=sufficient, warnings=warnings)
