"""
Catalog of target functions used by experiments and implicit domains.
"""
from typing import Callable, Optional

import numpy as np

from app.core.errors import ParameterError, ShapeError
from app.core.indexsets import MultiIndexSet, custom_index_set
from app.core.polybasis import tensor_basis_eval
from app.core.schemas import BasisKind, BasisSpec, TargetId, TargetSpec
from app.core.utils import COEFF_STREAM, make_generator


def _logdisc(y: np.ndarray) -> np.ndarray:
    r2 = y[:, 0] ** 2 + y[:, 1] ** 2
    with np.errstate(divide="ignore"):
        return np.log(8 * r2) - 2 * r2


def _cossin(y: np.ndarray) -> np.ndarray:
    return np.cos(2 * y[:, 0]) * np.sin(y[:, 1])


def _invsqrt(y: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 1.0 / np.sum(np.sqrt(np.abs(y)), axis=1)


def _expmean(y: np.ndarray) -> np.ndarray:
    return np.exp(-np.mean(y, axis=1))


def _cosmean(y: np.ndarray) -> np.ndarray:
    return np.cos(np.mean(y, axis=1))


_CLOSED_FORMS = {
    TargetId.LOGDISC: (_logdisc, 2),
    TargetId.COSSIN: (_cossin, 2),
    TargetId.INVSQRT: (_invsqrt, 1),
    TargetId.EXPMEAN: (_expmean, 1),
    TargetId.COSMEAN: (_cosmean, 1),
}


def _sup_1d(basis: BasisSpec, degree: int) -> float:
    if degree == 0:
        return 1.0
    if basis.kind == BasisKind.LEGENDRE:
        return float(np.sqrt(2 * degree + 1))
    return float(np.sqrt(2.0))


class TargetFunction:
    """Callable on (P, d) batches with an optional known sup bound L."""

    def __init__(self, target_id: TargetId, dimension: int,
                 func: Callable[[np.ndarray], np.ndarray], bound: Optional[float] = None,
                 coefficients: Optional[np.ndarray] = None):
        self.target_id = target_id
        self.dimension = dimension
        self._func = func
        self.bound = bound
        self.coefficients = coefficients

    def __call__(self, points) -> np.ndarray:
        batch = np.atleast_2d(np.asarray(points, dtype=float))
        if batch.shape[1] != self.dimension:
            raise ShapeError(f"{self.target_id.value} expects dimension {self.dimension}, got {batch.shape[1]}")
        return self._func(batch)

    def __repr__(self) -> str:
        return f"TargetFunction({self.target_id.value}, d={self.dimension})"


def closed_form(target_id: TargetId) -> Callable[[np.ndarray], np.ndarray]:
    """Raw vectorized function for a closed-form catalog entry."""
    try:
        return _CLOSED_FORMS[TargetId(target_id)][0]
    except KeyError:
        raise ParameterError(f"{target_id} has no closed form") from None


def make_target(
    spec: TargetSpec,
    dimension: int,
    basis: Optional[BasisSpec] = None,
    index_set: Optional[MultiIndexSet] = None,
    seed: int = 0,
) -> TargetFunction:
    """Build a target from its spec.

    `basis_function` needs `basis` and `spec.multi_index`; `random_polynomial`
    needs `basis` and `index_set` and draws standard normal coefficients
    scaled to unit Euclidean norm from the seeded stream.
    """
    target_id = spec.id
    half_width = basis.half_width if basis is not None else 1.0

    if target_id in _CLOSED_FORMS:
        func, min_dim = _CLOSED_FORMS[target_id]
        if dimension < min_dim:
            raise ParameterError(f"{target_id.value} needs dimension >= {min_dim}")
        bound = spec.bound
        if bound is None:
            if target_id in (TargetId.COSSIN, TargetId.COSMEAN):
                bound = 1.0
            elif target_id == TargetId.EXPMEAN:
                bound = float(np.exp(half_width))
        return TargetFunction(target_id, dimension, func, bound)

    if basis is None:
        raise ParameterError(f"{target_id.value} needs a basis")

    if target_id == TargetId.BASIS_FUNCTION:
        if spec.multi_index is None or len(spec.multi_index) != dimension:
            raise ParameterError("basis_function needs a multi_index of the ambient dimension")
        single = custom_index_set([spec.multi_index])
        bound = spec.bound
        if bound is None:
            bound = float(np.prod([_sup_1d(basis, k) for k in spec.multi_index]))
        return TargetFunction(target_id, dimension,
                              lambda y: tensor_basis_eval(single, y, basis)[:, 0], bound,
                              coefficients=np.ones(1))

    if target_id == TargetId.RANDOM_POLYNOMIAL:
        if index_set is None:
            raise ParameterError("random_polynomial needs an index set")
        rng = make_generator(seed ^ COEFF_STREAM)
        coefficients = rng.standard_normal(len(index_set))
        coefficients /= np.linalg.norm(coefficients)
        sups = np.array([np.prod([_sup_1d(basis, int(k)) for k in row]) for row in index_set.indices])
        bound = spec.bound if spec.bound is not None else float(np.abs(coefficients) @ sups)
        return TargetFunction(target_id, dimension,
                              lambda y: tensor_basis_eval(index_set, y, basis) @ coefficients, bound,
                              coefficients=coefficients)

    raise ParameterError(f"unknown target {target_id}")
