"""
Multi-index sets defining the polynomial space P_Lambda.

Indices are stored as a read-only (N, d) integer array in lexicographic
order, so design-matrix columns and result files are reproducible.
"""
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb

from app.core.config import settings
from app.core.errors import BudgetError, ParameterError, SizeLimitError
from app.core.schemas import IndexSetKind, OversamplingRule, RuleKind
from app.core.utils import log_event

MultiIndex = Tuple[int, ...]


def multi_index(entries: Iterable[int]) -> MultiIndex:
    """Validate and normalize a multi-index."""
    index = tuple(int(e) for e in entries)
    if len(index) < 1:
        raise ParameterError("multi-index needs at least one entry")
    if any(e < 0 for e in index):
        raise ParameterError(f"multi-index entries must be >= 0, got {index}")
    return index


@dataclass(frozen=True)
class MultiIndexSet:
    """Ordered, duplicate-free collection of d-dimensional multi-indices."""
    dimension: int
    indices: np.ndarray
    kind: IndexSetKind
    degree: Optional[int] = None

    def __post_init__(self):
        self.indices.setflags(write=False)

    def __len__(self) -> int:
        return self.indices.shape[0]

    @property
    def cardinality(self) -> int:
        return len(self)

    def max_degree(self) -> int:
        """Largest single-coordinate degree appearing in the set."""
        return int(self.indices.max()) if len(self) else 0

    def coordinate_degrees(self) -> np.ndarray:
        """Per-coordinate maximum degree."""
        return self.indices.max(axis=0)

    def as_tuples(self) -> List[MultiIndex]:
        return [tuple(int(e) for e in row) for row in self.indices]

    def position(self, index: Sequence[int]) -> int:
        """Column position of an index; raises KeyError when absent."""
        target = np.asarray(index, dtype=np.int64)
        hits = np.flatnonzero(np.all(self.indices == target, axis=1))
        if hits.size == 0:
            raise KeyError(tuple(index))
        return int(hits[0])

    def __contains__(self, index) -> bool:
        try:
            self.position(index)
        except KeyError:
            return False
        return True

    def descriptor(self) -> str:
        degree = "" if self.degree is None else f" n={self.degree}"
        return f"dim={self.dimension} kind={self.kind.value}{degree}"


def _check_arguments(n: int, d: int):
    if d < 1:
        raise SizeLimitError(f"dimension must be >= 1, got {d}")
    if n < 0:
        raise ParameterError(f"degree must be >= 0, got {n}")


def _check_cap(count: int, kind: IndexSetKind, n: int, d: int):
    if count > settings.CARDINALITY_CAP:
        raise SizeLimitError(
            f"{kind.value} set with n={n}, d={d} has {count} indices, "
            f"above the cap of {settings.CARDINALITY_CAP}"
        )


@lru_cache(maxsize=4096)
def _hyperbolic_count(d: int, budget: int) -> int:
    """Number of tuples a_1..a_d >= 1 with prod(a_k) <= budget."""
    if budget < 1:
        return 0
    if d == 1:
        return budget
    return sum(_hyperbolic_count(d - 1, budget // a) for a in range(1, budget + 1))


def cardinality(kind: IndexSetKind, n: int, d: int) -> int:
    """|Lambda| without materializing the set."""
    _check_arguments(n, d)
    if kind == IndexSetKind.TENSOR_PRODUCT:
        return (n + 1) ** d
    if kind == IndexSetKind.TOTAL_DEGREE:
        return int(comb(n + d, d, exact=True))
    if kind == IndexSetKind.HYPERBOLIC_CROSS:
        return _hyperbolic_count(d, n + 1)
    raise ParameterError(f"no closed-form cardinality for {kind.value} sets")


def hyperbolic_cross_bound(n: int, d: int) -> int:
    """Upper bound floor((n+1)(1+log(n+1))^(d-1)) on the hyperbolic cross size."""
    _check_arguments(n, d)
    return math.floor((n + 1) * (1 + math.log(n + 1)) ** (d - 1))


def from_rows(rows: List[MultiIndex], d: int, kind: IndexSetKind, n: Optional[int]) -> MultiIndexSet:
    """Sort rows lexicographically into a set of the given kind."""
    indices = np.array(sorted(rows), dtype=np.int64).reshape(len(rows), d)
    return MultiIndexSet(dimension=d, indices=indices, kind=kind, degree=n)


def tensor_product_set(n: int, d: int) -> MultiIndexSet:
    """All indices with max-norm <= n; cardinality (n+1)^d."""
    _check_arguments(n, d)
    _check_cap((n + 1) ** d, IndexSetKind.TENSOR_PRODUCT, n, d)
    rows = list(itertools.product(range(n + 1), repeat=d))
    return from_rows(rows, d, IndexSetKind.TENSOR_PRODUCT, n)


def _bounded_sum(d: int, budget: int) -> Iterable[MultiIndex]:
    if d == 1:
        for k in range(budget + 1):
            yield (k,)
        return
    for k in range(budget + 1):
        for tail in _bounded_sum(d - 1, budget - k):
            yield (k,) + tail


def total_degree_set(n: int, d: int) -> MultiIndexSet:
    """All indices with 1-norm <= n; cardinality binom(n+d, d)."""
    _check_arguments(n, d)
    _check_cap(int(comb(n + d, d, exact=True)), IndexSetKind.TOTAL_DEGREE, n, d)
    rows = list(_bounded_sum(d, n))
    return from_rows(rows, d, IndexSetKind.TOTAL_DEGREE, n)


def _bounded_product(d: int, budget: int) -> Iterable[MultiIndex]:
    if d == 1:
        for k in range(budget):
            yield (k,)
        return
    for k in range(budget):
        for tail in _bounded_product(d - 1, budget // (k + 1)):
            yield (k,) + tail


def hyperbolic_cross_set(n: int, d: int) -> MultiIndexSet:
    """All indices with prod(n_k + 1) <= n + 1."""
    _check_arguments(n, d)
    _check_cap(_hyperbolic_count(d, n + 1), IndexSetKind.HYPERBOLIC_CROSS, n, d)
    rows = list(_bounded_product(d, n + 1))
    return from_rows(rows, d, IndexSetKind.HYPERBOLIC_CROSS, n)


_GENERATORS = {
    IndexSetKind.TENSOR_PRODUCT: tensor_product_set,
    IndexSetKind.TOTAL_DEGREE: total_degree_set,
    IndexSetKind.HYPERBOLIC_CROSS: hyperbolic_cross_set,
}


def index_set(kind: IndexSetKind, n: int, d: int) -> MultiIndexSet:
    """Dispatch to the generator for `kind`."""
    try:
        generator = _GENERATORS[IndexSetKind(kind)]
    except KeyError:
        raise ParameterError(f"cannot generate a {kind} set from a degree") from None
    return generator(n, d)


def custom_index_set(indices: Iterable[Sequence[int]]) -> MultiIndexSet:
    """Validated user-supplied set, sorted lexicographically."""
    rows = [multi_index(entry) for entry in indices]
    if not rows:
        raise ParameterError("index set must contain at least one index")
    d = len(rows[0])
    if any(len(row) != d for row in rows):
        raise ParameterError("all multi-indices must share one dimension")
    if len(set(rows)) != len(rows):
        raise ParameterError("index set contains duplicates")
    _check_cap(len(rows), IndexSetKind.CUSTOM, -1, d)
    return from_rows(rows, d, IndexSetKind.CUSTOM, None)


def is_lower_set(index_set_: MultiIndexSet) -> bool:
    """True iff every index's coordinatewise-dominated indices are present.

    Checking the d immediate predecessors of each index suffices.
    """
    members = set(index_set_.as_tuples())
    for index in members:
        for k, entry in enumerate(index):
            if entry > 0 and index[:k] + (entry - 1,) + index[k + 1:] not in members:
                return False
    return True


def samples_for(n_basis: int, rule: OversamplingRule) -> int:
    """Sample count M = max(1, ceil(c * g(N))) for a closed-form rule."""
    if n_basis < 1:
        raise ParameterError("N must be >= 1")
    # Round before the ceiling so products like 5 * 484 stay exact.
    return max(1, math.ceil(round(rule.required_samples(n_basis), 9)))


def largest_n_for_budget(kind: IndexSetKind, d: int, budget: int, rule: OversamplingRule) -> int:
    """Largest degree n whose cardinality N satisfies c * g(N) <= M."""
    if budget < 1:
        raise BudgetError(f"sample budget must be >= 1, got {budget}")
    if rule.kind == RuleKind.CHERNOFF:
        raise ParameterError("chernoff budgets depend on the domain; use diagnostics")
    best = 0
    n = 0
    while True:
        n_basis = cardinality(kind, n, d)
        if n_basis > settings.CARDINALITY_CAP:
            break
        if rule.required_samples(n_basis) > budget:
            break
        best = n
        n += 1
    log_event("degree_for_budget", {
        "kind": IndexSetKind(kind).value, "d": d, "M": budget,
        "rule": rule.label(), "n": best,
    }, level="DEBUG")
    return best
