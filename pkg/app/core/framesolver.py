"""
Design-matrix assembly, truncated SVD least squares, approximant evaluation,
and the pointwise truncation operator.
"""
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg

from app.core.config import settings
from app.core.domains import SampleSet
from app.core.errors import NumericError, ParameterError, ShapeError
from app.core.indexsets import MultiIndexSet
from app.core.polybasis import LEGENDRE, tensor_basis_eval
from app.core.schemas import BasisSpec
from app.core.utils import log_event

_EVAL_CHUNK = 16_384


@dataclass(frozen=True)
class DesignMatrix:
    """A with entries phi_n(y_i) / sqrt(M); columns follow the index-set order."""
    matrix: np.ndarray
    samples: SampleSet
    index_set: MultiIndexSet
    basis: BasisSpec

    @property
    def shape(self):
        return self.matrix.shape

    def rhs(self, values: np.ndarray) -> np.ndarray:
        """b = f(y_i) / sqrt(M)."""
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size != self.matrix.shape[0]:
            raise ShapeError(f"need {self.matrix.shape[0]} samples of f, got {values.size}")
        return values / np.sqrt(self.matrix.shape[0])


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD A = U diag(s) Vt plus an orthonormal completion of V.

    `v_complete` is N x N; its trailing N - len(s) columns span directions
    with zero singular value when M < N.
    """
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray
    v_complete: np.ndarray

    @property
    def n_columns(self) -> int:
        return self.v_complete.shape[0]

    def padded_singular_values(self) -> np.ndarray:
        """Singular values extended by zeros to length N."""
        padded = np.zeros(self.n_columns)
        padded[:self.s.size] = self.s
        return padded


@dataclass(frozen=True)
class TruncatedSvdSolution:
    """c_eps = V Sigma_eps^+ U* b with sigma <= eps dropped."""
    coefficients: np.ndarray
    singular_values: np.ndarray
    retained_rank: int
    epsilon: float
    residual_norm: float
    rhs_norm: float

    def to_dict(self, index_set: Optional[MultiIndexSet] = None, basis: Optional[BasisSpec] = None,
                seed: Optional[int] = None) -> dict:
        return {
            "epsilon": self.epsilon,
            "retained_rank": self.retained_rank,
            "singular_values": self.singular_values.tolist(),
            "coefficients": self.coefficients.tolist(),
            "residual_norm": self.residual_norm,
            "index_set_descriptor": None if index_set is None else index_set.descriptor(),
            "basis_descriptor": None if basis is None else basis.descriptor(),
            "seed": seed,
        }


@dataclass(frozen=True)
class FrameFit:
    """Design matrix, its factorization, and the regularized solution."""
    design: DesignMatrix
    factors: SvdFactors
    solution: TruncatedSvdSolution
    sample_values: np.ndarray

    def to_dict(self) -> dict:
        """Solution with the index set, basis and sample seed it was fitted on."""
        return self.solution.to_dict(self.design.index_set, self.design.basis, self.design.samples.seed)


@dataclass(frozen=True)
class ErrorEstimate:
    """Monte-Carlo L2(Omega, mu) error and a sampled sup error."""
    l2: float
    l2_standard_error: float
    linf: float
    points: int


def _matrix(a: Union[DesignMatrix, np.ndarray]) -> np.ndarray:
    return a.matrix if isinstance(a, DesignMatrix) else np.asarray(a, dtype=float)


def assemble_design_matrix(samples: SampleSet, index_set: MultiIndexSet,
                           basis: BasisSpec = LEGENDRE) -> DesignMatrix:
    """Rows phi_n(y_i)/sqrt(M) for every sample, columns in index-set order."""
    if samples.dimension != index_set.dimension:
        raise ShapeError(f"samples have dimension {samples.dimension}, index set has {index_set.dimension}")
    m = samples.size
    values = tensor_basis_eval(index_set, samples.points, basis)
    finite = np.isfinite(values)
    if not finite.all():
        row = int(np.flatnonzero(~finite.all(axis=1))[0])
        raise NumericError(f"non-finite basis value at sample point {samples.points[row].tolist()}")
    matrix = values / np.sqrt(m)
    matrix.setflags(write=False)
    log_event("design_matrix_assembled", {"M": m, "N": len(index_set), "basis": basis.descriptor()},
              level="DEBUG")
    return DesignMatrix(matrix=matrix, samples=samples, index_set=index_set, basis=basis)


def factorize(a: Union[DesignMatrix, np.ndarray]) -> SvdFactors:
    """Dense SVD with an orthonormal completion of V for M < N."""
    matrix = _matrix(a)
    m, n = matrix.shape
    try:
        if m >= n:
            u, s, vt = scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesdd")
            v_complete = vt.T
        else:
            u, s, vt_full = scipy.linalg.svd(matrix, full_matrices=True, lapack_driver="gesdd")
            vt = vt_full[:m]
            v_complete = vt_full.T
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericError(f"SVD of the {m}x{n} design matrix failed: {e}") from e
    return SvdFactors(u=u, s=s, vt=vt, v_complete=v_complete)


def truncated_svd_solve(a: Union[DesignMatrix, np.ndarray], b, epsilon: Optional[float] = None,
                        factors: Optional[SvdFactors] = None) -> TruncatedSvdSolution:
    """Regularized least squares: keep singular values strictly above epsilon.

    epsilon = 0 gives the minimum-norm least-squares solution.
    """
    epsilon = settings.DEFAULT_EPSILON if epsilon is None else float(epsilon)
    if epsilon < 0:
        raise ParameterError(f"epsilon must be >= 0, got {epsilon}")
    matrix = _matrix(a)
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.size != matrix.shape[0]:
        raise ShapeError(f"right-hand side has length {b.size}, matrix has {matrix.shape[0]} rows")
    factors = factors or factorize(matrix)

    keep = factors.s > epsilon
    projected = factors.u[:, keep].T @ b
    coefficients = factors.vt[keep].T @ (projected / factors.s[keep])
    residual = float(np.linalg.norm(matrix @ coefficients - b))
    solution = TruncatedSvdSolution(
        coefficients=coefficients,
        singular_values=factors.s.copy(),
        retained_rank=int(keep.sum()),
        epsilon=epsilon,
        residual_norm=residual,
        rhs_norm=float(np.linalg.norm(b)),
    )
    log_event("tsvd_solved", {
        "M": matrix.shape[0], "N": matrix.shape[1], "epsilon": epsilon,
        "retained_rank": solution.retained_rank, "residual_norm": residual,
    }, level="DEBUG")
    return solution


def evaluate_approximant(coefficients, index_set: MultiIndexSet, basis: BasisSpec, points) -> np.ndarray:
    """Pointwise sum_n c_n psi_n(y) over a (P, d) batch."""
    coefficients = np.asarray(coefficients).reshape(-1)
    if coefficients.size != len(index_set):
        raise ShapeError(f"{coefficients.size} coefficients for an index set of size {len(index_set)}")
    batch = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(batch.shape[0], dtype=np.result_type(coefficients, float))
    for start in range(0, batch.shape[0], _EVAL_CHUNK):
        chunk = batch[start:start + _EVAL_CHUNK]
        out[start:start + _EVAL_CHUNK] = tensor_basis_eval(index_set, chunk, basis) @ coefficients
    return out


def truncate_pointwise(values, bound: float) -> np.ndarray:
    """T_L(g) = sgn(g) min(|g|, L) with the complex sign g/|g|."""
    if bound < 0:
        raise ParameterError(f"truncation bound must be >= 0, got {bound}")
    values = np.asarray(values)
    if not np.iscomplexobj(values):
        return np.clip(values.astype(float), -bound, bound)
    magnitude = np.abs(values)
    scale = np.ones_like(magnitude)
    over = magnitude > bound
    scale[over] = bound / magnitude[over]
    return values * scale


def coefficient_l2_norm(solution: Union[TruncatedSvdSolution, np.ndarray]) -> float:
    """||c_eps||_2, equal by Parseval to the L2(D, nu) norm of the approximant."""
    coefficients = solution.coefficients if isinstance(solution, TruncatedSvdSolution) else solution
    return float(np.linalg.norm(coefficients))


def condition_number(a: Union[DesignMatrix, np.ndarray, SvdFactors]) -> float:
    """sigma_max / sigma_min over all N directions (inf when rank deficient)."""
    factors = a if isinstance(a, SvdFactors) else factorize(a)
    padded = factors.padded_singular_values()
    if padded[-1] == 0:
        return float("inf")
    return float(padded[0] / padded[-1])


def fit(samples: SampleSet, f: Callable[[np.ndarray], np.ndarray], index_set: MultiIndexSet,
        basis: BasisSpec = LEGENDRE, epsilon: Optional[float] = None) -> FrameFit:
    """Sample f, assemble A and b, and solve the truncated SVD problem."""
    values = np.asarray(f(samples.points), dtype=float).reshape(-1)
    if not np.all(np.isfinite(values)):
        row = int(np.flatnonzero(~np.isfinite(values))[0])
        raise NumericError(f"target is not finite at sample point {samples.points[row].tolist()}")
    design = assemble_design_matrix(samples, index_set, basis)
    factors = factorize(design)
    solution = truncated_svd_solve(design, design.rhs(values), epsilon, factors=factors)
    return FrameFit(design=design, factors=factors, solution=solution, sample_values=values)


def estimate_errors(exact: np.ndarray, approx: np.ndarray,
                    extra_residuals: Optional[np.ndarray] = None) -> ErrorEstimate:
    """RMS error over Monte-Carlo points of mu, sup over those points plus extras."""
    residual = np.abs(np.asarray(exact) - np.asarray(approx))
    squared = residual ** 2
    k = residual.size
    mean_sq = float(squared.mean())
    l2 = float(np.sqrt(mean_sq))
    # Delta method: se(sqrt(X)) ~ se(X) / (2 sqrt(X)).
    se_sq = float(squared.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0
    l2_se = se_sq / (2 * l2) if l2 > 0 else 0.0
    linf = float(residual.max())
    if extra_residuals is not None and np.size(extra_residuals):
        linf = max(linf, float(np.max(np.abs(extra_residuals))))
    return ErrorEstimate(l2=l2, l2_standard_error=l2_se, linf=linf, points=k)
