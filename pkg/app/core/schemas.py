"""
Pydantic schemas for type-safe data flow between modules and experiment drivers.
"""
import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings


class IndexSetKind(str, Enum):
    """Multi-index set families."""
    TENSOR_PRODUCT = "tensor_product"
    TOTAL_DEGREE = "total_degree"
    HYPERBOLIC_CROSS = "hyperbolic_cross"
    CUSTOM = "custom"


class BasisKind(str, Enum):
    """Orthonormal 1-D families on the bounding box."""
    LEGENDRE = "legendre"
    CHEBYSHEV = "chebyshev"
    COSINE = "cosine"


class SobolevKind(str, Enum):
    CLASSICAL = "classical"
    MIXED = "mixed"


class DomainKind(str, Enum):
    """Catalog of irregular domains inside the bounding box."""
    FULL_BOX = "full_box"
    L_SHAPE = "l_shape"
    LINEAR_CONSTRAINT = "linear_constraint"
    DISC_EXCLUSION = "disc_exclusion"
    CIRCLE = "circle"
    ANNULUS = "annulus"
    CORNER = "corner"
    NORM_EXCLUSION = "norm_exclusion"
    UNIT_BALL = "unit_ball"
    IMPLICIT_NONNEG = "implicit_nonneg"
    MANDELBROT = "mandelbrot"
    SLAB = "slab"


class Measure(str, Enum):
    """Sampling measure restricted to the domain."""
    UNIFORM = "uniform"
    CHEBYSHEV = "chebyshev"


class RuleKind(str, Enum):
    """Oversampling rules relating N and M."""
    LINEAR = "linear"
    LOGLINEAR = "loglinear"
    QUADRATIC = "quadratic"
    QUADRATIC_LOG = "quadratic_log"
    CHERNOFF = "chernoff"


class ExperimentKind(str, Enum):
    CONVERGE = "converge"
    CONDITIONING = "conditioning"
    ERRORMAP = "errormap"
    BOUNDS = "bounds"


class ScheduleMode(str, Enum):
    """Whether schedule values are sample budgets M or degrees n."""
    BUDGET = "budget"
    DEGREE = "degree"


class TargetId(str, Enum):
    """Catalog of target functions."""
    LOGDISC = "logdisc"
    COSSIN = "cossin"
    INVSQRT = "invsqrt"
    EXPMEAN = "expmean"
    COSMEAN = "cosmean"
    BASIS_FUNCTION = "basis_function"
    RANDOM_POLYNOMIAL = "random_polynomial"


class BasisSpec(BaseModel):
    """Basis family plus the half-width T of D = (-T, T)^d."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: BasisKind = BasisKind.LEGENDRE
    half_width: float = Field(default=1.0, ge=1.0, description="T, cosine basis only")

    @model_validator(mode="after")
    def check_half_width(self):
        if self.kind != BasisKind.COSINE and self.half_width != 1.0:
            raise ValueError(f"{self.kind.value} basis lives on (-1,1); half_width must be 1")
        return self

    def descriptor(self) -> str:
        if self.kind == BasisKind.COSINE:
            return f"cosine(T={self.half_width:g})"
        return self.kind.value


class SobolevWeightSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: SobolevKind = SobolevKind.CLASSICAL
    order: int = Field(default=1, ge=0)


class DomainSpec(BaseModel):
    """Irregular domain inside the bounding box, with its shape parameters."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: DomainKind
    dimension: int = Field(default=2, ge=1)
    half_width: float = Field(default=1.0, ge=1.0, description="T of the bounding box")
    radius: Optional[float] = Field(default=None, gt=0)
    inner_radius: Optional[float] = Field(default=None, ge=0)
    outer_radius: Optional[float] = Field(default=None, gt=0)
    rho: Optional[float] = Field(default=None, gt=0, description="Squared exclusion radius")
    lower: Optional[float] = None
    upper: Optional[float] = None
    function_id: Optional[TargetId] = None

    @model_validator(mode="before")
    @classmethod
    def fill_shape_defaults(cls, data):
        """Per-kind defaults: unit circle, r/4 annulus, rho=1/2 exclusion, [-1,0] slab."""
        if not isinstance(data, dict):
            return data
        data = dict(data)
        kind = data.get("kind")
        kind = kind.value if isinstance(kind, DomainKind) else kind
        if kind == "circle":
            data.setdefault("radius", 1.0)
        elif kind == "norm_exclusion":
            data.setdefault("radius", 0.5)
        elif kind == "disc_exclusion":
            data.setdefault("rho", 0.5)
        elif kind == "annulus":
            data.setdefault("outer_radius", 1.0)
            data.setdefault("inner_radius", float(data["outer_radius"]) / 4)
        elif kind == "slab":
            data.setdefault("lower", -1.0)
            data.setdefault("upper", 0.0)
        elif kind == "implicit_nonneg":
            data.setdefault("function_id", TargetId.LOGDISC)
        return data

    @model_validator(mode="after")
    def check_parameters(self):
        kind = self.kind
        if kind in (DomainKind.L_SHAPE, DomainKind.LINEAR_CONSTRAINT, DomainKind.DISC_EXCLUSION) \
                and self.dimension < 2:
            raise ValueError(f"{kind.value} needs dimension >= 2")
        if kind == DomainKind.MANDELBROT and self.dimension != 2:
            raise ValueError("mandelbrot is a 2-D domain")
        if kind == DomainKind.ANNULUS and not self.inner_radius < self.outer_radius:
            raise ValueError("annulus needs inner_radius < outer_radius")
        if kind == DomainKind.SLAB and not -1.0 <= self.lower < self.upper <= 1.0:
            raise ValueError("slab needs -1 <= lower < upper <= 1")
        if kind == DomainKind.IMPLICIT_NONNEG and self.function_id not in (
                TargetId.LOGDISC, TargetId.COSSIN, TargetId.EXPMEAN, TargetId.COSMEAN):
            raise ValueError("implicit_nonneg needs a closed-form catalog function")
        return self

    def descriptor(self) -> str:
        params = []
        for name in ("radius", "inner_radius", "outer_radius", "rho", "lower", "upper"):
            value = getattr(self, name)
            if value is not None:
                params.append(f"{name}={value:g}")
        if self.function_id is not None:
            params.append(f"f={self.function_id.value}")
        if self.half_width != 1.0:
            params.append(f"T={self.half_width:g}")
        suffix = f"({','.join(params)})" if params else ""
        return f"{self.kind.value}{suffix}"


class OversamplingRule(BaseModel):
    """M = c * g(N) with g one of N, N log N, N^2, N^2 log N."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: RuleKind = RuleKind.LOGLINEAR
    constant: float = Field(default=1.0, gt=0)

    def growth(self, n_basis: int) -> float:
        """The unscaled g(N)."""
        n = float(n_basis)
        if self.kind == RuleKind.LINEAR:
            return n
        if self.kind == RuleKind.LOGLINEAR:
            return n * math.log(n) if n > 0 else 0.0
        if self.kind == RuleKind.QUADRATIC:
            return n * n
        if self.kind == RuleKind.QUADRATIC_LOG:
            return n * n * math.log(n) if n > 0 else 0.0
        raise ValueError("chernoff rule has no closed-form growth; use diagnostics.sample_complexity_bound")

    def required_samples(self, n_basis: int) -> float:
        return self.constant * self.growth(n_basis)

    def label(self) -> str:
        return f"{self.kind.value}(c={self.constant:g})"


class TargetSpec(BaseModel):
    """Target function selection."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: TargetId = TargetId.EXPMEAN
    multi_index: Optional[List[int]] = Field(default=None, description="For basis_function")
    bound: Optional[float] = Field(default=None, ge=0, description="Known sup bound L")


class ScheduleSpec(BaseModel):
    """Degree or budget schedule and the oversampling rules applied to it."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: ScheduleMode = ScheduleMode.DEGREE
    values: List[int]
    rules: List[OversamplingRule] = Field(default_factory=lambda: [OversamplingRule()])

    @field_validator("values")
    @classmethod
    def validate_values(cls, v):
        """Schedule must be nonempty, nonnegative and strictly increasing."""
        if not v:
            raise ValueError("schedule must be nonempty")
        if any(x < 0 for x in v):
            raise ValueError("schedule values must be >= 0")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("schedule must be strictly increasing")
        return v

    @field_validator("rules")
    @classmethod
    def validate_rules(cls, v):
        if not v:
            raise ValueError("at least one oversampling rule is required")
        return v


class BoundsSpec(BaseModel):
    """Probability parameters for the sample-complexity and truncation checks."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    delta: float = Field(default=0.5, gt=0, lt=1)
    gamma: float = Field(default=0.1, gt=0, lt=1)
    truncation_bound: Optional[float] = Field(default=None, ge=0)


class ExperimentConfig(BaseModel):
    """Declarative description of one experiment run."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    experiment: ExperimentKind
    domain: DomainSpec
    basis: BasisSpec = Field(default_factory=BasisSpec)
    index_set: IndexSetKind = IndexSetKind.HYPERBOLIC_CROSS
    schedule: ScheduleSpec
    epsilon: float = Field(default_factory=lambda: settings.DEFAULT_EPSILON, ge=0)
    epsilons: List[float] = Field(default_factory=list, description="Threshold sweep, conditioning only")
    measure: Optional[Measure] = None
    trials: int = Field(default_factory=lambda: settings.DEFAULT_TRIALS, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    error_points: int = Field(default_factory=lambda: settings.ERROR_POINTS, ge=1)
    gram_points: int = Field(default_factory=lambda: settings.GRAM_POINTS, ge=1)
    quadrature_order: Optional[int] = Field(default=None, ge=1)
    grid_size: int = Field(default_factory=lambda: settings.ERROR_MAP_GRID, ge=2)
    target: TargetSpec = Field(default_factory=TargetSpec)
    bounds: BoundsSpec = Field(default_factory=BoundsSpec)
    output_dir: Optional[str] = None
    name: Optional[str] = None

    @field_validator("epsilons")
    @classmethod
    def validate_epsilons(cls, v):
        if any(e < 0 for e in v):
            raise ValueError("epsilons must be >= 0")
        return v

    @model_validator(mode="before")
    @classmethod
    def fill_measure(cls, data):
        """Chebyshev bases sample from the Chebyshev measure unless told otherwise."""
        if isinstance(data, dict) and data.get("measure") is None:
            data = dict(data)
            basis = data.get("basis") or {}
            kind = basis.kind if isinstance(basis, BasisSpec) else basis.get("kind", "legendre")
            kind = kind.value if isinstance(kind, BasisKind) else kind
            data["measure"] = Measure.CHEBYSHEV if kind == "chebyshev" else Measure.UNIFORM
        return data

    @model_validator(mode="after")
    def check_consistency(self):
        if self.index_set == IndexSetKind.CUSTOM:
            raise ValueError("experiments generate their index sets; custom sets are library-only")
        if self.experiment == ExperimentKind.ERRORMAP and self.domain.dimension != 2:
            raise ValueError("errormap needs a 2-D domain")
        if self.basis.kind == BasisKind.COSINE and self.domain.half_width != self.basis.half_width:
            raise ValueError("domain.half_width must equal basis.half_width for the cosine basis")
        if self.basis.kind != BasisKind.COSINE and self.domain.half_width != 1.0:
            raise ValueError("only the cosine basis supports a bounding box wider than (-1,1)^d")
        return self

    def threshold_sweep(self) -> List[float]:
        return list(self.epsilons) if self.epsilons else [self.epsilon]

    def run_name(self) -> str:
        return self.name or f"{self.experiment.value}_{self.domain.kind.value}_d{self.domain.dimension}"


class ConditionReport(BaseModel):
    """Conditioning constants of the regularized reconstruction operator."""
    c_prime: float = Field(..., ge=0)
    c_double_prime: float = Field(..., ge=0)
    c_max: float = Field(..., ge=0)
    c_unregularized: Optional[float] = None
    epsilon: float
    retained_rank: int
    sigma_min: float
    sigma_max: float
    gram_sample_count: int
    seed: Optional[int] = None

    @model_validator(mode="after")
    def check_max(self):
        if self.c_max != max(self.c_prime, self.c_double_prime):
            raise ValueError("c_max must equal max(c_prime, c_double_prime)")
        return self


class TrialRecord(BaseModel):
    """Outcome of one trial of a sweep."""
    schedule_index: int
    trial: int
    seed: int
    n: int
    N: int
    M: int
    rule: str = ""
    epsilon: float
    ok: bool = True
    error: str = ""
    l2_error: Optional[float] = None
    linf_error: Optional[float] = None
    coefficient_norm: Optional[float] = None
    condition_number: Optional[float] = None
    c_prime: Optional[float] = None
    c_double_prime: Optional[float] = None
    c_max: Optional[float] = None
    c_unregularized: Optional[float] = None
    c_max_spread: Optional[float] = Field(default=None, description="Relative MC standard error of c_max")
    config_hash: str = ""


class ConvergenceRow(BaseModel):
    """Medians over the successful trials of one schedule point."""
    schedule_index: int
    M: int
    N: int
    n: int
    rule: str
    l2_error: float
    linf_error: float
    coefficient_norm: float
    trials_ok: int
    trials_failed: int
    flagged: bool
    trial: int = Field(..., description="-1: medians over trials")
    seed: int
    config_hash: str


class ConditioningRow(BaseModel):
    """Medians of the conditioning constants at one (schedule point, epsilon).

    The two fractions count trials whose constant exceeds 1/sqrt(1 - delta).
    """
    schedule_index: int
    N: int
    M: int
    n: int
    rule: str
    epsilon: float
    c_prime: float
    c_double_prime: float
    c_max: float
    c_unregularized: float
    condition_number: float
    universal_cap: float
    fraction_c_max_above: float
    fraction_c_unregularized_above: float
    trials_ok: int
    trials_failed: int
    flagged: bool
    trial: int = Field(..., description="-1: medians over trials")
    seed: int
    config_hash: str


class ErrorMapRow(BaseModel):
    """|f - f_eps| at one grid point of the fit made by `trial`."""
    y1: float
    y2: float
    inside: bool
    abs_error: float
    trial: int
    seed: int
    config_hash: str


class BoundsRow(BaseModel):
    """One bound check: slack = rhs - lhs must be >= -tolerance."""
    schedule_index: int
    trial: int
    seed: int
    n: int
    N: int
    M: int
    check: str
    lhs: float
    rhs: float
    slack: float
    tolerance: float
    passed: bool
    config_hash: str
