"""
Configuration management for PolyFrameLab.
Loads numerical defaults from environment variables with validation.
"""
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field, field_validator
from pathlib import Path


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # Solver
    DEFAULT_EPSILON: float = Field(default=1e-8, description="Truncated SVD threshold")
    RANK_TOLERANCE: float = Field(default=1e-12, description="Relative rank cutoff for whitening")

    # Index sets
    CARDINALITY_CAP: int = Field(default=1_000_000, description="Max indices in a generated set")

    # Quadrature
    QUADRATURE_MARGIN: int = Field(default=10, description="Extra points per coordinate over max degree")
    STRICT_BASIS_EVALUATION: bool = Field(default=False, description="Reject points outside D")

    # Sampling
    REJECTION_CAP_FACTOR: int = Field(default=10_000, description="Max proposals per requested sample")
    REJECTION_BLOCK_SIZE: int = Field(default=4096, description="Proposals drawn per rejection block")
    MANDELBROT_MAX_ITER: int = Field(default=200)
    MANDELBROT_ESCAPE_RADIUS: float = Field(default=2.0)

    # Diagnostics
    GRAM_POINTS: int = Field(default=10_000, description="Monte-Carlo points for the Gram estimate")
    NIKOLSKII_POOL_POINTS: int = Field(default=10_000, description="Fresh candidate points for sup estimates")
    GRAM_CONDITION_LIMIT: float = Field(default=1e12, description="Regularize Gram inverse above this condition")

    # Experiments
    ERROR_POINTS: int = Field(default=10_000, description="Monte-Carlo points for error estimation")
    DEFAULT_TRIALS: int = Field(default=20)
    ERROR_MAP_GRID: int = Field(default=256)
    ERROR_MAP_SENTINEL: float = Field(default=-1.0, description="Error value written for points outside the domain")
    FAILURE_FRACTION_LIMIT: float = Field(default=0.2, description="Flag rows when more trials than this fail")
    MAX_WORKERS: int = Field(default=1, description="Thread pool size for trials")

    # Logging
    LOG_LEVEL: str = Field(default="INFO")
    LOG_TO_CONSOLE: bool = Field(default=True)
    LOG_TO_FILE: bool = Field(default=False)

    # Output
    RESULTS_DIR: str = Field(default="results")

    @field_validator("DEFAULT_EPSILON")
    @classmethod
    def validate_epsilon(cls, v):
        """Threshold must be nonnegative."""
        if v < 0:
            raise ValueError("DEFAULT_EPSILON must be >= 0")
        return v

    @field_validator(
        "CARDINALITY_CAP", "REJECTION_CAP_FACTOR", "REJECTION_BLOCK_SIZE",
        "GRAM_POINTS", "NIKOLSKII_POOL_POINTS", "ERROR_POINTS",
        "DEFAULT_TRIALS", "ERROR_MAP_GRID", "MAX_WORKERS", "MANDELBROT_MAX_ITER",
    )
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError("value must be >= 1")
        return v

    @field_validator("FAILURE_FRACTION_LIMIT")
    @classmethod
    def validate_failure_fraction(cls, v):
        """Ensure the failure fraction is in (0, 1]."""
        if not 0 < v <= 1:
            raise ValueError("FAILURE_FRACTION_LIMIT must be in (0, 1]")
        return v

    def get_project_root(self) -> Path:
        """Get project root directory."""
        return Path(__file__).parent.parent.parent

    def get_results_dir(self) -> Path:
        """Get default results directory path."""
        results_dir = Path(self.RESULTS_DIR)
        if not results_dir.is_absolute():
            results_dir = self.get_project_root() / results_dir
        results_dir.mkdir(parents=True, exist_ok=True)
        return results_dir

    def get_logs_dir(self) -> Path:
        """Get logs directory path."""
        logs_dir = self.get_project_root() / "logs"
        logs_dir.mkdir(exist_ok=True)
        return logs_dir


# Global settings instance
settings = Settings()


def describe_settings() -> str:
    """One-line summary of the active numerical defaults."""
    return (
        f"epsilon={settings.DEFAULT_EPSILON:g} "
        f"gram_points={settings.GRAM_POINTS} "
        f"error_points={settings.ERROR_POINTS} "
        f"trials={settings.DEFAULT_TRIALS} "
        f"workers={settings.MAX_WORKERS}"
    )
