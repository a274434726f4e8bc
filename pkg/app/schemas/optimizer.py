import enum

from pydantic import BaseModel, Field, field_validator

from app.config import settings
from app.schemas.system import db_to_linear


class Criterion(str, enum.Enum):
    MEAN_PLLR = "mean-pllr"
    DMIN      = "dmin"
    ALT_D12   = "alt-d12"
    ALT_D21   = "alt-d21"
    CHORDAL   = "chordal"


class OptimizerConfig(BaseModel):
    criterion:     Criterion = Criterion.DMIN
    epsilon:       float = Field(default_factory=lambda: settings.DEFAULT_EPSILON)
    design_snr:    float = Field(default_factory=lambda: db_to_linear(settings.DEFAULT_DESIGN_SNR_DB))
    max_iters:     int   = Field(default_factory=lambda: settings.DEFAULT_MAX_ITERS)
    step_init:     float = Field(default_factory=lambda: settings.DEFAULT_STEP_INIT)
    armijo_c:      float = Field(default_factory=lambda: settings.DEFAULT_ARMIJO_C)
    armijo_shrink: float = Field(default_factory=lambda: settings.DEFAULT_ARMIJO_SHRINK)
    grad_tol:      float = Field(default_factory=lambda: settings.DEFAULT_GRAD_TOL)
    anneal:        bool  = Field(default_factory=lambda: settings.DEFAULT_ANNEAL)
    seed:          int   = 0

    model_config = {"frozen": True}

    @field_validator("epsilon", "design_snr", "step_init")
    @classmethod
    def check_positive(cls, v):
        if not v > 0: raise ValueError("Must be greater than 0")
        return v

    @field_validator("armijo_c", "armijo_shrink")
    @classmethod
    def check_unit_interval(cls, v):
        if not 0 < v < 1: raise ValueError("Armijo parameters must lie in (0, 1)")
        return v

    @field_validator("max_iters")
    @classmethod
    def check_iters(cls, v):
        if v < 0: raise ValueError("max_iters cannot be negative")
        return v

    @field_validator("grad_tol")
    @classmethod
    def check_tol(cls, v):
        if v < 0: raise ValueError("grad_tol cannot be negative")
        return v


class TraceRow(BaseModel):
    iteration: int
    objective: float
    grad_norm: float
    step:      float
    epsilon:   float


class OptimizationTrace(BaseModel):
    rows:      list[TraceRow] = []
    converged: bool = False
    best_iteration: int = 0

    @property
    def objectives(self) -> list[float]:
        return [r.objective for r in self.rows]

    def summary(self) -> dict:
        return {
            "iterations":     len(self.rows) - 1 if self.rows else 0,
            "initial":        self.rows[0].objective if self.rows else None,
            "final":          self.rows[-1].objective if self.rows else None,
            "converged":      self.converged,
            "best_iteration": self.best_iteration,
        }
