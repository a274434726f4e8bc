from typing import ClassVar

from pydantic import BaseModel


class PairStats(BaseModel):
    """Detection statistics of one ordered pair of joint symbols (x → x')."""
    mean_pllr:   float          # E[L(x→x')], nats
    var_pllr:    float          # Var[L(x→x')], nats²
    d_value:     float          # tr((I + x'x'ᴴ)⁻¹ x xᴴ)
    cantelli:    float          # Var / (Var + E²), 1 when E = 0
    lambda_eigs: list[float]    # eigenvalues of Λ


class MetricReport(BaseModel):
    d_min:          float
    d12:            float | None    # None when user 1 has a single symbol
    d21:            float | None
    min_mean_pllr:  float             # N-normalized: (1/N)·min E[L]
    max_cross_corr: float             # chordal objective, normalized by (PT)²
    worst_pair:     tuple[int, int]   # ordered joint-index pair attaining d_min


class ErrorTypeMinima(BaseModel):
    simultaneous: float | None   # both users' symbols differ
    one_sided:    float | None   # exactly one user's symbol differs


class EvaluationRow(BaseModel):
    """One SNR point of `evaluate`."""
    snr_db:          float
    min_mean_pllr:   float
    d_min:           float
    d12:             float | None
    d21:             float | None
    chordal:         float
    cantelli_worst:  float
    union_cantelli:  float

    CSV_COLUMNS: ClassVar[tuple[str, ...]] = ("snr_db", "min_mean_pllr", "d_min", "d12", "d21",
                   "chordal", "cantelli_worst", "union_cantelli")
