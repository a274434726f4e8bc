import enum
from typing import ClassVar

from pydantic import BaseModel, field_validator, model_validator

from app.schemas.system import db_to_linear


class Scheme(str, enum.Enum):
    JOINT_ML   = "joint-ml"
    PILOT_ML   = "pilot-ml"
    PILOT_MMSE = "pilot-mmse"


class SimConfig(BaseModel):
    snr_grid_db: list[float]
    num_blocks:  int
    seed:        int = 0
    scheme:      Scheme = Scheme.JOINT_ML
    bits:        int | None = None        # per-user bit budget B, pilot schemes only
    pep_trials:  int = 0                   # draws per symbol for pep_worst; 0 skips it

    model_config = {"frozen": True}

    @field_validator("snr_grid_db")
    @classmethod
    def check_grid(cls, v):
        if not v: raise ValueError("SNR grid cannot be empty")
        return v

    @field_validator("num_blocks")
    @classmethod
    def check_blocks(cls, v):
        if v < 1: raise ValueError("num_blocks must be at least 1")
        return v

    @field_validator("pep_trials")
    @classmethod
    def check_pep_trials(cls, v):
        if v < 0: raise ValueError("pep_trials cannot be negative")
        return v

    @model_validator(mode="after")
    def check_bits(self):
        if self.scheme != Scheme.JOINT_ML and (self.bits is None or self.bits < 1):
            raise ValueError("Pilot schemes need a bit budget bits >= 1")
        if self.scheme != Scheme.JOINT_ML and self.pep_trials:
            raise ValueError("pep_trials applies to joint-ml only")
        return self

    @property
    def snr_grid_linear(self) -> list[float]:
        return [db_to_linear(s) for s in self.snr_grid_db]


class SerPoint(BaseModel):
    snr_db:    float
    joint_ser: float
    user1_ser: float
    user2_ser: float
    pep_worst: float | None = None
    blocks:    int
    std_err:   float


class SerResult(BaseModel):
    scheme: Scheme
    points: list[SerPoint] = []

    CSV_COLUMNS: ClassVar[tuple[str, ...]] = ("snr_db", "joint_ser", "user1_ser", "user2_ser", "blocks", "std_err")

    def rows(self) -> list[dict]:
        return [p.model_dump(include=set(self.CSV_COLUMNS)) for p in self.points]
