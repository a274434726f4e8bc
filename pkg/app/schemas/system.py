from pydantic import BaseModel, field_validator, model_validator


def db_to_linear(snr_db: float) -> float:
    return 10 ** (snr_db / 10)


class SystemConfig(BaseModel):
    """Channel dimensions and per-user SNRs (linear scale)."""
    T:  int
    M1: int = 1
    M2: int = 1
    N:  int = 1
    P1: float = 1.0
    P2: float = 1.0

    model_config = {"frozen": True}

    @field_validator("T")
    @classmethod
    def check_T(cls, v):
        if v < 2: raise ValueError("Block length T must be at least 2")
        return v

    @field_validator("M1", "M2", "N")
    @classmethod
    def check_antennas(cls, v):
        if v < 1: raise ValueError("Antenna counts must be at least 1")
        return v

    @field_validator("P1", "P2")
    @classmethod
    def check_power(cls, v):
        if not v > 0: raise ValueError("SNR must be positive (linear scale)")
        return v

    @model_validator(mode="after")
    def check_grassmannian_room(self):
        if self.T < self.M1 + self.M2:
            raise ValueError("Grassmannian signaling needs T >= M1 + M2")
        return self

    @property
    def P(self) -> float:
        return max(self.P1, self.P2)

    def at_power(self, power: float) -> "SystemConfig":
        """Both users at the same SNR, all dimensions unchanged."""
        return self.model_copy(update={"P1": power, "P2": power})
