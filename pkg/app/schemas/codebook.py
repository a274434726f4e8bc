"""
JSON file format for codebooks:

    { "T": int, "M": int, "power": float,
      "symbols": [ [ [re, im], ... T·M entries row-major ], ... ] }

Joint codebooks store two such objects under `user1` and `user2`.
"""
import enum

import numpy as np
from pydantic import BaseModel, field_validator, model_validator

from app.models.codebook import Codebook, JointCodebook


class PartitionStrategy(str, enum.Enum):
    RANDOM      = "random"
    GREEDY_SWAP = "greedy-swap"
    FIRST_HALF  = "first-half"


class CodebookFile(BaseModel):
    T:       int
    M:       int
    power:   float
    symbols: list[list[tuple[float, float]]]

    @field_validator("T", "M")
    @classmethod
    def check_dims(cls, v):
        if v < 1: raise ValueError("Dimensions must be positive")
        return v

    @field_validator("power")
    @classmethod
    def check_power(cls, v):
        if not v > 0: raise ValueError("Power must be positive")
        return v

    @model_validator(mode="after")
    def check_entries(self):
        if not self.symbols:
            raise ValueError("A codebook needs at least one symbol")
        expected = self.T * self.M
        for k, sym in enumerate(self.symbols):
            if len(sym) != expected:
                raise ValueError(f"Symbol {k} has {len(sym)} entries, expected T·M = {expected}")
        return self

    @classmethod
    def from_codebook(cls, codebook: Codebook) -> "CodebookFile":
        flat = codebook.symbols.reshape(codebook.size, -1)
        return cls(
            T=codebook.T,
            M=codebook.M,
            power=codebook.power,
            symbols=[[(float(z.real), float(z.imag)) for z in row] for row in flat],
        )

    def to_codebook(self) -> Codebook:
        arr = np.array(self.symbols, dtype=float)
        symbols = (arr[..., 0] + 1j * arr[..., 1]).reshape(len(self.symbols), self.T, self.M)
        candidate = Codebook(symbols, self.power)
        # the file carries no flag; infer it from the symbols
        if candidate.is_grassmannian():
            return Codebook(symbols, self.power, grassmannian=True)
        return candidate


class JointCodebookFile(BaseModel):
    user1: CodebookFile
    user2: CodebookFile

    @model_validator(mode="after")
    def check_block_length(self):
        if self.user1.T != self.user2.T:
            raise ValueError("Both users must share the block length T")
        return self

    @classmethod
    def from_joint(cls, joint: JointCodebook) -> "JointCodebookFile":
        return cls(
            user1=CodebookFile.from_codebook(joint.user1),
            user2=CodebookFile.from_codebook(joint.user2),
        )

    def to_joint(self) -> JointCodebook:
        return JointCodebook(self.user1.to_codebook(), self.user2.to_codebook())
