from dataclasses import dataclass

import numpy as np

from app.models.codebook import Codebook, JointCodebook
from app.utils.exceptions import DimensionException, InvariantException

UNIT_NORM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ObliquePoint:
    """
    Point of the oblique manifold: a T×(K1+K2) complex matrix with unit-norm
    columns. Columns [0, K1) are user-1 lines, [K1, K1+K2) user-2 lines.
    """
    C:     np.ndarray
    split: tuple[int, int]

    def __post_init__(self):
        C = np.array(self.C, dtype=complex)
        K1, K2 = (int(k) for k in self.split)
        if C.ndim != 2 or C.shape[1] != K1 + K2:
            raise DimensionException(f"Point of shape {C.shape} does not match split ({K1}, {K2})")
        if K1 < 1 or K2 < 0:
            raise DimensionException(f"Invalid column split ({K1}, {K2})")
        dev = column_norm_deviation(C)
        if dev > UNIT_NORM_TOL:
            raise InvariantException(f"Columns are not unit-norm (max deviation {dev:.3e})")
        C.setflags(write=False)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "split", (K1, K2))

    @property
    def T(self) -> int:
        return self.C.shape[0]

    @property
    def K1(self) -> int:
        return self.split[0]

    @property
    def K2(self) -> int:
        return self.split[1]

    def user_columns(self, user: int) -> np.ndarray:
        return self.C[:, :self.K1] if user == 1 else self.C[:, self.K1:]

    @classmethod
    def from_joint(cls, joint: JointCodebook) -> "ObliquePoint":
        if joint.M1 != 1 or joint.M2 != 1:
            raise DimensionException("The oblique parametrization needs single-antenna users (M1 = M2 = 1)")
        c1 = _normalize(joint.user1.symbols[:, :, 0].T)
        c2 = _normalize(joint.user2.symbols[:, :, 0].T)
        return cls(np.concatenate([c1, c2], axis=1), (joint.user1.size, joint.user2.size))

    @classmethod
    def from_codebook(cls, codebook: Codebook) -> "ObliquePoint":
        """Single-user point (K2 = 0)."""
        if codebook.M != 1:
            raise DimensionException("The oblique parametrization needs M = 1")
        return cls(_normalize(codebook.symbols[:, :, 0].T), (codebook.size, 0))

    def to_codebooks(self, power: float) -> tuple[Codebook, Codebook | None]:
        scale = np.sqrt(power * self.T)
        cb1 = Codebook((scale * _normalize(self.user_columns(1))).T[:, :, None], power, grassmannian=True)
        if self.K2 == 0:
            return cb1, None
        cb2 = Codebook((scale * _normalize(self.user_columns(2))).T[:, :, None], power, grassmannian=True)
        return cb1, cb2

    def to_joint(self, power: float) -> JointCodebook:
        cb1, cb2 = self.to_codebooks(power)
        if cb2 is None:
            raise DimensionException("A single-user point has no joint codebook")
        return JointCodebook(cb1, cb2)

    def __repr__(self):
        return f"<ObliquePoint T={self.T} split={self.split}>"


def column_norm_deviation(C: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.norm(C, axis=0) - 1.0))) if C.size else 0.0


def _normalize(C: np.ndarray) -> np.ndarray:
    return C / np.linalg.norm(C, axis=0, keepdims=True)
