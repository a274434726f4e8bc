from dataclasses import dataclass
from functools import cached_property

import numpy as np

from app.config import settings
from app.utils.exceptions import (
    DimensionException, SizeException, DomainException, InvariantException,
)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Codebook:
    """
    One user's constellation: an ordered stack of T×M complex symbols.

    Symbol order is insertion order; every pair index used elsewhere refers to it.
    When `grassmannian` is set, each symbol satisfies XᴴX = (P·T/M)·I.
    """
    symbols:      np.ndarray
    power:        float
    grassmannian: bool = False

    def __post_init__(self):
        arr = np.array(self.symbols, dtype=complex)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise DimensionException(f"Codebook symbols must have shape (K, T, M), got {arr.shape}")
        if arr.shape[0] < 1:
            raise SizeException("Codebook must contain at least one symbol")
        if not self.power > 0:
            raise DomainException(f"Codebook power must be positive, got {self.power}", field="power")
        object.__setattr__(self, "symbols", _frozen(arr))
        object.__setattr__(self, "power", float(self.power))
        if self.grassmannian:
            err = self.grassmannian_error()
            if err > settings.GRASSMANN_CHECK_TOL:
                raise InvariantException(
                    f"Symbols violate XᴴX = (PT/M)I: max deviation {err:.3e}"
                )

    # ─── Shape ────────────────────────────────────────────────────────────────
    @property
    def size(self) -> int:
        return self.symbols.shape[0]

    @property
    def T(self) -> int:
        return self.symbols.shape[1]

    @property
    def M(self) -> int:
        return self.symbols.shape[2]

    def __len__(self) -> int:
        return self.size

    # ─── Grassmannian structure ───────────────────────────────────────────────
    def grassmannian_error(self) -> float:
        """max over symbols of ‖XᴴX − (PT/M)I‖_F."""
        XhX = np.conj(np.swapaxes(self.symbols, 1, 2)) @ self.symbols
        target = (self.power * self.T / self.M) * np.eye(self.M)
        return float(np.max(np.linalg.norm(XhX - target, axis=(1, 2))))

    def is_grassmannian(self, tol: float | None = None) -> bool:
        tol = settings.GRASSMANN_CHECK_TOL if tol is None else tol
        return self.grassmannian_error() <= tol

    def directions(self) -> np.ndarray:
        """Orthonormal representatives X / √(PT/M) of a Grassmannian codebook."""
        return self.symbols / np.sqrt(self.power * self.T / self.M)

    def rescaled(self, power: float) -> "Codebook":
        """Same directions, scaled to a new power P."""
        if not power > 0:
            raise DomainException(f"Power must be positive, got {power}", field="power")
        factor = np.sqrt(power / self.power)
        return Codebook(self.symbols * factor, power, self.grassmannian)

    def __repr__(self):
        return f"<Codebook size={self.size} T={self.T} M={self.M} power={self.power:g}>"


@dataclass(frozen=True, eq=False)
class JointCodebook:
    """
    Cartesian product 𝒳1 × 𝒳2. Joint symbol index a = i·|𝒳2| + l holds [x1_i x2_l].
    """
    user1: Codebook
    user2: Codebook

    def __post_init__(self):
        if self.user1.T != self.user2.T:
            raise DimensionException(
                f"Both users need the same block length, got T={self.user1.T} and T={self.user2.T}"
            )

    @property
    def T(self) -> int:
        return self.user1.T

    @property
    def M1(self) -> int:
        return self.user1.M

    @property
    def M2(self) -> int:
        return self.user2.M

    @property
    def size(self) -> int:
        return self.user1.size * self.user2.size

    def __len__(self) -> int:
        return self.size

    @cached_property
    def symbols(self) -> np.ndarray:
        """Joint symbols with shape (|𝒳1|·|𝒳2|, T, M1+M2)."""
        K1, K2 = self.user1.size, self.user2.size
        x1 = np.repeat(self.user1.symbols, K2, axis=0)
        x2 = np.tile(self.user2.symbols, (K1, 1, 1))
        return _frozen(np.concatenate([x1, x2], axis=2))

    def index(self, i: int, l: int) -> int:
        return i * self.user2.size + l

    def split_index(self, a: int) -> tuple[int, int]:
        return divmod(int(a), self.user2.size)

    def rescaled(self, power1: float, power2: float | None = None) -> "JointCodebook":
        power2 = power1 if power2 is None else power2
        return JointCodebook(self.user1.rescaled(power1), self.user2.rescaled(power2))

    def swapped(self) -> "JointCodebook":
        return JointCodebook(self.user2, self.user1)

    def __repr__(self):
        return f"<JointCodebook |X1|={self.user1.size} |X2|={self.user2.size} T={self.T}>"
