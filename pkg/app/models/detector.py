import numpy as np

from app.models.codebook import JointCodebook
from app.utils import linalg as la
from app.utils.exceptions import DimensionException

# joint symbols scored per slice; bounds the (blocks × symbols) metric table
SCAN_SLICE = 4096


class MLDetector:
    """
    Exhaustive maximum-likelihood detection over a stack of joint symbols:

        argmax_x  −tr((I + x xᴴ)⁻¹ Y Yᴴ) − N log det(I + x xᴴ)

    Resolvents and log-determinants are computed once. Ties go to the lowest index.
    """

    def __init__(self, symbols: np.ndarray | JointCodebook):
        symbols = symbols.symbols if isinstance(symbols, JointCodebook) else np.asarray(symbols, dtype=complex)
        if symbols.ndim != 3:
            raise DimensionException(f"Expected a (K, T, M) symbol stack, got {symbols.shape}")
        self.size, self.T = symbols.shape[0], symbols.shape[1]
        R, logdets = la.resolvents(symbols)
        self._R_conj = np.conj(R.reshape(self.size, self.T * self.T))
        self._logdets = logdets

    def __len__(self) -> int:
        return self.size

    def _prepare(self, Y: np.ndarray) -> tuple[np.ndarray, int]:
        Y = np.asarray(Y, dtype=complex)
        if Y.ndim == 2:
            Y = Y[None]
        if Y.ndim != 3 or Y.shape[1] != self.T:
            raise DimensionException(f"Received blocks of shape {Y.shape} do not match T={self.T}")
        Z = Y @ np.conj(np.swapaxes(Y, 1, 2))
        return Z.reshape(Z.shape[0], self.T * self.T), Y.shape[2]

    def metrics(self, Y: np.ndarray, start: int = 0, stop: int | None = None) -> np.ndarray:
        """(blocks, symbols) table of log-likelihoods without the −NT log π constant."""
        Z, N = self._prepare(Y)
        stop = self.size if stop is None else stop
        return -np.real(Z @ self._R_conj[start:stop].T) - N * self._logdets[start:stop]

    def detect_batch(self, Y: np.ndarray) -> np.ndarray:
        Z, N = self._prepare(Y)
        best = np.full(Z.shape[0], -np.inf)
        best_idx = np.zeros(Z.shape[0], dtype=np.int64)
        for start in range(0, self.size, SCAN_SLICE):
            stop = min(start + SCAN_SLICE, self.size)
            m = -np.real(Z @ self._R_conj[start:stop].T) - N * self._logdets[start:stop]
            local = np.argmax(m, axis=1)
            value = m[np.arange(m.shape[0]), local]
            better = value > best
            best[better] = value[better]
            best_idx[better] = start + local[better]
        return best_idx

    def detect(self, Y: np.ndarray) -> int:
        return int(self.detect_batch(Y)[0])

    def __repr__(self):
        return f"<MLDetector size={self.size} T={self.T}>"
