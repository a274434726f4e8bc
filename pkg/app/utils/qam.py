"""QAM tables for 2^b points, b = 0..10, Gray-coded per axis, unit average energy."""
from functools import lru_cache

import numpy as np

from app.utils.exceptions import ConfigException

MAX_BITS = 10


def _axis_bits(b: int) -> tuple[int, int]:
    """(in-phase bits, quadrature bits). Odd orders put the extra bit on the in-phase axis."""
    if b == 1:
        return 1, 0
    return (b + 1) // 2, b // 2


def _gray(v: np.ndarray) -> np.ndarray:
    return v ^ (v >> 1)


def _inverse_gray(g: np.ndarray, nbits: int) -> np.ndarray:
    v = g.copy()
    shift = 1
    while shift < max(nbits, 1):
        v ^= v >> shift
        shift <<= 1
    return v


def _pam_levels(nbits: int) -> np.ndarray:
    L = 1 << nbits
    return 2.0 * np.arange(L) - (L - 1)


@lru_cache(maxsize=None)
def _table(b: int) -> tuple[np.ndarray, float]:
    bi, bq = _axis_bits(b)
    idx = np.arange(1 << b)
    vi, vq = idx >> bq, idx & ((1 << bq) - 1)
    # Gray: the position p on an axis carries the label gray(p)
    pi = _inverse_gray(vi, bi)
    pq = _inverse_gray(vq, bq)
    points = _pam_levels(bi)[pi] + 1j * (_pam_levels(bq)[pq] if bq else 0.0)
    if b == 0:
        points = np.ones(1, dtype=complex)
    scale = float(np.sqrt(np.mean(np.abs(points) ** 2)))
    out = points / scale
    out.setflags(write=False)
    return out, scale


def _check_order(b: int) -> None:
    if not 0 <= b <= MAX_BITS:
        raise ConfigException(f"QAM order 2^{b} is not supported (0 <= b <= {MAX_BITS})", field="bits")


def qam_constellation(b: int) -> np.ndarray:
    """Points indexed by their bit label (MSBs on the in-phase axis)."""
    _check_order(b)
    return _table(b)[0]


def qam_modulate(labels: np.ndarray, b: int) -> np.ndarray:
    return qam_constellation(b)[np.asarray(labels)]


def qam_demodulate(symbols: np.ndarray, b: int) -> np.ndarray:
    """Nearest-point hard decisions as bit labels, per axis."""
    _check_order(b)
    symbols = np.asarray(symbols, dtype=complex)
    if b == 0:
        return np.zeros(symbols.shape, dtype=np.int64)
    _, scale = _table(b)
    bi, bq = _axis_bits(b)
    vi = _gray(_nearest_position(symbols.real * scale, bi))
    if bq == 0:
        return vi
    vq = _gray(_nearest_position(symbols.imag * scale, bq))
    return (vi << bq) | vq


def _nearest_position(u: np.ndarray, nbits: int) -> np.ndarray:
    L = 1 << nbits
    return np.clip(np.rint((u + (L - 1)) / 2.0), 0, L - 1).astype(np.int64)
