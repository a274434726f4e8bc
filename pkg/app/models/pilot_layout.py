from dataclasses import dataclass

import numpy as np

from app.config import settings
from app.utils import qam
from app.utils.exceptions import ConfigException

PILOT_SLOTS = 2


@dataclass(frozen=True)
class PilotLayout:
    """
    Orthogonal-pilot block for two single-antenna users: slot 0 carries the
    user-1 pilot, slot 1 the user-2 pilot, slots 2..T-1 carry QAM data.

    `allocation[i]` is the number of bits in data slot i; a user's B-bit label
    is read MSB-first across the data slots.
    """
    T:                 int
    bits:              int
    allocation:        tuple[int, ...]
    pilot_power_ratio: float = 1.0

    @classmethod
    def build(cls, T: int, bits: int, pilot_power_ratio: float | None = None) -> "PilotLayout":
        ratio = settings.PILOT_POWER_RATIO if pilot_power_ratio is None else pilot_power_ratio
        if T < PILOT_SLOTS + 1:
            raise ConfigException(f"The pilot scheme needs T >= 3, got T={T}", field="T")
        if bits < 1:
            raise ConfigException("The pilot scheme needs at least one bit per user", field="bits")
        if not ratio > 0:
            raise ConfigException("pilot_power_ratio must be positive", field="pilot_power_ratio")
        slots = T - PILOT_SLOTS
        max_bits_per_slot = min(int(np.log2(settings.MAX_QAM_ORDER)), qam.MAX_BITS)
        if bits > slots * max_bits_per_slot:
            raise ConfigException(
                f"B={bits} bits do not fit {slots} data slots at QAM order {settings.MAX_QAM_ORDER}",
                field="bits",
            )
        base, extra = divmod(bits, slots)
        allocation = tuple([base + 1] * extra + [base] * (slots - extra))
        return cls(T=T, bits=bits, allocation=allocation, pilot_power_ratio=ratio)

    @property
    def data_slots(self) -> int:
        return self.T - PILOT_SLOTS

    @property
    def size(self) -> int:
        return 1 << self.bits

    def energies(self, power: float) -> tuple[float, float]:
        """(pilot slot energy, average data slot energy) so that the block averages P·T."""
        data = power * self.T / (self.pilot_power_ratio + self.data_slots)
        return self.pilot_power_ratio * data, data

    def split_labels(self, labels: np.ndarray) -> np.ndarray:
        """B-bit labels → (..., data_slots) per-slot labels."""
        labels = np.asarray(labels, dtype=np.int64)
        out = np.empty(labels.shape + (self.data_slots,), dtype=np.int64)
        remaining = self.bits
        for i, b in enumerate(self.allocation):
            remaining -= b
            out[..., i] = (labels >> remaining) & ((1 << b) - 1)
        return out

    def join_labels(self, slot_labels: np.ndarray) -> np.ndarray:
        slot_labels = np.asarray(slot_labels, dtype=np.int64)
        labels = np.zeros(slot_labels.shape[:-1], dtype=np.int64)
        for i, b in enumerate(self.allocation):
            labels = (labels << b) | slot_labels[..., i]
        return labels
