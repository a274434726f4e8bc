import logging

import numpy as np

from app.config import settings
from app.models.codebook import Codebook, JointCodebook
from app.models.detector import MLDetector
from app.models.pilot_layout import PilotLayout
from app.schemas.simulation import Scheme
from app.schemas.system import SystemConfig
from app.utils import qam
from app.utils.exceptions import ConfigException, DimensionException

logger = logging.getLogger(__name__)


def _check_system(sys: SystemConfig, layout: PilotLayout) -> None:
    if sys.M1 != 1 or sys.M2 != 1:
        raise ConfigException("The pilot scheme needs single-antenna users (M1 = M2 = 1)", field="M")
    if sys.T != layout.T:
        raise DimensionException(f"Layout has T={layout.T} but the system has T={sys.T}")


class PilotMMSEDetector:
    """
    Systematic receiver: per-user MMSE channel estimate from its pilot slot,
    two-user linear MMSE equalization per data slot, nearest-point QAM demapping.
    Returns joint indices label1·2^B + label2.
    """

    def __init__(self, layout: PilotLayout, sys: SystemConfig, channels: np.ndarray | None = None):
        _check_system(sys, layout)
        self.layout = layout
        ep1, ed1 = layout.energies(sys.P1)
        ep2, ed2 = layout.energies(sys.P2)
        self.pilot_amp = np.sqrt([ep1, ep2])
        self.data_amp = np.sqrt([ed1, ed2])
        self.channels = None if channels is None else np.asarray(channels, dtype=complex)

    def estimate_channels(self, Y: np.ndarray) -> np.ndarray:
        """ĥ_k = p_k* · y_pilot_k / (|p_k|² + 1) per receive antenna; shape (blocks, N, 2)."""
        p = self.pilot_amp
        h1 = p[0] * Y[:, 0, :] / (p[0] ** 2 + 1)
        h2 = p[1] * Y[:, 1, :] / (p[1] ** 2 + 1)
        return np.stack([h1, h2], axis=-1)

    def equalize(self, Y: np.ndarray) -> np.ndarray:
        """Unit-energy data estimates, shape (blocks, data_slots, 2)."""
        if self.channels is None:
            H = self.estimate_channels(Y)
        else:
            H = np.broadcast_to(self.channels, (Y.shape[0],) + self.channels.shape[-2:])
        A = H * self.data_amp
        Ah = np.conj(np.swapaxes(A, 1, 2))
        gram = Ah @ A
        reg = gram + np.eye(2)
        W = np.linalg.solve(reg, Ah)
        bias = np.real(np.diagonal(np.linalg.solve(reg, gram), axis1=1, axis2=2))
        bias = np.where(bias > np.finfo(float).tiny, bias, 1.0)
        s = np.einsum("bkn,bdn->bdk", W, Y[:, 2:, :])
        return s / bias[:, None, :]

    def detect_labels(self, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Y = np.asarray(Y, dtype=complex)
        if Y.ndim == 2:
            Y = Y[None]
        s = self.equalize(Y)
        slots1 = np.empty(s.shape[:2], dtype=np.int64)
        slots2 = np.empty(s.shape[:2], dtype=np.int64)
        for d, b in enumerate(self.layout.allocation):
            slots1[:, d] = qam.qam_demodulate(s[:, d, 0], b)
            slots2[:, d] = qam.qam_demodulate(s[:, d, 1], b)
        return self.layout.join_labels(slots1), self.layout.join_labels(slots2)

    def detect_batch(self, Y: np.ndarray) -> np.ndarray:
        l1, l2 = self.detect_labels(Y)
        return l1 * self.layout.size + l2


class PilotService:

    def layout(self, T: int, bits: int, pilot_power_ratio: float | None = None) -> PilotLayout:
        layout = PilotLayout.build(T, bits, pilot_power_ratio)
        logger.debug(f"Pilot layout T={T} B={bits}: allocation {layout.allocation}")
        return layout

    # ─── Transmitter ──────────────────────────────────────────────────────────
    def user_blocks(self, layout: PilotLayout, user: int, power: float, labels: np.ndarray | None = None) -> np.ndarray:
        """
        (len(labels), T) transmit vectors of one user; all 2^B labels by default.
        Energy is P·T averaged over the labels. A block holds P·T exactly only
        when every data slot is constant-modulus (at most 2 bits per slot).
        """
        labels = np.arange(layout.size) if labels is None else np.asarray(labels, dtype=np.int64)
        if np.any((labels < 0) | (labels >= layout.size)):
            raise ConfigException(f"Labels must lie in [0, 2^{layout.bits})", field="bits")
        e_pilot, e_data = layout.energies(power)
        blocks = np.zeros(labels.shape + (layout.T,), dtype=complex)
        blocks[..., user - 1] = np.sqrt(e_pilot)
        slot_labels = layout.split_labels(labels)
        for d, b in enumerate(layout.allocation):
            blocks[..., 2 + d] = np.sqrt(e_data) * qam.qam_modulate(slot_labels[..., d], b)
        return blocks

    def pilot_encode(self, bits: tuple[int, int], sys: SystemConfig, layout: PilotLayout) -> np.ndarray:
        """T×2 joint symbol for the label pair (user-1 label, user-2 label); energies as in `user_blocks`."""
        _check_system(sys, layout)
        x1 = self.user_blocks(layout, 1, sys.P1, np.array([bits[0]]))[0]
        x2 = self.user_blocks(layout, 2, sys.P2, np.array([bits[1]]))[0]
        return np.stack([x1, x2], axis=1)

    def joint_codebook(self, layout: PilotLayout, sys: SystemConfig) -> JointCodebook:
        _check_system(sys, layout)
        return JointCodebook(
            Codebook(self.user_blocks(layout, 1, sys.P1)[:, :, None], sys.P1),
            Codebook(self.user_blocks(layout, 2, sys.P2)[:, :, None], sys.P2),
        )

    # ─── Receivers ────────────────────────────────────────────────────────────
    def ml_detector(self, layout: PilotLayout, sys: SystemConfig) -> tuple[JointCodebook, MLDetector]:
        joint_size = layout.size ** 2
        if joint_size > settings.PILOT_ML_MAX_JOINT:
            raise ConfigException(
                f"Exhaustive ML over {joint_size} joint blocks exceeds {settings.PILOT_ML_MAX_JOINT}",
                field="bits",
            )
        joint = self.joint_codebook(layout, sys)
        return joint, MLDetector(joint)

    def pilot_ml_detect(self, Y: np.ndarray, sys: SystemConfig, layout: PilotLayout) -> tuple[int, int]:
        joint, detector = self.ml_detector(layout, sys)
        return joint.split_index(detector.detect(Y))

    def pilot_mmse_detect(
        self, Y: np.ndarray, sys: SystemConfig, layout: PilotLayout, channels: np.ndarray | None = None,
    ) -> tuple[int, int]:
        """Label pair from the systematic receiver; `channels` (N×2) replaces the pilot estimate."""
        l1, l2 = PilotMMSEDetector(layout, sys, channels).detect_labels(Y)
        return int(l1[0]), int(l2[0])

    def scheme_for(self, scheme: Scheme, layout: PilotLayout, sys: SystemConfig):
        """(transmit codebook, detector with `detect_batch`) for a pilot scheme."""
        if scheme == Scheme.PILOT_ML:
            return self.ml_detector(layout, sys)
        if scheme == Scheme.PILOT_MMSE:
            return self.joint_codebook(layout, sys), PilotMMSEDetector(layout, sys)
        raise ConfigException(f"{scheme.value} is not a pilot scheme", field="scheme")


pilot_service = PilotService()
