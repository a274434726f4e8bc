import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from app.config import settings
from app.models.codebook import JointCodebook
from app.models.detector import MLDetector
from app.schemas.simulation import Scheme, SerPoint, SerResult, SimConfig
from app.schemas.system import SystemConfig
from app.services.pilot_service import pilot_service
from app.utils.exceptions import ConfigException, DimensionException, SizeException
from app.utils.tables import write_csv

logger = logging.getLogger(__name__)


def block_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based stream for (seed, key...), independent of worker count."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def _cn(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


class SimulatorService:

    # ─── Channel ──────────────────────────────────────────────────────────────
    def sample_blocks(self, X: np.ndarray, N: int, rng: np.random.Generator) -> np.ndarray:
        """Y_b = X_b H_bᵀ + Z_b for a (blocks, T, M) stack; H and Z i.i.d. CN(0, 1)."""
        B, T, M = X.shape
        H = _cn(rng, (B, N, M))
        Z = _cn(rng, (B, T, N))
        return X @ np.swapaxes(H, 1, 2) + Z

    def sample_block(self, x: np.ndarray, sys: SystemConfig, rng: np.random.Generator) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape != (sys.T, sys.M1 + sys.M2):
            raise DimensionException(f"Joint symbol of shape {x.shape} does not match T×(M1+M2) = "
                                     f"{sys.T}×{sys.M1 + sys.M2}")
        return self.sample_blocks(x[None], sys.N, rng)[0]

    # ─── Detection ────────────────────────────────────────────────────────────
    def ml_detect(self, Y: np.ndarray, joint: JointCodebook | MLDetector) -> int:
        detector = joint if isinstance(joint, MLDetector) else MLDetector(joint)
        return detector.detect(Y)

    # ─── Pairwise error probabilities ─────────────────────────────────────────
    def estimate_pep(self, x: np.ndarray, xp: np.ndarray, sys: SystemConfig, trials: int, seed: int) -> float:
        """Fraction of draws Y ~ x with L(x → x') ≤ 0."""
        if trials < 1:
            raise SizeException("estimate_pep needs at least one trial")
        x = np.asarray(x, dtype=complex)
        xp = np.asarray(xp, dtype=complex)
        detector = MLDetector(np.stack([x, xp]))
        Y = self.sample_blocks(np.broadcast_to(x, (trials,) + x.shape), sys.N, np.random.default_rng(seed))
        m = detector.metrics(Y)
        return float(np.mean(m[:, 0] - m[:, 1] <= 0))

    def estimate_pep_matrix(self, joint: JointCodebook, sys: SystemConfig, trials: int, seed: int) -> np.ndarray:
        """pep[a, b] = P(L(x_a → x_b) ≤ 0), zero diagonal; draws are shared across targets b."""
        if trials < 1:
            raise SizeException("estimate_pep_matrix needs at least one trial")
        detector = MLDetector(joint)
        X = joint.symbols
        pep = np.zeros((joint.size, joint.size))
        for a in range(joint.size):
            Y = self.sample_blocks(np.broadcast_to(X[a], (trials,) + X[a].shape), sys.N, block_rng(seed, a))
            m = detector.metrics(Y)
            pep[a] = np.mean(m >= m[:, a:a + 1], axis=0)
            pep[a, a] = 0.0
        return pep

    # ─── Symbol error rate ────────────────────────────────────────────────────
    def _run_chunk(self, symbols: np.ndarray, detector, K2: int, N: int, seed: int,
                   snr_idx: int, chunk_idx: int, blocks: int) -> tuple[int, int, int]:
        rng = block_rng(seed, snr_idx, chunk_idx)
        sent = rng.integers(symbols.shape[0], size=blocks)
        Y = self.sample_blocks(symbols[sent], N, rng)
        decided = detector.detect_batch(Y)
        s1, s2 = np.divmod(sent, K2)
        d1, d2 = np.divmod(decided, K2)
        return int(np.sum(decided != sent)), int(np.sum(d1 != s1)), int(np.sum(d2 != s2))

    def _run_point(self, joint: JointCodebook, detector, N: int, sim: SimConfig, snr_idx: int) -> tuple[int, int, int]:
        chunk = settings.SIM_CHUNK_BLOCKS
        sizes = [min(chunk, sim.num_blocks - start) for start in range(0, sim.num_blocks, chunk)]
        symbols = joint.symbols
        K2 = joint.user2.size

        def work(item: tuple[int, int]) -> tuple[int, int, int]:
            idx, blocks = item
            return self._run_chunk(symbols, detector, K2, N, sim.seed, snr_idx, idx, blocks)

        with ThreadPoolExecutor(max_workers=max(settings.SIM_WORKERS, 1)) as executor:
            counts = list(executor.map(work, enumerate(sizes)))
        return tuple(int(sum(c[i] for c in counts)) for i in range(3))

    def _pep_worst(self, joint: JointCodebook, sys: SystemConfig, sim: SimConfig) -> float:
        if joint.size < 2:
            return 0.0
        return float(self.estimate_pep_matrix(joint, sys, sim.pep_trials, sim.seed).max())

    def simulate_ser(self, joint: JointCodebook | None, sys: SystemConfig, sim: SimConfig) -> SerResult:
        """
        Joint and per-user symbol error rates over the SNR grid. The codebook's
        directions are kept and rescaled to each grid power.
        """
        layout = None
        if sim.scheme == Scheme.JOINT_ML:
            if joint is None:
                raise ConfigException("joint-ml simulation needs a joint codebook", field="input")
            if joint.T != sys.T:
                raise DimensionException(f"Codebook has T={joint.T} but the system has T={sys.T}")
        else:
            layout = pilot_service.layout(sys.T, sim.bits)

        result = SerResult(scheme=sim.scheme)
        for k, (snr_db, power) in enumerate(zip(sim.snr_grid_db, sim.snr_grid_linear)):
            if layout is None:
                scaled = joint.rescaled(power)
                detector = MLDetector(scaled)
            else:
                scaled, detector = pilot_service.scheme_for(sim.scheme, layout, sys.at_power(power))
            errors, errors1, errors2 = self._run_point(scaled, detector, sys.N, sim, k)
            n = sim.num_blocks
            ser = errors / n
            point = SerPoint(
                snr_db=snr_db,
                joint_ser=ser,
                user1_ser=errors1 / n,
                user2_ser=errors2 / n,
                blocks=n,
                std_err=math.sqrt(ser * (1.0 - ser) / n),
                pep_worst=self._pep_worst(scaled, sys, sim) if sim.pep_trials else None,
            )
            result.points.append(point)
            logger.info(f"{sim.scheme.value} @ {snr_db:g} dB: SER={ser:.4e} "
                        f"(user1 {point.user1_ser:.4e}, user2 {point.user2_ser:.4e}) over {n} blocks")
        return result

    def write_result(self, result: SerResult, path: str | Path) -> Path:
        return write_csv(path, SerResult.CSV_COLUMNS, result.rows())


simulator_service = SimulatorService()
