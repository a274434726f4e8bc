import logging
import math
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from app.config import settings
from app.models.codebook import Codebook, JointCodebook
from app.schemas.codebook import CodebookFile, JointCodebookFile, PartitionStrategy
from app.utils import linalg as la
from app.utils.exceptions import (
    ConfigException, DimensionException, SizeException, InvariantException, NotFoundException,
    validation_details,
)

logger = logging.getLogger(__name__)

_KEY_TOL = 1e-12
_TABLE_CHUNK = 16


class SwapSearch:
    """
    Separation min{d12, d21} of a two-part split of one base codebook, with
    single swaps scored from the lines they move.

    A triple (c; a, b) has value tr((I + X_a X_aᴴ + X_b X_bᴴ)⁻¹ X_c X_cᴴ) and
    counts for a part when c ≠ a lie in it and b lies in the other part. For
    every ordered (c, a) of a part the two smallest values over b are kept with
    the minimizing b, so a swap only recomputes triples that touch the moved
    lines. Pair resolvents of the base are held in memory (n²·T² entries).
    """

    def __init__(self, base: Codebook, in1: np.ndarray):
        X = base.symbols
        self.n, self.T = base.size, base.T
        self.G = la.gram(X)
        self.R = np.empty((self.n, self.n, self.T, self.T), dtype=complex)
        for a in range(self.n):
            pairs = np.concatenate([np.broadcast_to(X[a], X.shape), X], axis=2)
            self.R[a] = la.resolvents(pairs)[0]
        self.in1 = np.asarray(in1, dtype=bool).copy()
        self._rebuild()

    # ─── Tables ───────────────────────────────────────────────────────────────
    def _values(self, c: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Triple values for targets c against every pair (a, b), shape (|c|, |a|, |b|)."""
        R = self.R[np.ix_(a, b)].reshape(-1, self.T, self.T)
        return la.trace_products(self.G[c], R).reshape(len(c), len(a), len(b))

    def _tables(self, own: np.ndarray, other: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        best1 = np.full((self.n, self.n), np.inf)
        best2 = np.full((self.n, self.n), np.inf)
        arg1 = np.full((self.n, self.n), -1)
        if len(own) < 2 or len(other) == 0:
            return best1, arg1, best2
        R = self.R[np.ix_(own, other)].reshape(-1, self.T, self.T)
        for start in range(0, len(own), _TABLE_CHUNK):
            cs = own[start:start + _TABLE_CHUNK]
            vals = la.trace_products(self.G[cs], R).reshape(len(cs), len(own), len(other))
            pos = np.argmin(vals, axis=2)[:, :, None]
            rows = np.ix_(cs, own)
            best1[rows] = np.take_along_axis(vals, pos, axis=2)[:, :, 0]
            arg1[rows] = other[pos[:, :, 0]]
            np.put_along_axis(vals, pos, np.inf, axis=2)
            best2[rows] = vals.min(axis=2)
        best1[own, own] = np.inf
        best2[own, own] = np.inf
        return best1, arg1, best2

    def _rebuild(self) -> None:
        p1, p2 = np.flatnonzero(self.in1), np.flatnonzero(~self.in1)
        self.tables = {1: self._tables(p1, p2), 2: self._tables(p2, p1)}

    def side_values(self) -> dict[int, float]:
        return {side: float(best1.min()) for side, (best1, _, _) in self.tables.items()}

    def separation(self) -> float:
        return min(self.side_values().values())

    def worst_triple(self) -> tuple[int, tuple[int, int, int]]:
        """(side, (c, a, b)) of the smallest counted triple."""
        values = self.side_values()
        side = min(values, key=values.get)
        best1, arg1, _ = self.tables[side]
        c, a = np.unravel_index(np.argmin(best1), best1.shape)
        return side, (int(c), int(a), int(arg1[c, a]))

    # ─── Swaps ────────────────────────────────────────────────────────────────
    def _side_after_swap(self, side: int, out: int, into: int) -> float:
        """Separation of `side` once its line `out` and the other part's `into` trade places."""
        mine = self.in1 if side == 1 else ~self.in1
        own_rest = np.flatnonzero(mine & (np.arange(self.n) != out))
        if len(own_rest) == 0:
            return np.inf
        other_new = np.append(np.flatnonzero(~mine & (np.arange(self.n) != into)), out)
        best1, arg1, best2 = self.tables[side]
        block = np.ix_(own_rest, own_rest)
        kept = float(np.where(arg1[block] == into, best2[block], best1[block]).min())

        T = self.T
        to_out = la.trace_products(self.G[own_rest], self.R[own_rest, out])
        np.fill_diagonal(to_out, np.inf)
        as_target = self._values(np.array([into]), own_rest, other_new).min()
        as_partner = la.trace_products(self.G[own_rest], self.R[into, other_new].reshape(-1, T, T)).min()
        return min(kept, float(to_out.min()), float(as_target), float(as_partner))

    def swap_value(self, p: int, q: int) -> float:
        """Separation after swapping p (part 1) with q (part 2); the split is not changed."""
        if not self.in1[p] or self.in1[q]:
            raise ConfigException(f"Swap needs p in part 1 and q in part 2, got ({p}, {q})")
        return min(self._side_after_swap(1, p, q), self._side_after_swap(2, q, p))

    def apply(self, p: int, q: int) -> None:
        self.in1[p], self.in1[q] = False, True
        self._rebuild()

    def candidates(self) -> list[tuple[int, int]]:
        """Swaps that move a line of the worst triple; no other swap can raise the separation."""
        side, (c, a, b) = self.worst_triple()
        p1, p2 = np.flatnonzero(self.in1), np.flatnonzero(~self.in1)
        if side == 1:
            pairs = {(p, q) for p in (c, a) for q in p2} | {(p, b) for p in p1}
        else:
            pairs = {(p, q) for q in (c, a) for p in p1} | {(b, q) for q in p2}
        return sorted(pairs)


class ConstellationService:

    # ─── Generation ───────────────────────────────────────────────────────────
    def random_grassmannian(self, T: int, M: int, count: int, power: float, seed: int) -> Codebook:
        """
        Q-factors of i.i.d. complex Gaussian T×M draws, scaled so that
        XᴴX = (P·T/M)·I. Deterministic given `seed`.
        """
        if M < 1 or T < M:
            raise DimensionException(f"Need T >= M >= 1, got T={T}, M={M}")
        if count < 1:
            raise SizeException("A codebook needs at least one symbol")
        rng = np.random.default_rng(seed)
        G = (rng.standard_normal((count, T, M)) + 1j * rng.standard_normal((count, T, M))) / math.sqrt(2)
        Q, _ = np.linalg.qr(G)
        symbols = Q * math.sqrt(power * T / M)
        codebook = Codebook(symbols, power)
        err = codebook.grassmannian_error()
        if err > settings.GRASSMANN_BUILD_TOL:
            raise InvariantException(f"Generated symbols deviate from XᴴX = (PT/M)I by {err:.3e}")
        return Codebook(codebook.symbols, power, grassmannian=True)

    # ─── Validation ───────────────────────────────────────────────────────────
    def check_identifiability(self, joint: JointCodebook, tol: float | None = None) -> list[tuple[int, int]]:
        """
        Unordered pairs (a, b), a < b, of joint symbols whose Gram matrices x xᴴ
        coincide to within `tol` in Frobenius norm.
        """
        tol = settings.IDENTIFIABILITY_TOL if tol is None else tol
        G = la.gram(joint.symbols)
        violations: list[tuple[int, int]] = []
        for a in range(joint.size - 1):
            dist = np.sqrt(la.frobenius_sq(G[a + 1:] - G[a]))
            for offset in np.flatnonzero(dist <= tol):
                violations.append((a, a + 1 + int(offset)))
        if violations:
            logger.warning(f"{len(violations)} non-identifiable joint symbol pair(s), first {violations[0]}")
        return violations

    # ─── Partitioning ─────────────────────────────────────────────────────────
    def partition(
        self,
        base: Codebook,
        strategy: PartitionStrategy | str = PartitionStrategy.RANDOM,
        seed: int = 0,
    ) -> JointCodebook:
        """
        Split `base` into disjoint user codebooks of sizes ⌈n/2⌉ and ⌊n/2⌋.
        Symbols keep their base order inside each part.
        """
        strategy = PartitionStrategy(strategy)
        n = base.size
        if n < 2:
            raise SizeException("Partitioning needs at least two base symbols")
        k1 = (n + 1) // 2

        if strategy == PartitionStrategy.FIRST_HALF:
            part1 = np.arange(k1)
        else:
            perm = np.random.default_rng(seed).permutation(n)
            part1 = np.sort(perm[:k1])

        if strategy == PartitionStrategy.GREEDY_SWAP:
            part1 = self._greedy_swap(base, part1)

        joint = self._split(base, part1)
        logger.info(f"Partitioned {n} symbols ({strategy.value}): "
                    f"|X1|={joint.user1.size} |X2|={joint.user2.size}")
        return joint

    def _split(self, base: Codebook, part1: np.ndarray) -> JointCodebook:
        mask = np.zeros(base.size, dtype=bool)
        mask[part1] = True
        return JointCodebook(
            Codebook(base.symbols[mask], base.power, base.grassmannian),
            Codebook(base.symbols[~mask], base.power, base.grassmannian),
        )

    def _greedy_swap(self, base: Codebook, part1: np.ndarray) -> np.ndarray:
        """
        First-improvement local search over single swaps between the two parts.
        The chordal max covers every base pair whatever the split, so the search
        raises the users' separation min{d12, d21} and stops when no swap does.
        """
        in1 = np.zeros(base.size, dtype=bool)
        in1[part1] = True
        search = SwapSearch(base, in1)
        sep = search.separation()
        if not math.isfinite(sep):
            return np.flatnonzero(in1)

        for swap in range(settings.PARTITION_MAX_SWAPS):
            tol = _KEY_TOL * max(1.0, abs(sep))
            for p, q in search.candidates():
                value = search.swap_value(p, q)
                if value > sep + tol:
                    search.apply(p, q)
                    logger.debug(f"Swap {swap}: {p} <-> {q}, separation {sep:.6f} -> {value:.6f}")
                    sep = value
                    break
            else:
                break
        else:
            logger.warning(f"Greedy-swap stopped after {settings.PARTITION_MAX_SWAPS} swaps")
        logger.info(f"Greedy-swap separation {sep:.6f}")
        return np.flatnonzero(search.in1)

    # ─── Correlated fading ────────────────────────────────────────────────────
    def correlation_transform(self, codebook: Codebook, R: np.ndarray, renormalize: bool = False) -> Codebook:
        """
        Right-multiplies every symbol by R^{-1/2}. The power is recomputed from
        the transformed norms unless `renormalize` restores the original mean
        energy P·T.
        """
        R = np.asarray(R, dtype=complex)
        if R.shape != (codebook.M, codebook.M):
            raise DimensionException(f"Correlation matrix must be {codebook.M}×{codebook.M}, got {R.shape}")
        if np.array_equal(R, np.eye(codebook.M)):
            return codebook
        W = la.hermitian_inv_sqrt(R)
        symbols = codebook.symbols @ W
        mean_energy = float(np.mean(la.frobenius_sq(symbols)))
        if renormalize:
            symbols = symbols * math.sqrt(codebook.power * codebook.T / mean_energy)
            power = codebook.power
        else:
            power = mean_energy / codebook.T
        transformed = Codebook(symbols, power)
        if transformed.is_grassmannian():
            return Codebook(transformed.symbols, power, grassmannian=True)
        return transformed

    # ─── Files ────────────────────────────────────────────────────────────────
    def load_codebook(self, path: str | Path) -> Codebook:
        return self._read(path, CodebookFile).to_codebook()

    def save_codebook(self, codebook: Codebook, path: str | Path) -> Path:
        return self._write(CodebookFile.from_codebook(codebook), path)

    def load_joint(self, path: str | Path) -> JointCodebook:
        return self._read(path, JointCodebookFile).to_joint()

    def save_joint(self, joint: JointCodebook, path: str | Path) -> Path:
        return self._write(JointCodebookFile.from_joint(joint), path)

    def _read(self, path: str | Path, model: type[CodebookFile] | type[JointCodebookFile]):
        path = Path(path)
        if not path.is_file():
            raise NotFoundException(f"Codebook file '{path}'")
        try:
            return model.model_validate_json(path.read_text())
        except ValidationError as e:
            raise ConfigException(f"Invalid codebook file '{path}'", details=validation_details(e.errors()))

    def _write(self, document: CodebookFile | JointCodebookFile, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(document.model_dump_json(indent=2))
        logger.info(f"Wrote {path}")
        return path


constellation_service = ConstellationService()
