import logging
import math

import numpy as np

from app.config import settings
from app.models.codebook import JointCodebook
from app.schemas.metrics import PairStats, MetricReport, ErrorTypeMinima
from app.utils import linalg as la
from app.utils.exceptions import (
    DimensionException, SizeException, DomainException, InvariantException,
)

logger = logging.getLogger(__name__)


class SymbolTables:
    """Per-symbol Gram matrices, resolvents and log-determinants of a symbol stack."""

    def __init__(self, symbols: np.ndarray):
        self.symbols = symbols
        self.T = symbols.shape[1]
        self.grams = la.gram(symbols)
        self.resolvents, self.logdets = la.resolvents(symbols)
        self.resolvent_traces = np.real(np.trace(self.resolvents, axis1=1, axis2=2))

    def __len__(self) -> int:
        return self.symbols.shape[0]

    def d_matrix(self) -> np.ndarray:
        """d(a → b) = tr((I + x_b x_bᴴ)⁻¹ x_a x_aᴴ) for every ordered pair; diagonal included."""
        return la.trace_products(self.grams, self.resolvents)

    def mean_matrix(self, d: np.ndarray | None = None) -> np.ndarray:
        """E[L(a → b)]/N = ψ − T + tr R_b + d(a → b)."""
        d = self.d_matrix() if d is None else d
        psi = self.logdets[None, :] - self.logdets[:, None]
        return np.maximum(psi - self.T + self.resolvent_traces[None, :] + d, 0.0)

    def var_matrix(self, d: np.ndarray | None = None) -> np.ndarray:
        """Var[L(a → b)]/N = tr(Λ²) = tr((S_a R_b)²) − 2 tr(S_a R_b) + T."""
        d = self.d_matrix() if d is None else d
        A, T = len(self), self.T
        S = np.eye(T, dtype=complex)[None] + self.grams
        tr_sq = np.empty((A, A))
        for a in range(A):
            P = S[a][None] @ self.resolvents
            tr_sq[a] = np.real(np.einsum("btu,but->b", P, P))
        tr_lin = self.resolvent_traces[None, :] + d
        return np.maximum(tr_sq - 2.0 * tr_lin + T, 0.0)


def _masked_argmin(values: np.ndarray, valid: np.ndarray) -> tuple[float, tuple[int, ...]]:
    masked = np.where(valid, values, np.inf)
    flat = int(np.argmin(masked))
    idx = np.unravel_index(flat, masked.shape)
    return float(masked[idx]), tuple(int(i) for i in idx)


def _cantelli(mean: np.ndarray | float, var: np.ndarray | float) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    denom = var + mean ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(mean > 0, var / np.where(denom > 0, denom, 1.0), 1.0)
    return np.clip(out, 0.0, 1.0)


def _check_pair_shapes(x: np.ndarray, xp: np.ndarray) -> None:
    if x.ndim != 2 or xp.ndim != 2 or x.shape != xp.shape:
        raise DimensionException(f"Symbol shapes differ or are not 2-D: {x.shape} vs {xp.shape}")


class MetricsService:

    # ─── Likelihoods ──────────────────────────────────────────────────────────
    def log_likelihood(self, Y: np.ndarray, x: np.ndarray) -> float:
        """log p(Y | x) = −tr(Yᴴ(I+xxᴴ)⁻¹Y) − N log det(I+xxᴴ) − NT log π."""
        Y = np.asarray(Y, dtype=complex)
        x = np.asarray(x, dtype=complex)
        if Y.ndim != 2 or x.ndim != 2 or Y.shape[0] != x.shape[0]:
            raise DimensionException(f"Y of shape {Y.shape} does not match symbol of shape {x.shape}")
        T, N = Y.shape
        R, logdet = la.resolvent(x)
        quad = float(np.real(np.trace(np.conj(Y.T) @ R @ Y)))
        return -quad - N * logdet - N * T * math.log(math.pi)

    def pllr(self, Y: np.ndarray, x: np.ndarray, xp: np.ndarray) -> float:
        """
        L(x → x') = N log(det(I+x'x'ᴴ)/det(I+xxᴴ)) − tr(((I+xxᴴ)⁻¹ − (I+x'x'ᴴ)⁻¹) Y Yᴴ).
        """
        Y = np.asarray(Y, dtype=complex)
        x = np.asarray(x, dtype=complex)
        xp = np.asarray(xp, dtype=complex)
        _check_pair_shapes(x, xp)
        if Y.ndim != 2 or Y.shape[0] != x.shape[0]:
            raise DimensionException(f"Y of shape {Y.shape} does not match symbols of shape {x.shape}")
        N = Y.shape[1]
        R, logdet = la.resolvent(x)
        Rp, logdet_p = la.resolvent(xp)
        YYh = Y @ np.conj(Y.T)
        return N * (logdet_p - logdet) - float(np.real(np.trace((R - Rp) @ YYh)))

    # ─── Pair statistics ──────────────────────────────────────────────────────
    def pair_stats(self, x: np.ndarray, xp: np.ndarray, N: int) -> PairStats:
        """
        Moments of the PLLR from the eigenvalues λ_i of
        Λ = (I+xxᴴ)^{1/2}(I+x'x'ᴴ)⁻¹(I+xxᴴ)^{1/2} − I:
        E[L] = N Σ(λ_i − log(1+λ_i)), Var[L] = N Σ λ_i².
        """
        x = np.asarray(x, dtype=complex)
        xp = np.asarray(xp, dtype=complex)
        _check_pair_shapes(x, xp)
        S_half = la.hermitian_sqrt(la.identity_plus_gram(x))
        Rp, _ = la.resolvent(xp)
        Lam = la.hermitian_part(S_half @ Rp @ S_half) - np.eye(x.shape[0])
        eigs = np.linalg.eigvalsh(Lam)
        mean = N * float(np.sum(np.maximum(eigs - np.log1p(eigs), 0.0)))
        var = N * float(np.sum(eigs ** 2))
        d_value = float(np.real(np.trace(Rp @ la.gram(x))))
        return PairStats(
            mean_pllr=mean,
            var_pllr=var,
            d_value=d_value,
            cantelli=float(_cantelli(mean, var)),
            lambda_eigs=[float(v) for v in eigs],
        )

    def pair_moments_direct(self, x: np.ndarray, xp: np.ndarray, N: int) -> tuple[float, float]:
        """Mean and variance of the PLLR from determinants and traces, without Λ."""
        x = np.asarray(x, dtype=complex)
        xp = np.asarray(xp, dtype=complex)
        _check_pair_shapes(x, xp)
        tables = SymbolTables(np.stack([x, xp]))
        d = tables.d_matrix()
        return (
            N * float(tables.mean_matrix(d)[0, 1]),
            N * float(tables.var_matrix(d)[0, 1]),
        )

    def error_exponent(self, x: np.ndarray, xp: np.ndarray) -> float:
        """KL divergence D(CN(0, I+xxᴴ) ‖ CN(0, I+x'x'ᴴ)) = E[L]/N, the large-N PEP exponent."""
        return self.pair_stats(x, xp, 1).mean_pllr

    def union_bounds(self, pep: np.ndarray) -> tuple[float, float]:
        pep = np.asarray(pep, dtype=float)
        if pep.ndim != 2 or pep.shape[0] != pep.shape[1]:
            raise DimensionException(f"PEP matrix must be square, got shape {pep.shape}")
        n = pep.shape[0]
        if n == 0:
            raise SizeException("PEP matrix is empty")
        off = pep[~np.eye(n, dtype=bool)]
        worst = float(off.max()) if off.size else 0.0
        return worst / n, min(1.0, (n - 1) * worst)

    # ─── d-metrics ────────────────────────────────────────────────────────────
    def d_value(self, x: np.ndarray, xp: np.ndarray) -> float:
        x = np.asarray(x, dtype=complex)
        xp = np.asarray(xp, dtype=complex)
        _check_pair_shapes(x, xp)
        Rp, _ = la.resolvent(xp)
        return float(np.real(np.trace(Rp @ la.gram(x))))

    def d_min(self, joint: JointCodebook, tables: SymbolTables | None = None) -> tuple[float, tuple[int, int]]:
        """Minimum of d(x → x') over ordered pairs of distinct joint symbols, with the pair."""
        if joint.size < 2:
            raise SizeException("d_min needs at least two joint symbols")
        tables = SymbolTables(joint.symbols) if tables is None else tables
        d = tables.d_matrix()
        return _masked_argmin(d, ~np.eye(joint.size, dtype=bool))

    def _d12_values(self, joint: JointCodebook, tables: SymbolTables | None = None) -> np.ndarray:
        K1, K2 = joint.user1.size, joint.user2.size
        if K1 < 2:
            raise SizeException("d12 needs at least two user-1 symbols")
        tables = SymbolTables(joint.symbols) if tables is None else tables
        # resolvent of joint symbol b = (j, l) is (I + x1_j x1_jᴴ + x2_l x2_lᴴ)⁻¹
        vals = la.trace_products(la.gram(joint.user1.symbols), tables.resolvents)
        j_of_b = np.repeat(np.arange(K1), K2)
        vals[np.arange(K1)[:, None] == j_of_b[None, :]] = np.inf
        return vals

    def d12(self, joint: JointCodebook, tables: SymbolTables | None = None) -> float:
        return float(self._d12_values(joint, tables).min())

    def d21(self, joint: JointCodebook) -> float:
        return self.d12(joint.swapped())

    def separations(self, joint: JointCodebook, tables: SymbolTables | None = None) -> tuple[float | None, float | None]:
        """(d12, d21), each None when that user has fewer than two symbols."""
        d12 = self.d12(joint, tables) if joint.user1.size >= 2 else None
        d21 = self.d21(joint) if joint.user2.size >= 2 else None
        return d12, d21

    def d12_upper_bound(self, joint: JointCodebook) -> float:
        """d12 with one of the two terms dropped from the resolvent."""
        return self._user_upper_bound(joint.user1.symbols, joint.user2.symbols)

    def d21_upper_bound(self, joint: JointCodebook) -> float:
        return self._user_upper_bound(joint.user2.symbols, joint.user1.symbols)

    def _user_upper_bound(self, own: np.ndarray, other: np.ndarray) -> float:
        G = la.gram(own)
        R_own, _ = la.resolvents(own)
        R_other, _ = la.resolvents(other)
        intra = la.trace_products(G, R_own)
        np.fill_diagonal(intra, np.inf)
        cross = la.trace_products(G, R_other)
        return float(min(intra.min(), cross.min()))

    def error_type_minima(self, joint: JointCodebook, tables: SymbolTables | None = None) -> ErrorTypeMinima:
        tables = SymbolTables(joint.symbols) if tables is None else tables
        d = tables.d_matrix()
        K2 = joint.user2.size
        i, l = np.divmod(np.arange(joint.size), K2)
        diff1 = i[:, None] != i[None, :]
        diff2 = l[:, None] != l[None, :]
        simultaneous = diff1 & diff2
        one_sided = diff1 ^ diff2
        return ErrorTypeMinima(
            simultaneous=float(d[simultaneous].min()) if simultaneous.any() else None,
            one_sided=float(d[one_sided].min()) if one_sided.any() else None,
        )

    # ─── Chordal criterion ────────────────────────────────────────────────────
    def chordal_families(self, joint: JointCodebook) -> dict[str, float]:
        """
        Normalized max ‖x'ᴴx‖²_F over the intra-user-1, intra-user-2 and cross
        families. Each pair is normalized by (P_k T)(P_l T), i.e. (PT)² at equal power.
        """
        T = joint.T
        x1, x2 = joint.user1.symbols, joint.user2.symbols
        e1, e2 = joint.user1.power * T, joint.user2.power * T

        def corr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
            inner = np.einsum("itm,jtn->ijmn", np.conj(a), b)
            return np.sum(np.abs(inner) ** 2, axis=(2, 3))

        c11 = corr(x1, x1) / (e1 * e1)
        np.fill_diagonal(c11, -np.inf)
        c22 = corr(x2, x2) / (e2 * e2)
        np.fill_diagonal(c22, -np.inf)
        c12 = corr(x1, x2) / (e1 * e2)
        families = {
            "intra1": float(c11.max()) if x1.shape[0] > 1 else 0.0,
            "intra2": float(c22.max()) if x2.shape[0] > 1 else 0.0,
            "cross":  float(c12.max()),
        }
        return families

    def chordal_objective(self, joint: JointCodebook) -> float:
        return max(self.chordal_families(joint).values())

    def single_user_chordal(self, symbols: np.ndarray, power: float) -> float:
        """Normalized max ‖x'ᴴx‖²_F over distinct pairs of one codebook."""
        T = symbols.shape[1]
        inner = np.einsum("itm,jtn->ijmn", np.conj(symbols), symbols)
        c = np.sum(np.abs(inner) ** 2, axis=(2, 3)) / (power * T) ** 2
        np.fill_diagonal(c, -np.inf)
        return float(c.max()) if symbols.shape[0] > 1 else 0.0

    # ─── Closed-form bounds ───────────────────────────────────────────────────
    @staticmethod
    def alpha(P: float, T: int, M: int) -> float:
        return 1.0 / (1.0 / (P * T) + 1.0 / M)

    def _check_c(self, c: float, M: int) -> None:
        if not 0.0 <= c <= 1.0 / M + 1e-15:
            raise DomainException(f"c = {c} lies outside [0, 1/M] = [0, {1.0 / M}]", field="c")

    def sufficient_bound(self, c: float, P: float, T: int, M: int) -> float:
        """PT(1 − 2(1/(PT) + 1/M − √c)⁻¹ c): lower bound on min{d12, d21} when the chordal objective is ≤ c."""
        self._check_c(c, M)
        PT = P * T
        denom = 1.0 / PT + 1.0 / M - math.sqrt(c)
        if denom <= 0:
            logger.warning(f"Sufficient bound is vacuous for c={c:g}, M={M}: 1/(PT)+1/M-√c = {denom:.3e}")
            return -math.inf
        return PT * (1.0 - 2.0 * c / denom)

    def necessary_bound(self, c: float, P: float, T: int, M: int) -> float:
        """PT(1 − α c): if min{d12, d21} reaches this value, the chordal objective is ≤ c."""
        self._check_c(c, M)
        return P * T * (1.0 - self.alpha(P, T, M) * c)

    def c_limit(self, P: float, T: int, M: int) -> float:
        """Largest c keeping the sufficient bound linear in P: [√(1/(2PT) + 1/(2M) + 1/16) − 1/4]²."""
        return (math.sqrt(1.0 / (2 * P * T) + 1.0 / (2 * M) + 1.0 / 16) - 0.25) ** 2

    def single_user_d(self, x: np.ndarray, xp: np.ndarray, P: float, T: int, M: int) -> float:
        """d(x → x') = PT(1 − α ‖x'ᴴx‖²_F / (PT)²) for Grassmannian symbols."""
        x = np.asarray(x, dtype=complex)
        xp = np.asarray(xp, dtype=complex)
        _check_pair_shapes(x, xp)
        target = (P * T / M) * np.eye(M)
        for name, s in (("x", x), ("x'", xp)):
            err = float(np.linalg.norm(np.conj(s.T) @ s - target))
            if err > settings.GRASSMANN_CHECK_TOL:
                raise InvariantException(f"{name} is not Grassmannian at P={P:g} (deviation {err:.3e})")
        corr = float(np.sum(np.abs(np.conj(xp.T) @ x) ** 2))
        return P * T * (1.0 - self.alpha(P, T, M) * corr / (P * T) ** 2)

    # ─── Reports ──────────────────────────────────────────────────────────────
    def min_mean_pllr(self, joint: JointCodebook, tables: SymbolTables | None = None) -> tuple[float, tuple[int, int]]:
        """(1/N)·min E[L] over ordered pairs (independent of N), with the pair."""
        tables = SymbolTables(joint.symbols) if tables is None else tables
        mean = tables.mean_matrix()
        return _masked_argmin(mean, ~np.eye(joint.size, dtype=bool))

    def worst_cantelli(self, joint: JointCodebook, N: int, tables: SymbolTables | None = None) -> float:
        tables = SymbolTables(joint.symbols) if tables is None else tables
        d = tables.d_matrix()
        cant = _cantelli(N * tables.mean_matrix(d), N * tables.var_matrix(d))
        np.fill_diagonal(cant, -np.inf)
        return float(cant.max())

    def report(self, joint: JointCodebook, N: int = 1) -> MetricReport:
        tables = SymbolTables(joint.symbols)
        d_min, worst = self.d_min(joint, tables)
        mean_min, _ = self.min_mean_pllr(joint, tables)
        d12, d21 = self.separations(joint, tables)
        return MetricReport(
            d_min=d_min,
            d12=d12,
            d21=d21,
            min_mean_pllr=mean_min,
            max_cross_corr=self.chordal_objective(joint),
            worst_pair=worst,
        )

    def evaluate_point(self, joint: JointCodebook, N: int, power: float) -> dict:
        """All `evaluate` columns for the codebook's directions rescaled to power P."""
        if joint.size < 2:
            raise SizeException("Evaluation needs at least two joint symbols")
        scaled = joint.rescaled(power)
        tables = SymbolTables(scaled.symbols)
        d = tables.d_matrix()
        off = ~np.eye(scaled.size, dtype=bool)
        mean = tables.mean_matrix(d)
        cant = _cantelli(N * mean, N * tables.var_matrix(d))
        cantelli_worst = float(cant[off].max())
        d12, d21 = self.separations(scaled, tables)
        row = {
            "min_mean_pllr":  float(mean[off].min()),
            "d_min":          float(d[off].min()),
            "d12":            d12,
            "d21":            d21,
            "chordal":        self.chordal_objective(scaled),
            "cantelli_worst": cantelli_worst,
            "union_cantelli": min(1.0, (scaled.size - 1) * cantelli_worst),
        }
        logger.info(f"P={power:.4g}: d_min={row['d_min']:.4f} min E[L]/N={row['min_mean_pllr']:.4f}")
        return row


    def evaluate_grid(self, joint: JointCodebook, N: int, powers: list[float]) -> list[dict]:
        return [self.evaluate_point(joint, N, p) for p in powers]


metrics_service = MetricsService()
