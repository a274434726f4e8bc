"""
Riemannian gradient descent on the oblique manifold (unit-norm columns).

The variable is a T×(K1+K2) matrix C whose columns are the users' lines;
joint symbols are [√(PT)·c1_i  √(PT)·c2_l]. The smoothed objective is

    g(C) = ε · log Σ_pairs exp(−f(pair) / ε)

so minimizing g pushes up the smallest pair value f. Pair values scale with
P·T, so the configured ε is relative: the objective uses ε·P·T. Gradients are returned
as 2·∂g/∂C* (real and imaginary parts as independent coordinates).
"""
import logging
import math
from pathlib import Path

import numpy as np
from scipy.special import logsumexp, softmax

from app.config import settings
from app.models.codebook import Codebook, JointCodebook
from app.models.oblique import ObliquePoint
from app.schemas.optimizer import Criterion, OptimizerConfig, OptimizationTrace, TraceRow
from app.schemas.system import SystemConfig
from app.services.constellation_service import constellation_service
from app.utils import linalg as la
from app.utils.exceptions import DimensionException, SizeException, StepException
from app.utils.tables import write_csv

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("iteration", "objective", "grad_norm", "step", "epsilon")
LINE_SEARCH_OPTIMISM = 2.0


class PairObjective:
    """
    Smoothed min-pair objective evaluated on a raw T×K matrix. No unit-norm
    check happens here, so finite differences may leave the manifold.
    """

    def __init__(self, criterion: Criterion, split: tuple[int, int], T: int, power: float, epsilon: float):
        self.criterion = Criterion(criterion)
        self.K1, self.K2 = split
        self.T = T
        self.power = power
        self.epsilon = epsilon
        self.scale = math.sqrt(power * T)
        self._check_pairs()

    def _check_pairs(self) -> None:
        K1, K2 = self.K1, self.K2
        if self.criterion == Criterion.CHORDAL:
            if K1 + K2 < 2:
                raise SizeException("The chordal criterion needs at least two lines")
        elif K2 < 1:
            raise SizeException(f"Criterion {self.criterion.value} needs two users")
        elif self.criterion == Criterion.ALT_D12 and K1 < 2:
            raise SizeException("alt-d12 needs at least two user-1 lines")
        elif self.criterion == Criterion.ALT_D21 and K2 < 2:
            raise SizeException("alt-d21 needs at least two user-2 lines")
        elif K1 * K2 < 2:
            raise SizeException("A joint objective needs at least two joint symbols")

    # ─── Public API ───────────────────────────────────────────────────────────
    def pair_values(self, C: np.ndarray) -> np.ndarray:
        F, valid = self._pair_table(C)
        return F[valid]

    def value(self, C: np.ndarray) -> float:
        F, valid = self._pair_table(C)
        return self._smooth(F, valid)[0]

    def gradient(self, C: np.ndarray) -> np.ndarray:
        return self.value_and_gradient(C)[1]

    def value_and_gradient(self, C: np.ndarray) -> tuple[float, np.ndarray]:
        C = np.asarray(C, dtype=complex)
        match self.criterion:
            case Criterion.DMIN | Criterion.MEAN_PLLR:
                return self._joint_pairs(C)
            case Criterion.ALT_D12:
                return self._alt_pairs(C)
            case Criterion.ALT_D21:
                g, G = self._swapped()._alt_pairs(_swap_users(C, self.K1))
                return g, _swap_users(G, self.K2)
            case Criterion.CHORDAL:
                return self._chordal_pairs(C)

    # ─── Shared pieces ────────────────────────────────────────────────────────
    def _smooth(self, F: np.ndarray, valid: np.ndarray) -> tuple[float, np.ndarray]:
        z = np.where(valid, -F / self.epsilon, -np.inf)
        return float(self.epsilon * logsumexp(z)), softmax(z, axis=None)

    def _swapped(self) -> "PairObjective":
        return PairObjective(Criterion.ALT_D12, (self.K2, self.K1), self.T, self.power, self.epsilon)

    def _joint_symbols(self, C: np.ndarray) -> np.ndarray:
        """(K1·K2, T, 2) stack, joint index i·K2 + l."""
        K1, K2 = self.K1, self.K2
        x = np.empty((K1, K2, self.T, 2), dtype=complex)
        x[..., 0] = self.scale * C[:, :K1].T[:, None, :]
        x[..., 1] = self.scale * C[:, K1:].T[None, :, :]
        return x.reshape(K1 * K2, self.T, 2)

    def _to_columns(self, grad_x: np.ndarray) -> np.ndarray:
        """Chain rule from joint-symbol gradients back to the columns of C."""
        g = grad_x.reshape(self.K1, self.K2, self.T, 2)
        g1 = self.scale * g[..., 0].sum(axis=1)
        g2 = self.scale * g[..., 1].sum(axis=0)
        return np.concatenate([g1.T, g2.T], axis=1)

    def _pair_table(self, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        C = np.asarray(C, dtype=complex)
        match self.criterion:
            case Criterion.DMIN | Criterion.MEAN_PLLR:
                X = self._joint_symbols(C)
                R, logdet = la.resolvents(X)
                F = self._joint_values(X, R, logdet)
                return F, ~np.eye(len(X), dtype=bool)
            case Criterion.ALT_D12:
                return self._alt_table(C)[:2]
            case Criterion.ALT_D21:
                return self._swapped()._alt_table(_swap_users(C, self.K1))[:2]
            case Criterion.CHORDAL:
                return self._chordal_table(C)[:2]

    # ─── dmin / mean-pllr over ordered joint pairs ────────────────────────────
    def _joint_values(self, X: np.ndarray, R: np.ndarray, logdet: np.ndarray) -> np.ndarray:
        D = la.trace_products(la.gram(X), R)
        if self.criterion == Criterion.DMIN:
            return D
        trR = np.real(np.trace(R, axis1=1, axis2=2))
        return logdet[None, :] - logdet[:, None] - self.T + trR[None, :] + D

    def _joint_pairs(self, C: np.ndarray) -> tuple[float, np.ndarray]:
        X = self._joint_symbols(C)
        A, T = X.shape[0], self.T
        G = la.gram(X)
        R, logdet = la.resolvents(X)
        F = self._joint_values(X, R, logdet)
        g, W = self._smooth(F, ~np.eye(A, dtype=bool))

        # Σ_b w_ab ∂f_ab/∂x_a*  and  Σ_a w_ab ∂f_ab/∂x_b*
        WR = (W @ R.reshape(A, T * T)).reshape(A, T, T)
        H = (W.T @ G.reshape(A, T * T)).reshape(A, T, T)
        RX = R @ X
        dF = WR @ X - R @ H @ RX
        if self.criterion == Criterion.MEAN_PLLR:
            dF -= W.sum(axis=1)[:, None, None] * RX
            dF += W.sum(axis=0)[:, None, None] * (RX - R @ RX)
        return g, 2.0 * self._to_columns(-dF)

    # ─── alt-d12: user-1 sources against joint targets ────────────────────────
    def _alt_table(self, C: np.ndarray):
        K1, K2 = self.K1, self.K2
        X = self._joint_symbols(C)
        U = self.scale * C[:, :K1].T[:, :, None]
        G1 = la.gram(U)
        R, _ = la.resolvents(X)
        F = la.trace_products(G1, R)
        j_of_b = np.repeat(np.arange(K1), K2)
        valid = np.arange(K1)[:, None] != j_of_b[None, :]
        return F, valid, X, U, G1, R

    def _alt_pairs(self, C: np.ndarray) -> tuple[float, np.ndarray]:
        F, valid, X, U, G1, R = self._alt_table(C)
        K1, A, T = self.K1, X.shape[0], self.T
        g, W = self._smooth(F, valid)

        WR = (W @ R.reshape(A, T * T)).reshape(K1, T, T)
        H = (W.T @ G1.reshape(K1, T * T)).reshape(A, T, T)
        d_src = (WR @ U)[:, :, 0]
        d_tgt = -(R @ H @ R @ X)
        dF = self._to_columns(d_tgt)
        dF[:, :K1] += self.scale * d_src.T
        return g, 2.0 * (-dF)

    # ─── chordal: unordered pairs of all lines ────────────────────────────────
    def _chordal_table(self, C: np.ndarray):
        PT = self.power * self.T
        alpha = 1.0 / (1.0 / PT + 1.0)
        inner = np.conj(C.T) @ C
        F = PT * (1.0 - alpha * np.abs(inner) ** 2)
        valid = np.triu(np.ones(F.shape, dtype=bool), k=1)
        return F, valid, inner, PT * alpha

    def _chordal_pairs(self, C: np.ndarray) -> tuple[float, np.ndarray]:
        F, valid, inner, weight = self._chordal_table(C)
        g, W = self._smooth(F, valid)
        Ws = W + W.T
        return g, 2.0 * weight * (C @ (Ws * inner))


def _swap_users(C: np.ndarray, K_first: int) -> np.ndarray:
    return np.concatenate([C[:, K_first:], C[:, :K_first]], axis=1)


def default_free_mask(criterion: Criterion, split: tuple[int, int]) -> np.ndarray:
    K1, K2 = split
    free = np.ones(K1 + K2, dtype=bool)
    if criterion == Criterion.ALT_D12:
        free[K1:] = False
    elif criterion == Criterion.ALT_D21:
        free[:K1] = False
    return free


class OptimizerService:

    # ─── Objective ────────────────────────────────────────────────────────────
    def objective_for(self, point: ObliquePoint, cfg: OptimizerConfig, sys: SystemConfig | None = None,
                      epsilon: float | None = None) -> PairObjective:
        """`epsilon` (or cfg.epsilon) is relative to P·T, the scale of every pair value."""
        if sys is not None and sys.T != point.T:
            raise DimensionException(f"Point has T={point.T} but the system has T={sys.T}")
        relative = cfg.epsilon if epsilon is None else epsilon
        return PairObjective(cfg.criterion, point.split, point.T, cfg.design_snr,
                             relative * cfg.design_snr * point.T)

    def smooth_objective(self, point: ObliquePoint, cfg: OptimizerConfig, sys: SystemConfig | None = None) -> float:
        return self.objective_for(point, cfg, sys).value(point.C)

    def euclidean_gradient(self, point: ObliquePoint, cfg: OptimizerConfig, sys: SystemConfig | None = None) -> np.ndarray:
        return self.objective_for(point, cfg, sys).gradient(point.C)

    def pair_values(self, point: ObliquePoint, cfg: OptimizerConfig, sys: SystemConfig | None = None) -> np.ndarray:
        return self.objective_for(point, cfg, sys).pair_values(point.C)

    # ─── Manifold operations ──────────────────────────────────────────────────
    def riemannian_gradient(self, C: ObliquePoint | np.ndarray, euclidean_grad: np.ndarray) -> np.ndarray:
        """Column-wise projection (I − c_n c_nᴴ) g_n onto the tangent space."""
        C = C.C if isinstance(C, ObliquePoint) else np.asarray(C)
        euclidean_grad = np.asarray(euclidean_grad)
        if C.shape != euclidean_grad.shape:
            raise DimensionException(f"Gradient shape {euclidean_grad.shape} does not match point {C.shape}")
        radial = np.sum(np.conj(C) * euclidean_grad, axis=0, keepdims=True)
        return euclidean_grad - C * radial

    def retract(self, point: ObliquePoint, tangent: np.ndarray, step: float) -> ObliquePoint:
        moved = point.C + step * np.asarray(tangent)
        norms = np.linalg.norm(moved, axis=0, keepdims=True)
        if np.any(norms <= np.finfo(float).tiny):
            raise StepException(f"Step {step:g} collapsed a column to zero norm")
        return ObliquePoint(moved / norms, point.split)

    # ─── Descent ──────────────────────────────────────────────────────────────
    def _descend(
        self,
        init: ObliquePoint,
        cfg: OptimizerConfig,
        free: np.ndarray | None = None,
    ) -> tuple[ObliquePoint, OptimizationTrace]:
        """Armijo backtracking descent along −grad; returns the best iterate."""
        free = default_free_mask(cfg.criterion, init.split) if free is None else free
        eps = cfg.epsilon
        objective = self.objective_for(init, cfg, epsilon=eps)
        anneal_every = max(cfg.max_iters // 4, 1) if cfg.anneal else None

        def direction(pt: ObliquePoint) -> tuple[float, np.ndarray]:
            f, egrad = objective.value_and_gradient(pt.C)
            xi = self.riemannian_gradient(pt.C, egrad)
            xi[:, ~free] = 0.0
            return f, xi

        point = init
        f0, xi = direction(point)
        gnorm = float(np.linalg.norm(xi))
        trace = OptimizationTrace(rows=[TraceRow(iteration=0, objective=f0, grad_norm=gnorm, step=0.0, epsilon=eps)])
        old_f0: float | None = None

        for it in range(1, cfg.max_iters + 1):
            if anneal_every and it > 1 and (it - 1) % anneal_every == 0:
                eps /= 2.0
                objective = self.objective_for(init, cfg, epsilon=eps)
                f0, xi = direction(point)
                gnorm = float(np.linalg.norm(xi))
                old_f0 = None
                logger.debug(f"Iteration {it}: epsilon annealed to {eps:g}")

            if gnorm < cfg.grad_tol:
                trace.converged = True
                break

            d = -xi
            df0 = -gnorm ** 2
            alpha = cfg.step_init / gnorm
            if old_f0 is not None:
                guess = 2.0 * (f0 - old_f0) / df0 * LINE_SEARCH_OPTIMISM
                if math.isfinite(guess) and guess > 0:
                    alpha = guess

            candidate = self.retract(point, d, alpha)
            new_f = objective.value(candidate.C)
            backtracks = 0
            while new_f > f0 + cfg.armijo_c * alpha * df0 and backtracks < settings.MAX_BACKTRACKS:
                alpha *= cfg.armijo_shrink
                candidate = self.retract(point, d, alpha)
                new_f = objective.value(candidate.C)
                backtracks += 1
            logger.debug(f"Iteration {it}: f={new_f:.6g} alpha={alpha:.3e} backtracks={backtracks}")

            if new_f > f0:
                logger.warning(f"Iteration {it}: no decrease after {backtracks} backtracks, stopping")
                break

            old_f0 = f0
            point = candidate
            f0, xi = direction(point)
            gnorm = float(np.linalg.norm(xi))
            trace.rows.append(TraceRow(iteration=it, objective=f0, grad_norm=gnorm,
                                       step=alpha * math.sqrt(-df0), epsilon=eps))
        else:
            trace.converged = gnorm < cfg.grad_tol

        trace.best_iteration = trace.rows[-1].iteration
        logger.info(f"{cfg.criterion.value}: {trace.rows[0].objective:.6g} -> {trace.rows[-1].objective:.6g} "
                    f"in {len(trace.rows) - 1} steps (converged={trace.converged})")
        return point, trace

    def optimize(
        self,
        init: ObliquePoint,
        cfg: OptimizerConfig,
        sys: SystemConfig,
        free: np.ndarray | None = None,
    ) -> tuple[JointCodebook, OptimizationTrace]:
        if sys.M1 != 1 or sys.M2 != 1:
            raise DimensionException("Manifold design supports single-antenna users only (M1 = M2 = 1)")
        if sys.T != init.T:
            raise DimensionException(f"Initial point has T={init.T} but the system has T={sys.T}")
        point, trace = self._descend(init, cfg, free)
        return point.to_joint(cfg.design_snr), trace

    def alternating_optimize(
        self,
        init: JointCodebook,
        cfg: OptimizerConfig,
        sys: SystemConfig,
        rounds: int,
        traces: list[OptimizationTrace] | None = None,
    ) -> JointCodebook:
        """
        `rounds` times: raise d12 moving only user-1 lines, then raise d21
        moving only user-2 lines. Per half-round traces go to `traces`.
        """
        if rounds <= 0:
            return init
        point = ObliquePoint.from_joint(init)
        for r in range(rounds):
            for criterion in (Criterion.ALT_D12, Criterion.ALT_D21):
                half_cfg = cfg.model_copy(update={"criterion": criterion})
                point, trace = self._descend(point, half_cfg)
                if traces is not None:
                    traces.append(trace)
            logger.info(f"Alternating round {r + 1}/{rounds} done")
        return point.to_joint(cfg.design_snr)

    def design_single_user(
        self, T: int, size: int, cfg: OptimizerConfig, seed: int | None = None,
    ) -> tuple[Codebook, OptimizationTrace]:
        """Chordal design of one codebook of `size` lines in ℂᵀ from a seeded random start."""
        seed = cfg.seed if seed is None else seed
        start = constellation_service.random_grassmannian(T, 1, size, cfg.design_snr, seed)
        point = ObliquePoint.from_codebook(start)
        single_cfg = cfg.model_copy(update={"criterion": Criterion.CHORDAL})
        best, trace = self._descend(point, single_cfg)
        codebook, _ = best.to_codebooks(cfg.design_snr)
        return codebook, trace

    def write_trace(self, traces: OptimizationTrace | list[OptimizationTrace], path: str | Path) -> Path:
        traces = [traces] if isinstance(traces, OptimizationTrace) else traces
        rows = [r.model_dump() for t in traces for r in t.rows]
        return write_csv(path, TRACE_COLUMNS, rows)


optimizer_service = OptimizerService()
