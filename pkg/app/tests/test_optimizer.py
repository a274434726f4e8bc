import tempfile
import unittest
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.models.oblique import ObliquePoint
from app.schemas.optimizer import Criterion, OptimizerConfig
from app.schemas.system import SystemConfig
from app.services.metrics_service import metrics_service
from app.services.optimizer_service import PairObjective, optimizer_service, TRACE_COLUMNS
from app.utils.exceptions import DimensionException, SizeException, StepException
from app.utils.tables import read_csv
from app.tests.helpers import random_joint


def _random_point(rng: np.random.Generator, T: int, K1: int, K2: int) -> ObliquePoint:
    C = rng.standard_normal((T, K1 + K2)) + 1j * rng.standard_normal((T, K1 + K2))
    return ObliquePoint(C / np.linalg.norm(C, axis=0), (K1, K2))


class TestGradients(unittest.TestCase):
    """Analytic 2·∂g/∂C* against central differences along random directions."""

    def setUp(self):
        self.rng = np.random.default_rng(0)
        self.T, self.P = 5, 1000.0
        self.h = 1e-6

    def _check(self, criterion: Criterion):
        PT = self.P * self.T
        for _ in range(20):
            point = _random_point(self.rng, self.T, 4, 4)
            objective = PairObjective(criterion, point.split, self.T, self.P, epsilon=PT / 10)
            G = objective.gradient(point.C)
            for _ in range(2):
                E = self.rng.standard_normal(point.C.shape) + 1j * self.rng.standard_normal(point.C.shape)
                E /= np.linalg.norm(E)
                fd = (objective.value(point.C + self.h * E) - objective.value(point.C - self.h * E)) / (2 * self.h)
                analytic = float(np.real(np.vdot(G, E)))
                self.assertLessEqual(abs(fd - analytic), 1e-5 * np.linalg.norm(G),
                                     msg=f"{criterion.value}: fd={fd} analytic={analytic}")

    def test_dmin(self):
        self._check(Criterion.DMIN)

    def test_mean_pllr(self):
        self._check(Criterion.MEAN_PLLR)

    def test_alt_d12(self):
        self._check(Criterion.ALT_D12)

    def test_alt_d21(self):
        self._check(Criterion.ALT_D21)

    def test_chordal(self):
        self._check(Criterion.CHORDAL)

    def test_smoothed_value_tracks_min_pair(self):
        point = _random_point(self.rng, 4, 3, 3)
        objective = PairObjective(Criterion.DMIN, point.split, 4, 10.0, epsilon=1e-3)
        f = objective.pair_values(point.C)
        self.assertLessEqual(abs(objective.value(point.C) + f.min()), 1e-3 * np.log(f.size) + 1e-9)

    def test_pair_counts(self):
        point = _random_point(self.rng, 4, 3, 2)
        cfg = OptimizerConfig(criterion=Criterion.ALT_D12, design_snr=10.0)
        # user-1 sources against joint targets whose user-1 line differs
        self.assertEqual(optimizer_service.pair_values(point, cfg).size, 3 * 6 - 6)
        cfg = cfg.model_copy(update={"criterion": Criterion.CHORDAL})
        self.assertEqual(optimizer_service.pair_values(point, cfg).size, 10)

    def test_alt_criteria_need_two_lines(self):
        with self.assertRaises(SizeException):
            PairObjective(Criterion.ALT_D12, (1, 3), 4, 10.0, 0.1)
        with self.assertRaises(SizeException):
            PairObjective(Criterion.DMIN, (2, 0), 4, 10.0, 0.1)

    def test_epsilon_is_relative_to_block_energy(self):
        point = _random_point(self.rng, 5, 3, 3)
        for P in (10.0, 1000.0):
            cfg = OptimizerConfig(design_snr=P, epsilon=0.01)
            self.assertAlmostEqual(optimizer_service.objective_for(point, cfg).epsilon, 0.01 * P * 5)
            self.assertAlmostEqual(optimizer_service.objective_for(point, cfg, epsilon=0.5).epsilon, 0.5 * P * 5)

    def test_default_smoothing_bias_is_small_at_high_snr(self):
        cfg = OptimizerConfig()
        point = _random_point(self.rng, 5, 4, 4)
        objective = optimizer_service.objective_for(point, cfg)
        f = objective.pair_values(point.C)
        bias = f.min() + objective.value(point.C)
        self.assertLessEqual(bias, cfg.epsilon * cfg.design_snr * 5 * np.log(f.size) + 1e-9)
        self.assertTrue(cfg.anneal)

    def test_pair_values_match_codebook_metrics(self):
        P = 1000.0
        for seed in range(5):
            point = _random_point(np.random.default_rng(seed), 5, 4, 3)
            joint = point.to_joint(P)
            cfg = OptimizerConfig(criterion=Criterion.DMIN, design_snr=P)
            f = optimizer_service.pair_values(point, cfg)
            self.assertLessEqual(abs(f.min() - metrics_service.d_min(joint)[0]), 1e-9 * P)
            cfg = cfg.model_copy(update={"criterion": Criterion.MEAN_PLLR})
            f = optimizer_service.pair_values(point, cfg)
            self.assertLessEqual(abs(f.min() - metrics_service.min_mean_pllr(joint)[0]), 1e-9 * P)


class TestManifold(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(1)
        self.point = _random_point(self.rng, 4, 2, 2)

    def test_riemannian_gradient_is_tangent(self):
        egrad = self.rng.standard_normal((4, 4)) + 1j * self.rng.standard_normal((4, 4))
        xi = optimizer_service.riemannian_gradient(self.point, egrad)
        assert_allclose(np.sum(np.conj(self.point.C) * xi, axis=0), 0.0, atol=1e-12)

    def test_riemannian_gradient_shape_mismatch(self):
        with self.assertRaises(DimensionException):
            optimizer_service.riemannian_gradient(self.point, np.zeros((4, 3)))

    def test_retract_stays_on_manifold(self):
        tangent = self.rng.standard_normal((4, 4)) + 1j * self.rng.standard_normal((4, 4))
        moved = optimizer_service.retract(self.point, tangent, 0.3)
        assert_allclose(np.linalg.norm(moved.C, axis=0), 1.0, atol=1e-12)

    def test_retract_zero_column(self):
        with self.assertRaises(StepException):
            optimizer_service.retract(self.point, -self.point.C, 1.0)


class TestDescent(unittest.TestCase):
    def setUp(self):
        self.sys = SystemConfig(T=4, P1=100.0, P2=100.0)
        self.init = random_joint(T=4, K1=2, K2=2, power=100.0, seed=5)

    def test_smoothed_objective_never_increases(self):
        cfg = OptimizerConfig(criterion=Criterion.DMIN, design_snr=100.0, max_iters=30, epsilon=0.01, anneal=False)
        joint, trace = optimizer_service.optimize(ObliquePoint.from_joint(self.init), cfg, self.sys)
        objectives = trace.objectives
        self.assertTrue(all(b <= a + 1e-12 for a, b in zip(objectives, objectives[1:])))
        self.assertTrue(joint.user1.grassmannian and joint.user2.grassmannian)
        self.assertEqual(joint.user1.power, 100.0)

    def test_alt_d12_only_moves_user1(self):
        cfg = OptimizerConfig(criterion=Criterion.ALT_D12, design_snr=100.0, max_iters=10)
        joint, _ = optimizer_service.optimize(ObliquePoint.from_joint(self.init), cfg, self.sys)
        assert_allclose(joint.user2.symbols, self.init.user2.symbols, atol=1e-10)

    def test_alternating_rounds(self):
        cfg = OptimizerConfig(design_snr=100.0, max_iters=5)
        self.assertIs(optimizer_service.alternating_optimize(self.init, cfg, self.sys, rounds=0), self.init)
        traces = []
        optimizer_service.alternating_optimize(self.init, cfg, self.sys, rounds=2, traces=traces)
        self.assertEqual(len(traces), 4)

    def test_rejects_multi_antenna_system(self):
        cfg = OptimizerConfig(design_snr=100.0, max_iters=1)
        with self.assertRaises(DimensionException):
            optimizer_service.optimize(ObliquePoint.from_joint(self.init), cfg, SystemConfig(T=4, M1=2, M2=2))

    def test_annealing_halves_epsilon(self):
        cfg = OptimizerConfig(design_snr=100.0, max_iters=8, epsilon=1.0, anneal=True, grad_tol=0.0)
        _, trace = optimizer_service.optimize(ObliquePoint.from_joint(self.init), cfg, self.sys)
        eps = [row.epsilon for row in trace.rows]
        self.assertTrue(all(b <= a for a, b in zip(eps, eps[1:])))
        self.assertTrue(set(eps) <= {1.0, 0.5, 0.25, 0.125})


class TestSingleUserDesign(unittest.TestCase):
    def test_design_lowers_max_correlation(self):
        cfg = OptimizerConfig(design_snr=10.0, max_iters=100, seed=3)
        start = optimizer_service.design_single_user(4, 8, cfg.model_copy(update={"max_iters": 0}))[0]
        designed, trace = optimizer_service.design_single_user(4, 8, cfg)
        self.assertLess(metrics_service.single_user_chordal(designed.symbols, 10.0),
                        metrics_service.single_user_chordal(start.symbols, 10.0))
        self.assertTrue(designed.is_grassmannian())
        self.assertEqual(trace.rows[0].iteration, 0)

    def test_write_trace(self):
        cfg = OptimizerConfig(design_snr=10.0, max_iters=5)
        _, trace = optimizer_service.design_single_user(3, 4, cfg)
        with tempfile.TemporaryDirectory() as tmp:
            path = optimizer_service.write_trace(trace, Path(tmp) / "trace.csv")
            rows = read_csv(path)
        self.assertEqual(tuple(rows[0].keys()), TRACE_COLUMNS)
        self.assertEqual(len(rows), len(trace.rows))


@pytest.mark.slow
class TestDescentStatistics(unittest.TestCase):
    def test_dmin_improves_from_random_starts(self):
        sys = SystemConfig(T=2, P1=1000.0, P2=1000.0)
        cfg = OptimizerConfig(criterion=Criterion.DMIN, design_snr=1000.0, max_iters=500)
        improved = 0
        for seed in range(100):
            init = random_joint(T=2, K1=2, K2=2, power=1000.0, seed=2 * seed)
            joint, _ = optimizer_service.optimize(ObliquePoint.from_joint(init), cfg, sys)
            improved += metrics_service.d_min(joint)[0] > metrics_service.d_min(init)[0]
        self.assertGreaterEqual(improved, 95)


if __name__ == "__main__":
    unittest.main()
