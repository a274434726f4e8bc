import math
import unittest

import numpy as np
from numpy.testing import assert_allclose

from app.models.codebook import Codebook, JointCodebook
from app.services.constellation_service import constellation_service
from app.services.metrics_service import metrics_service, SymbolTables
from app.utils.exceptions import DimensionException, DomainException, InvariantException, SizeException
from app.tests.helpers import codebook_from_lines, random_joint, random_symbol


class TestPairStatistics(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(2024)

    def test_eigenvalue_and_direct_moments_agree(self):
        for T in (2, 5):
            for _ in range(500):
                x = random_symbol(self.rng, T, scale=4.0)
                xp = random_symbol(self.rng, T, scale=4.0)
                stats = metrics_service.pair_stats(x, xp, N=3)
                mean, var = metrics_service.pair_moments_direct(x, xp, N=3)
                self.assertLessEqual(abs(stats.mean_pllr - mean), 1e-9 * max(1.0, abs(mean)))
                self.assertLessEqual(abs(stats.var_pllr - var), 1e-9 * max(1.0, abs(var)))

    def test_mean_is_trace_minus_logdet_of_lambda(self):
        x = random_symbol(self.rng, 4, scale=3.0)
        xp = random_symbol(self.rng, 4, scale=3.0)
        stats = metrics_service.pair_stats(x, xp, N=2)
        lam = np.array(stats.lambda_eigs)
        self.assertAlmostEqual(stats.mean_pllr, 2 * (lam.sum() - np.log1p(lam).sum()), places=9)
        self.assertAlmostEqual(stats.var_pllr, 2 * np.sum(lam ** 2), places=9)

    def test_identical_symbols_give_trivial_cantelli(self):
        x = random_symbol(self.rng, 3)
        stats = metrics_service.pair_stats(x, x, N=4)
        self.assertAlmostEqual(stats.mean_pllr, 0.0, places=10)
        self.assertEqual(stats.cantelli, 1.0)

    def test_error_exponent_is_per_antenna_mean(self):
        x = random_symbol(self.rng, 3, scale=2.0)
        xp = random_symbol(self.rng, 3, scale=2.0)
        self.assertAlmostEqual(metrics_service.error_exponent(x, xp),
                               metrics_service.pair_stats(x, xp, N=5).mean_pllr / 5, places=10)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionException):
            metrics_service.pair_stats(np.ones((3, 1)), np.ones((4, 1)), N=1)

    def test_pllr_is_likelihood_difference(self):
        x = random_symbol(self.rng, 3, scale=2.0)
        xp = random_symbol(self.rng, 3, scale=2.0)
        Y = random_symbol(self.rng, 3, M=2, scale=2.0)
        expected = metrics_service.log_likelihood(Y, x) - metrics_service.log_likelihood(Y, xp)
        self.assertAlmostEqual(metrics_service.pllr(Y, x, xp), expected, places=9)

    def test_log_likelihood_of_silent_symbol(self):
        Y = random_symbol(self.rng, 4, M=3, scale=2.0)
        expected = -np.linalg.norm(Y) ** 2 - 3 * 4 * math.log(math.pi)
        self.assertAlmostEqual(metrics_service.log_likelihood(Y, np.zeros((4, 1))), expected, places=9)

    def test_log_likelihood_rank_one_closed_form(self):
        T, N, s = 4, 3, 7.0
        u = random_symbol(self.rng, T)
        u /= np.linalg.norm(u)
        Y = random_symbol(self.rng, T, M=N, scale=2.0)
        # (I + s u uᴴ)⁻¹ = I − s/(1+s) u uᴴ
        quad = np.linalg.norm(Y) ** 2 - s / (1 + s) * np.linalg.norm(np.conj(u.T) @ Y) ** 2
        expected = -quad - N * math.log1p(s) - N * T * math.log(math.pi)
        self.assertAlmostEqual(metrics_service.log_likelihood(Y, math.sqrt(s) * u), expected, places=9)

    def test_log_likelihood_matches_dense_inverse(self):
        for _ in range(20):
            x = random_symbol(self.rng, 5, M=2, scale=3.0)
            Y = random_symbol(self.rng, 5, M=4, scale=3.0)
            S = np.eye(5) + x @ np.conj(x.T)
            _, logdet = np.linalg.slogdet(S)
            quad = np.real(np.trace(np.conj(Y.T) @ np.linalg.inv(S) @ Y))
            expected = -quad - 4 * logdet - 4 * 5 * math.log(math.pi)
            self.assertLessEqual(abs(metrics_service.log_likelihood(Y, x) - expected), 1e-9 * abs(expected))

    def test_pair_statistics_ignore_symbol_phase(self):
        for _ in range(20):
            x = random_symbol(self.rng, 4, scale=3.0)
            xp = random_symbol(self.rng, 4, scale=3.0)
            a, b = np.exp(1j * self.rng.uniform(0, 2 * np.pi, size=2))
            plain = metrics_service.pair_stats(x, xp, N=2)
            rotated = metrics_service.pair_stats(a * x, b * xp, N=2)
            self.assertAlmostEqual(rotated.mean_pllr, plain.mean_pllr, places=9)
            self.assertAlmostEqual(rotated.var_pllr, plain.var_pllr, places=9)
            self.assertAlmostEqual(rotated.d_value, plain.d_value, places=9)

    def test_codebook_metrics_ignore_symbol_phase(self):
        joint = random_joint(T=4, K1=3, K2=3, power=50.0, seed=8)
        phases = np.exp(1j * self.rng.uniform(0, 2 * np.pi, size=(2, 3)))[:, :, None, None]
        rotated = JointCodebook(
            Codebook(joint.user1.symbols * phases[0], 50.0, grassmannian=True),
            Codebook(joint.user2.symbols * phases[1], 50.0, grassmannian=True),
        )
        plain, turned = metrics_service.report(joint, N=2), metrics_service.report(rotated, N=2)
        for field in ("d_min", "d12", "d21", "min_mean_pllr", "max_cross_corr"):
            self.assertAlmostEqual(getattr(turned, field), getattr(plain, field), places=8, msg=field)


class TestDMetrics(unittest.TestCase):
    def setUp(self):
        self.joint = random_joint(T=4, K1=3, K2=3, power=100.0, seed=4)

    def test_d21_is_swapped_d12(self):
        self.assertEqual(metrics_service.d21(self.joint), metrics_service.d12(self.joint.swapped()))

    def test_sandwich(self):
        for seed in range(10):
            joint = random_joint(T=5, K1=4, K2=3, power=1000.0, seed=10 * seed)
            d_min, _ = metrics_service.d_min(joint)
            sep = min(metrics_service.d12(joint), metrics_service.d21(joint))
            self.assertLessEqual(sep, d_min + 1e-9)
            self.assertLessEqual(d_min, sep + joint.M1 + 1e-9)

    def test_d_min_pair_attains_value(self):
        d_min, (a, b) = metrics_service.d_min(self.joint)
        self.assertNotEqual(a, b)
        X = self.joint.symbols
        self.assertAlmostEqual(metrics_service.d_value(X[a], X[b]), d_min, places=9)

    def test_error_types_cover_d_min(self):
        minima = metrics_service.error_type_minima(self.joint)
        d_min, _ = metrics_service.d_min(self.joint)
        self.assertAlmostEqual(min(minima.simultaneous, minima.one_sided), d_min, places=9)

    def test_upper_bounds(self):
        self.assertGreaterEqual(metrics_service.d12_upper_bound(self.joint), metrics_service.d12(self.joint) - 1e-9)
        self.assertGreaterEqual(metrics_service.d21_upper_bound(self.joint), metrics_service.d21(self.joint) - 1e-9)

    def test_d_min_needs_two_symbols(self):
        with self.assertRaises(SizeException):
            metrics_service.d_min(random_joint(K1=1, K2=1))

    def test_orthogonal_users_separate_at_full_energy(self):
        P, T = 20.0, 4
        lines = np.eye(T, dtype=complex)
        joint = JointCodebook(codebook_from_lines(lines[:2], P), codebook_from_lines(lines[2:], P))
        self.assertAlmostEqual(metrics_service.d12(joint), P * T, places=9)
        self.assertAlmostEqual(metrics_service.d21(joint), P * T, places=9)

    def test_separations_skip_single_symbol_user(self):
        d12, d21 = metrics_service.separations(random_joint(K1=1, K2=3))
        self.assertIsNone(d12)
        self.assertIsInstance(d21, float)
        with self.assertRaises(SizeException):
            metrics_service.d12(random_joint(K1=1, K2=3))

    def test_equal_spans_stay_bounded(self):
        rng = np.random.default_rng(1)
        u = random_symbol(rng, 4)
        u /= np.linalg.norm(u)
        for P in (1.0, 1e2, 1e4):
            x = math.sqrt(P * 4) * u
            self.assertLess(metrics_service.d_value(x, np.exp(1.3j) * x), 1.0)

    def test_distinct_spans_grow_linearly(self):
        rng = np.random.default_rng(2)
        u, v = random_symbol(rng, 4), random_symbol(rng, 4)
        u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
        ratio = [metrics_service.d_value(math.sqrt(4 * P) * u, math.sqrt(4 * P) * v) / P for P in (1e4, 1e5)]
        self.assertLess(abs(ratio[1] - ratio[0]) / ratio[1], 0.05)


class TestChordal(unittest.TestCase):
    def test_single_user_d_matches_general_form(self):
        cb = constellation_service.random_grassmannian(5, 1, 2, 20.0, seed=6)
        x, xp = cb.symbols
        self.assertAlmostEqual(metrics_service.single_user_d(x, xp, 20.0, 5, 1),
                               metrics_service.d_value(x, xp), places=9)

    def test_single_user_d_requires_grassmannian(self):
        with self.assertRaises(InvariantException):
            metrics_service.single_user_d(np.ones((3, 1)), np.ones((3, 1)), 10.0, 3, 1)

    def test_min_d_and_max_correlation_pick_the_same_codebook(self):
        P, T = 10.0, 3
        best_d, best_c = [], []
        for seed in range(50):
            cb = constellation_service.random_grassmannian(T, 1, 4, P, seed)
            pair_d = [metrics_service.single_user_d(cb.symbols[i], cb.symbols[j], P, T, 1)
                      for i in range(4) for j in range(4) if i != j]
            best_d.append(min(pair_d))
            best_c.append(metrics_service.single_user_chordal(cb.symbols, P))
        self.assertEqual(int(np.argmax(best_d)), int(np.argmin(best_c)))

    def test_joint_chordal_is_max_over_families(self):
        joint = random_joint(T=4, K1=3, K2=3, power=5.0)
        families = metrics_service.chordal_families(joint)
        self.assertEqual(set(families), {"intra1", "intra2", "cross"})
        self.assertEqual(metrics_service.chordal_objective(joint), max(families.values()))
        merged = np.concatenate([joint.user1.symbols, joint.user2.symbols])
        self.assertAlmostEqual(metrics_service.chordal_objective(joint),
                               metrics_service.single_user_chordal(merged, 5.0), places=12)


class TestBounds(unittest.TestCase):
    def test_sufficient_bound_holds_on_partitions(self):
        for P_db in (10, 30):
            P = 10 ** (P_db / 10)
            for seed in range(50):
                base = constellation_service.random_grassmannian(5, 1, 8, P, seed)
                joint = constellation_service.partition(base, seed=seed)
                c = metrics_service.chordal_objective(joint)
                bound = metrics_service.sufficient_bound(c, P, 5, 1)
                sep = min(metrics_service.d12(joint), metrics_service.d21(joint))
                self.assertGreaterEqual(sep, bound - 1e-9 * P)

    def test_vacuous_bound(self):
        # 1/(PT) + 1/M − √c < 0
        self.assertEqual(metrics_service.sufficient_bound(0.45, 1e4, 5, 2), -math.inf)

    def test_c_outside_domain(self):
        with self.assertRaises(DomainException):
            metrics_service.sufficient_bound(0.8, 10.0, 5, 2)
        with self.assertRaises(DomainException):
            metrics_service.necessary_bound(-0.1, 10.0, 5, 1)

    def test_necessary_bound_and_c_limit(self):
        P, T, M = 10.0, 4, 1
        self.assertAlmostEqual(metrics_service.necessary_bound(0.0, P, T, M), P * T)
        alpha = 1 / (1 / (P * T) + 1 / M)
        self.assertAlmostEqual(metrics_service.necessary_bound(0.5, P, T, M), P * T * (1 - 0.5 * alpha))
        expected = (math.sqrt(1 / (2 * P * T) + 1 / (2 * M) + 1 / 16) - 0.25) ** 2
        self.assertAlmostEqual(metrics_service.c_limit(P, T, M), expected)


class TestReports(unittest.TestCase):
    def setUp(self):
        self.joint = random_joint(T=4, K1=2, K2=2, power=10.0)

    def test_report(self):
        report = metrics_service.report(self.joint, N=2)
        d_min, pair = metrics_service.d_min(self.joint)
        self.assertEqual(report.d_min, d_min)
        self.assertEqual(report.worst_pair, pair)
        self.assertGreater(report.min_mean_pllr, 0.0)

    def test_evaluate_grid(self):
        rows = metrics_service.evaluate_grid(self.joint, N=4, powers=[1.0, 100.0])
        self.assertEqual(len(rows), 2)
        for row in rows:
            self.assertAlmostEqual(row["union_cantelli"], min(1.0, 3 * row["cantelli_worst"]))
            self.assertLessEqual(min(row["d12"], row["d21"]), row["d_min"] + 1e-9)
        self.assertGreater(rows[1]["d_min"], rows[0]["d_min"])

    def test_evaluate_with_single_symbol_user(self):
        joint = random_joint(T=4, K1=1, K2=3, power=10.0)
        row = metrics_service.evaluate_point(joint, N=2, power=100.0)
        self.assertIsNone(row["d12"])
        self.assertLessEqual(row["d21"], row["d_min"] + 1e-9)
        report = metrics_service.report(joint, N=2)
        self.assertIsNone(report.d12)

    def test_evaluate_needs_two_joint_symbols(self):
        with self.assertRaises(SizeException):
            metrics_service.evaluate_point(random_joint(K1=1, K2=1), N=2, power=10.0)

    def test_union_bounds(self):
        pep = np.array([[0.0, 0.1, 0.2], [0.05, 0.0, 0.0], [0.3, 0.0, 0.0]])
        lower, upper = metrics_service.union_bounds(pep)
        self.assertAlmostEqual(lower, 0.1)
        self.assertAlmostEqual(upper, 0.6)

    def test_mean_matrix_matches_pair_stats(self):
        tables = SymbolTables(self.joint.symbols)
        mean = tables.mean_matrix()
        X = self.joint.symbols
        self.assertAlmostEqual(mean[0, 3], metrics_service.pair_stats(X[0], X[3], 1).mean_pllr, places=9)


if __name__ == "__main__":
    unittest.main()
