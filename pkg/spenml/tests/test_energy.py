# -*- coding: utf-8 -*-

# CMD: python -m unittest spenml.tests.test_energy

import sys, os
import unittest

testdir = os.path.dirname(__file__)
srcdir = '../../'
sys.path.insert(0, os.path.abspath(os.path.join(testdir, srcdir)))

import numpy as np

from spenml.energy import *
from spenml.compute import apply_nonlinearity, matvec
from spenml.errors import DimensionError
from spenml.tests.gradcheck import numeric_grad, rel_error

KINDS = [("label_only", 1), ("label_only", 2), ("conditioned", 1), ("crf", 1), ("none", 1)]


def random_spen(kind, depth, seed, d=4, L=4):
    # smooth non-linearities so finite differences are valid everywhere
    p = init_spen_params(d, L, (5, 3), "softplus", "sigmoid", kind, n_measurements=3, global_depth=depth,
                         g_global="softplus", seed=seed)
    rng = np.random.default_rng(seed + 1000)
    p.local.B[...] = rng.standard_normal(p.local.B.shape)
    if kind == "crf":
        p.global_energy.S1[...] = rng.standard_normal((L, L))
        np.fill_diagonal(p.global_energy.S1, 0.0)
        p.global_energy.s[...] = rng.standard_normal(L)
    return p


class TestEnergy(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(7)
        self.F1 = np.array([1.0])
        # scores [1, -3] on the single feature 1
        self.local = LocalEnergyParams([[1.0, 0.0], [-3.0, 0.0]])
        self.glob = GlobalEnergyParams([[1.0, 1.0]], [-1.0], [1.0], "relu")

    def test_feature_forward_zero(self):
        p = FeatureNetParams(3, [np.zeros((4, 3)), np.zeros((2, 4))], [np.zeros(4), np.zeros(2)], "relu", "relu")
        np.testing.assert_array_equal(feature_forward(p, [1.0, -2.0, 0.5]), np.zeros(2))

    def test_feature_forward_identity(self):
        p = FeatureNetParams(2, [np.eye(2), np.eye(2)], [np.zeros(2), np.zeros(2)], "identity", "identity")
        np.testing.assert_array_equal(feature_forward(p, [1.0, -2.0]), [1.0, -2.0])

    def test_feature_forward_by_hand(self):
        p = init_feature_net(3, (4, 2), "relu", "hardtanh", np.random.default_rng(3))
        p.biases[0][...] = self.rng.standard_normal(4)
        x = self.rng.standard_normal(3)
        h1 = apply_nonlinearity("relu", matvec(p.A1, x) + p.biases[0])
        expected = apply_nonlinearity("hardtanh", matvec(p.A2, h1) + p.biases[1])
        np.testing.assert_allclose(feature_forward(p, x), expected, rtol=1e-12)

    def test_feature_forward_linear(self):
        p = FeatureNetParams(3)
        np.testing.assert_array_equal(feature_forward(p, [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_feature_forward_shape_error(self):
        with self.assertRaises(DimensionError):
            feature_forward(FeatureNetParams(3), [1.0, 2.0])

    def test_local_energy(self):
        self.assertEqual(local_energy(self.local, self.F1, [0.0, 0.0]), 0.0)
        self.assertEqual(local_energy(LocalEnergyParams([[2.5, 0.0]]), self.F1, [1.0]), 2.5)
        self.assertEqual(local_energy(self.local, self.F1, [0.5, 0.5]), -1.0)

    def test_local_bias_column(self):
        p = LocalEnergyParams([[0.0, 2.0]])
        self.assertEqual(local_energy(p, [5.0], [1.0]), 2.0)

    def test_global_energy(self):
        self.assertEqual(global_energy(self.glob, [1.0, 1.0]), 1.0)
        self.assertEqual(global_energy(self.glob, [0.0, 0.5]), 0.0)
        zero = GlobalEnergyParams([[1.0, 1.0]], [-1.0], [0.0], "relu")
        self.assertEqual(global_energy(zero, self.rng.uniform(size=2)), 0.0)

    def test_global_energy_batch(self):
        np.testing.assert_array_equal(global_energy(self.glob, [[1.0, 1.0], [0.0, 0.5]]), [1.0, 0.0])

    def test_global_energy_shape_error(self):
        with self.assertRaises(DimensionError):
            global_energy(self.glob, [1.0, 1.0, 1.0])

    def test_cond_energy_reduces_to_global(self):
        C1 = self.rng.standard_normal((3, 4))
        bias, c2 = self.rng.standard_normal(3), self.rng.standard_normal(3)
        glob = GlobalEnergyParams(C1, bias, c2, "softplus")
        cond = CondEnergyParams(np.hstack([C1, np.zeros((3, 5))]), bias, c2, 4, "softplus")
        F_x = self.rng.standard_normal(5)
        for _ in range(10):
            y = self.rng.uniform(size=4)
            self.assertAlmostEqual(cond_energy(cond, F_x, y), global_energy(glob, y), places=12)

    def test_cond_energy_zero(self):
        cond = CondEnergyParams(self.rng.standard_normal((3, 6)), np.zeros(3), np.zeros(3), 4)
        self.assertEqual(cond_energy(cond, np.ones(2), np.full(4, 0.3)), 0.0)

    def test_crf_energy(self):
        self.assertEqual(crf_energy(CrfEnergyParams([[0.0, 1.0], [1.0, 0.0]], [0.0, 0.0]), [0.0, 0.0]), 0.0)
        self.assertEqual(crf_energy(CrfEnergyParams([[0.0, 1.0], [1.0, 0.0]], [0.0, 0.0]), [1.0, 1.0]), 2.0)
        self.assertEqual(crf_energy(CrfEnergyParams(np.zeros((2, 2)), [1.0, -1.0]), [1.0, 1.0]), 0.0)

    def test_crf_diagonal_zeroed(self):
        p = CrfEnergyParams([[3.0, 1.0], [1.0, 4.0]], [0.0, 0.0])
        np.testing.assert_array_equal(np.diag(p.S1), [0.0, 0.0])

    def test_crf_linear_without_pairs(self):
        p = CrfEnergyParams(np.zeros((3, 3)), self.rng.standard_normal(3))
        y = self.rng.uniform(size=3)
        for a in (0.0, 0.25, 1.0):
            self.assertAlmostEqual(crf_energy(p, a * y), a * crf_energy(p, y), places=12)

    def test_total_energy(self):
        p = SpenParams(FeatureNetParams(1), self.local)
        self.assertEqual(total_energy(p, self.F1, [0.5, 0.5]), -1.0)
        p = random_spen("label_only", 1, 0)
        F_x = feature_forward(p.feat, self.rng.standard_normal(4))
        y = self.rng.uniform(size=4)
        expected = local_energy(p.local, F_x, y) + global_energy(p.global_energy, y)
        self.assertAlmostEqual(total_energy(p, F_x, y), expected, places=12)

    def test_total_energy_zero_global(self):
        p = random_spen("label_only", 1, 1)
        p.global_energy.c2[...] = 0.0
        F_x = feature_forward(p.feat, self.rng.standard_normal(4))
        y = self.rng.uniform(size=4)
        self.assertEqual(total_energy(p, F_x, y), local_energy(p.local, F_x, y))

    def test_cached_features(self):
        p = random_spen("conditioned", 1, 2)
        X = self.rng.standard_normal((6, 4))
        Y = self.rng.uniform(size=(6, 4))
        cached = feature_forward(p.feat, X)
        fresh = np.array([total_energy(p, feature_forward(p.feat, x), y) for x, y in zip(X, Y)])
        np.testing.assert_allclose(total_energy(p, cached, Y), fresh, rtol=1e-12)

    def test_grad_y_local_only(self):
        p = random_spen("none", 1, 3)
        F_x = feature_forward(p.feat, self.rng.standard_normal(4))
        scores = local_scores(p.local, F_x)
        for _ in range(3):
            np.testing.assert_allclose(energy_grad_y(p, F_x, self.rng.uniform(size=4)), scores, rtol=1e-12)

    def test_grad_y_crf(self):
        p = random_spen("crf", 1, 4)
        g = p.global_energy
        F_x = feature_forward(p.feat, self.rng.standard_normal(4))
        y = self.rng.uniform(size=4)
        expected = (g.S1 + g.S1.T) @ y + local_scores(p.local, F_x) + g.s
        np.testing.assert_allclose(energy_grad_y(p, F_x, y), expected, rtol=1e-10)

    def test_grad_y_finite_differences(self):
        configurations = 0
        for seed in range(10):
            for kind, depth in KINDS:
                p = random_spen(kind, depth, seed)
                F_x = feature_forward(p.feat, self.rng.standard_normal(4))
                for _ in range(4):
                    y = self.rng.uniform(0.05, 0.95, 4)
                    numeric = numeric_grad(lambda: total_energy(p, F_x, y), y)
                    self.assertLess(rel_error(numeric, energy_grad_y(p, F_x, y)), 1e-4, (kind, depth, seed))
                configurations += 1
        self.assertGreaterEqual(configurations, 50)

    def test_grad_params_finite_differences(self):
        for seed in range(10):
            for kind, depth in KINDS:
                p = random_spen(kind, depth, seed)
                X = self.rng.standard_normal((3, 4))
                Y = self.rng.uniform(0.05, 0.95, (3, 4))
                analytic = energy_grad_params(p, X, Y).named_tensors()

                def energy():
                    return float(np.sum(total_energy(p, feature_forward(p.feat, X), Y)))

                for name, tensor in p.named_tensors().items():
                    numeric = numeric_grad(energy, tensor)
                    if name == "global.S1":
                        # the diagonal is not a free parameter
                        np.fill_diagonal(numeric, 0.0)
                    self.assertLess(rel_error(numeric, analytic[name]), 1e-4, (kind, depth, seed, name))

    def test_grad_params_zero_labels(self):
        p = random_spen("none", 1, 5)
        grads = energy_grad_params(p, self.rng.standard_normal(4), np.zeros(4))
        for name, value in grads.named_tensors().items():
            np.testing.assert_array_equal(value, 0.0, name)

    def test_grad_c2_is_hidden_activation(self):
        p = random_spen("label_only", 1, 6)
        y = self.rng.uniform(size=4)
        g = p.global_energy
        hidden = apply_nonlinearity(g.g_glob, matvec(g.C1, y) + g.c1_bias)
        grads = energy_grad_params(p, self.rng.standard_normal(4), y)
        np.testing.assert_allclose(grads.global_energy.c2, hidden, rtol=1e-12)

    def test_named_tensors_are_views(self):
        p = random_spen("label_only", 2, 7)
        p.named_tensors()["global.C1"][0, 0] = 42.0
        self.assertEqual(p.global_energy.C1[0, 0], 42.0)
        self.assertIn("global.C2_bias", p.named_tensors())

    def test_init_deterministic(self):
        a = init_spen_params(5, 3, (4,), global_kind="conditioned", seed=11)
        b = init_spen_params(5, 3, (4,), global_kind="conditioned", seed=11)
        for name, value in a.named_tensors().items():
            np.testing.assert_array_equal(value, b.named_tensors()[name])
        self.assertIs(a.global_kind, GlobalKind.CONDITIONED)

    def test_inconsistent_dimensions(self):
        with self.assertRaises(DimensionError):
            SpenParams(FeatureNetParams(3), LocalEnergyParams(np.zeros((2, 5))))
        with self.assertRaises(DimensionError):
            SpenParams(FeatureNetParams(3), LocalEnergyParams(np.zeros((2, 4))),
                       CrfEnergyParams(np.zeros((3, 3)), np.zeros(3)))


if __name__ == '__main__':
    unittest.main()
