# -*- coding: utf-8 -*-

# CMD: python -m unittest spenml.tests.test_metrics

import sys, os
import unittest

testdir = os.path.dirname(__file__)
srcdir = '../../'
sys.path.insert(0, os.path.abspath(os.path.join(testdir, srcdir)))

import numpy as np

from spenml.metrics import *
from spenml.energy import FeatureNetParams, LocalEnergyParams, SpenParams
from spenml.errors import DimensionError


class TestMetrics(unittest.TestCase):

    def test_example_f1(self):
        self.assertEqual(example_f1([1, 1, 0], [1, 1, 0]), 1.0)
        self.assertEqual(example_f1([0, 0, 0], [0, 0, 0]), 1.0)
        self.assertEqual(example_f1([1, 0, 0], [0, 0, 0]), 0.0)
        self.assertAlmostEqual(example_f1([1, 1, 0], [1, 0, 1]), 0.5)

    def test_example_f1_shapes(self):
        with self.assertRaises(DimensionError):
            example_f1([1, 0], [1, 0, 0])

    def test_macro_f1(self):
        preds = [[1, 1, 0], [0, 0, 0], [1, 0, 0]]
        golds = [[1, 0, 1], [0, 0, 0], [0, 1, 0]]
        self.assertAlmostEqual(macro_f1(preds, golds), (0.5 + 1.0 + 0.0) / 3)
        self.assertEqual(macro_f1(golds, golds), 1.0)

    def test_macro_f1_matches_set_definition(self):
        rng = np.random.default_rng(0)
        preds = rng.integers(0, 2, (30, 6))
        golds = rng.integers(0, 2, (30, 6))
        preds[0], golds[0] = 0, 0
        by_hand = []
        for p, g in zip(preds, golds):
            sizes = p.sum() + g.sum()
            by_hand.append(1.0 if sizes == 0 else 2.0 * np.sum(p & g) / sizes)
        self.assertAlmostEqual(macro_f1(preds, golds), np.mean(by_hand))

    def test_single_label(self):
        self.assertAlmostEqual(macro_f1([[1], [0]], [[1], [1]]), 0.5)
        self.assertEqual(example_f1([0], [0]), 1.0)
        self.assertEqual(hamming_error([[1], [0]], [[1], [1]]), 50.0)

    def test_example_f1_symmetric(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            a, b = rng.integers(0, 2, 8), rng.integers(0, 2, 8)
            self.assertEqual(example_f1(a, b), example_f1(b, a))

    def test_label_permutation(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            preds, golds = rng.integers(0, 2, (12, 7)), rng.integers(0, 2, (12, 7))
            perm = rng.permutation(7)
            self.assertAlmostEqual(macro_f1(preds[:, perm], golds[:, perm]), macro_f1(preds, golds))
            self.assertAlmostEqual(hamming_error(preds[:, perm], golds[:, perm]), hamming_error(preds, golds))

    def test_hamming_duplicated_data(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            preds, golds = rng.integers(0, 2, (9, 5)), rng.integers(0, 2, (9, 5))
            doubled = hamming_error(np.vstack([preds, preds]), np.vstack([golds, golds]))
            self.assertAlmostEqual(doubled, hamming_error(preds, golds))

    def test_hamming(self):
        self.assertAlmostEqual(hamming_error([[1, 0, 0, 0], [1, 1, 1, 1]], [[0, 0, 0, 0], [1, 1, 1, 1]]), 12.5)
        self.assertEqual(hamming_error([[0, 1]], [[0, 1]]), 0.0)

    def test_empty(self):
        with self.assertRaises(ValueError):
            macro_f1(np.zeros((0, 3)), np.zeros((0, 3)))
        with self.assertRaises(ValueError):
            hamming_error(np.zeros((0, 3)), np.zeros((0, 3)))

    def test_mismatch(self):
        with self.assertRaises(DimensionError):
            macro_f1([[1, 0]], [[1, 0], [0, 1]])

    def test_tune_threshold(self):
        relaxed = np.array([[0.35, 0.1], [0.8, 0.3]])
        golds = np.array([[1, 0], [1, 0]])
        threshold, f1 = tune_threshold(relaxed, golds)
        self.assertEqual(f1, 1.0)
        # every threshold in (0.3, 0.35] is perfect, 0.35 is the closest to 0.5
        self.assertEqual(threshold, 0.35)
        self.assertIn(threshold, DEFAULT_THRESHOLD_GRID)

    def test_tune_threshold_tie_goes_to_half(self):
        relaxed = np.array([[0.99, 0.01]])
        threshold, _ = tune_threshold(relaxed, [[1, 0]])
        self.assertEqual(threshold, 0.5)
        threshold, value = tune_threshold(relaxed, [[1, 0]], metric="hamming")
        self.assertEqual((threshold, value), (0.5, 0.0))

    def test_tune_threshold_errors(self):
        with self.assertRaises(ValueError):
            tune_threshold([[0.5]], [[1]], grid=[])
        with self.assertRaises(ValueError):
            tune_threshold([[0.5]], [[1]], metric="accuracy")

    def test_grid(self):
        self.assertEqual(len(DEFAULT_THRESHOLD_GRID), 19)
        self.assertEqual(DEFAULT_THRESHOLD_GRID[0], 0.05)
        self.assertEqual(DEFAULT_THRESHOLD_GRID[-1], 0.95)

    def test_evaluate(self):
        report = evaluate(np.array([[0.9, 0.2], [0.4, 0.6]]), [[1, 0], [0, 1]], 0.5)
        self.assertEqual(report.macro_f1, 1.0)
        self.assertEqual(report.hamming_error, 0.0)
        self.assertEqual(report.n_examples, 2)
        self.assertIsNone(report.search_error_rate)

    def test_report_text(self):
        report = EvalReport(0.75, 12.5, 0.45, 8, 0.125)
        text = report.to_text()
        self.assertIn("macro_f1=0.75\n", text)
        self.assertEqual(EvalReport.from_text(text), report)
        self.assertNotIn("search_error_rate", EvalReport(0.5, 1.0, 0.5).to_text())

    def test_search_errors(self):
        # scores [1, -1]: the energy prefers labels [0, 1]
        p = SpenParams(FeatureNetParams(1), LocalEnergyParams([[1.0, 0.0], [-1.0, 0.0]]))
        X = np.ones((3, 1))
        golds = [[0, 1], [0, 1], [1, 0]]
        predictions = [[0, 1], [1, 1], [0, 1]]
        self.assertAlmostEqual(count_search_errors(p, X, golds, predictions), 1.0 / 3)
        self.assertEqual(count_search_errors(p, X, golds, golds), 0.0)


if __name__ == '__main__':
    unittest.main()
