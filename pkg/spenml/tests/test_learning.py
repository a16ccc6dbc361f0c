# -*- coding: utf-8 -*-

# CMD: python -m unittest spenml.tests.test_learning

import sys, os
import json
import tempfile
import unittest

testdir = os.path.dirname(__file__)
srcdir = '../../'
sys.path.insert(0, os.path.abspath(os.path.join(testdir, srcdir)))

import numpy as np

from spenml.learning import *
from spenml.learning import _dev_record, _l2_weights
from spenml.data import Dataset, LabeledExample
from spenml.energy import FeatureNetParams, LocalEnergyParams, SpenParams, init_spen_params
from spenml.errors import DimensionError, NumericError
from spenml.inference import InferenceConfig
from spenml.optim import MomentumSGD, epoch_learning_rate, iterate_minibatches
from spenml.tests.gradcheck import numeric_grad, rel_error


def toy_data(n=40, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 3))
    Y = np.column_stack([X[:, 0] > 0, X[:, 1] > 0, X[:, 0] + X[:, 1] > 0, X[:, 2] > 0.5]).astype(np.int8)
    return Dataset(X, Y, "toy")


class TestOptim(unittest.TestCase):

    def test_plain_step(self):
        theta = np.array([1.0, 2.0])
        MomentumSGD({"w": theta}, 0.5).step({"w": np.array([1.0, -1.0])})
        np.testing.assert_array_equal(theta, [0.5, 2.5])

    def test_momentum(self):
        theta = np.zeros(1)
        opt = MomentumSGD({"w": theta}, 1.0, momentum=0.5)
        opt.step({"w": np.ones(1)})
        opt.step({"w": np.ones(1)})
        np.testing.assert_array_equal(theta, [-2.5])
        opt.step({"w": np.zeros(1)})
        np.testing.assert_array_equal(theta, [-3.25])

    def test_l2_decay_without_gradient(self):
        theta = np.array([2.0, -4.0])
        bias = np.array([3.0])
        opt = MomentumSGD({"w": theta, "b": bias}, 0.1, l2={"w": 0.5})
        opt.step({})
        np.testing.assert_allclose(theta, [1.9, -3.8])
        np.testing.assert_array_equal(bias, [3.0])

    def test_minibatches_cover_once(self):
        batches = list(iterate_minibatches(10, 3, np.random.default_rng(0)))
        self.assertEqual([len(b) for b in batches], [3, 3, 3, 1])
        np.testing.assert_array_equal(np.sort(np.concatenate(batches)), np.arange(10))

    def test_decay(self):
        self.assertAlmostEqual(epoch_learning_rate(0.1, 0.5, 3), 0.0125)
        self.assertEqual(epoch_learning_rate(0.1, 1.0, 7), 0.1)


class TestTrainConfig(unittest.TestCase):

    def test_defaults(self):
        cfg = TrainConfig()
        self.assertEqual(cfg.epochs_per_stage, {"pretrain": 10, "global_only": 10, "joint": 5})
        self.assertEqual(train_config_dict(cfg)["surrogate"], "squared")

    def test_invalid(self):
        for kwargs in ({"lr": 0.0}, {"lr_decay": 1.5}, {"momentum": 1.0}, {"l2_local": -1.0}, {"batch_size": 0},
                       {"epochs_joint": -1}, {"joint_lr_scale": 1.0}, {"surrogate": "hinge"}, {"ssvm_lr": 0.0}):
            with self.assertRaises(ValueError, msg=kwargs):
                TrainConfig(**kwargs)

    def test_l2_skips_biases(self):
        p = init_spen_params(3, 2, (4,), global_kind="crf", seed=0)
        l2 = _l2_weights(p.named_tensors(), TrainConfig(l2_local=0.1, l2_global=0.2))
        self.assertEqual(l2["feat.A1"], 0.1)
        self.assertEqual(l2["feat.a1_bias"], 0.0)
        self.assertEqual(l2["global.S1"], 0.2)
        self.assertEqual(l2["global.s"], 0.0)
        np.testing.assert_array_equal(l2["local.B"][:, -1], [0.0, 0.0])
        np.testing.assert_array_equal(l2["local.B"][:, :-1], np.full((2, 4), 0.1))
        with_biases = _l2_weights(p.named_tensors(), TrainConfig(l2_local=0.1, l2_biases=True))
        self.assertEqual(with_biases["feat.a1_bias"], 0.1)


class TestSsvm(unittest.TestCase):

    def setUp(self):
        # scores [1, -1] on the constant feature 1
        self.p = SpenParams(FeatureNetParams(1), LocalEnergyParams([[1.0, 0.0], [-1.0, 0.0]]))
        self.cfg = TrainConfig()
        self.icfg = InferenceConfig(max_iters=30)

    def test_hinge_by_hand(self):
        ex = LabeledExample(np.array([1.0]), np.array([1, 0], dtype=np.int8))
        loss = ssvm_example_loss(self.p, ex, self.cfg, self.icfg, ybar_pred=np.array([0.0, 1.0]))
        self.assertEqual(loss.delta_at_pred, 2.0)
        self.assertEqual(loss.energy_gap, -2.0)
        self.assertEqual(loss.margin_violation, 4.0)

    def test_no_violation(self):
        ex = LabeledExample(np.array([1.0]), np.array([0, 1], dtype=np.int8))
        pred = np.array([0.0, 1.0])
        loss = ssvm_example_loss(self.p, ex, self.cfg, self.icfg, ybar_pred=pred)
        self.assertEqual(loss.margin_violation, 0.0)
        gradient = ssvm_subgradient(self.p, ex, self.cfg, self.icfg, ybar_pred=pred)
        for name, value in gradient.named_tensors().items():
            np.testing.assert_array_equal(value, 0.0, name)

    def test_subgradient_by_hand(self):
        ex = LabeledExample(np.array([1.0]), np.array([1, 0], dtype=np.int8))
        gradient = ssvm_subgradient(self.p, ex, self.cfg, self.icfg, ybar_pred=np.array([0.0, 1.0]))
        np.testing.assert_array_equal(gradient.local.B, [[1.0, 1.0], [-1.0, -1.0]])

    def test_loss_augmented_violation(self):
        ex = LabeledExample(np.array([1.0]), np.array([0, 1], dtype=np.int8))
        loss = ssvm_example_loss(self.p, ex, self.cfg, self.icfg)
        self.assertGreaterEqual(loss.margin_violation, 0.0)
        self.assertGreaterEqual(loss.delta_at_pred, 0.0)

    def test_subgradient_finite_differences(self):
        rng = np.random.default_rng(21)
        for kind in ("label_only", "conditioned", "crf"):
            p = init_spen_params(3, 4, (3,), "softplus", "sigmoid", kind, n_measurements=3, seed=22)
            p.local.B[...] = 0.3 * rng.standard_normal(p.local.B.shape)
            gold = np.array([1, 0, 1, 0], dtype=np.int8)
            ex = LabeledExample(rng.standard_normal(3), gold)
            pred = np.clip(1.0 - gold + 0.1 * rng.standard_normal(4), 0.05, 0.95)
            self.assertGreater(ssvm_example_loss(p, ex, self.cfg, self.icfg, pred).margin_violation, 0.0)
            gradient = ssvm_subgradient(p, ex, self.cfg, self.icfg, pred).named_tensors()
            for name, tensor in p.named_tensors().items():
                numeric = numeric_grad(lambda: ssvm_example_loss(p, ex, self.cfg, self.icfg, pred).margin_violation,
                                       tensor)
                if name == "global.S1":
                    np.fill_diagonal(numeric, 0.0)
                self.assertLess(rel_error(gradient[name], numeric), 1e-5, (kind, name))

    def test_small_step_lowers_hinge(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            for kind in ("label_only", "conditioned"):
                p = init_spen_params(3, 4, (3,), "softplus", "sigmoid", kind, n_measurements=3, seed=seed)
                gold = rng.integers(0, 2, 4).astype(np.int8)
                ex = LabeledExample(rng.standard_normal(3), gold)
                pred = np.clip(1.0 - gold + 0.1 * rng.standard_normal(4), 0.05, 0.95)
                before = ssvm_example_loss(p, ex, self.cfg, self.icfg, pred).margin_violation
                gradient = ssvm_subgradient(p, ex, self.cfg, self.icfg, pred).named_tensors()
                MomentumSGD(p.named_tensors(), 1e-4).step(gradient)
                after = ssvm_example_loss(p, ex, self.cfg, self.icfg, pred).margin_violation
                self.assertLessEqual(after, before + 1e-12, (seed, kind))

    def test_dimension_error(self):
        ex = LabeledExample(np.array([1.0, 2.0]), np.array([1, 0], dtype=np.int8))
        with self.assertRaises(DimensionError):
            ssvm_example_loss(self.p, ex, self.cfg, self.icfg)


class TestTraining(unittest.TestCase):

    def setUp(self):
        self.data = toy_data()
        self.dev = toy_data(20, seed=1)
        self.icfg = InferenceConfig(max_iters=20, batch_size=10)

    def test_local_loss_at_zero(self):
        p = SpenParams(FeatureNetParams(3), LocalEnergyParams(np.zeros((4, 4))))
        self.assertAlmostEqual(local_logistic_loss(p, self.data.X, self.data.Y), 4.0 * np.log(2.0))

    def test_pretrain_lowers_loss(self):
        p = init_spen_params(3, 4, (8,), global_kind="none", seed=0)
        cfg = TrainConfig(lr=0.1, batch_size=10, epochs_pretrain=20)
        report = TrainingReport()
        trained = pretrain_local(p, self.data, cfg, report=report, show_progress=False)
        before = local_logistic_loss(p, self.data.X, self.data.Y)
        after = local_logistic_loss(trained, self.data.X, self.data.Y)
        self.assertLess(after, 0.8 * before)
        self.assertEqual(len(report.stage("pretrain")), 20)
        self.assertLess(report.records[-1]["loss"], report.records[0]["loss"])

    def test_global_only_clamps_features(self):
        p = init_spen_params(3, 4, (5,), global_kind="label_only", n_measurements=4, seed=1)
        cfg = TrainConfig(batch_size=10, epochs_pretrain=0, epochs_global_only=2, epochs_joint=0)
        trained, report = train_spen(p, self.data, cfg, self.icfg, show_progress=False)
        np.testing.assert_array_equal(trained.feat.A1, p.feat.A1)
        np.testing.assert_array_equal(trained.local.B, p.local.B)
        self.assertFalse(np.array_equal(trained.global_energy.C1, p.global_energy.C1))
        self.assertEqual([r["stage"] for r in report.records], ["global_only", "global_only"])

    def test_joint_moves_features(self):
        p = init_spen_params(3, 4, (5,), global_kind="conditioned", n_measurements=4, seed=2)
        cfg = TrainConfig(batch_size=10, epochs_pretrain=0, epochs_global_only=0, epochs_joint=1)
        trained, _ = train_spen(p, self.data, cfg, self.icfg, show_progress=False)
        self.assertFalse(np.array_equal(trained.feat.A1, p.feat.A1))

    def test_full_schedule(self):
        p = init_spen_params(3, 4, (5,), global_kind="label_only", n_measurements=4, seed=3)
        cfg = TrainConfig(batch_size=10, epochs_pretrain=2, epochs_global_only=2, epochs_joint=1)
        trained, report = train_spen(p, self.data, cfg, self.icfg, dev=self.dev, show_progress=False)
        self.assertEqual([r["stage"] for r in report.records],
                         ["pretrain", "pretrain", "global_only", "global_only", "joint"])
        for record in report.records:
            self.assertTrue({"loss", "dev_f1", "dev_hamming", "threshold"} <= set(record))
        best = max(report.records, key=lambda r: r["dev_f1"])
        self.assertEqual(report.threshold, best["threshold"])
        self.assertEqual(report.selected, (best["stage"], best["epoch"]))
        self.assertAlmostEqual(_dev_record(trained, self.dev, self.icfg, 1)["dev_f1"], best["dev_f1"])
        self.assertEqual(set(report_summary(report)), {"pretrain", "global_only", "joint", "selected"})
        # the input is left alone
        self.assertFalse(trained is p)

    def test_last_epoch_without_selection(self):
        p = init_spen_params(3, 4, (5,), global_kind="label_only", n_measurements=4, seed=3)
        cfg = TrainConfig(batch_size=10, epochs_pretrain=2, epochs_global_only=2, epochs_joint=1, select_best=False)
        trained, report = train_spen(p, self.data, cfg, self.icfg, dev=self.dev, show_progress=False)
        self.assertEqual(report.threshold, report.records[-1]["threshold"])
        self.assertIsNone(report.selected)
        self.assertAlmostEqual(_dev_record(trained, self.dev, self.icfg, 1)["dev_f1"], report.records[-1]["dev_f1"])

    def test_ssvm_lr(self):
        p = init_spen_params(3, 4, (5,), global_kind="label_only", n_measurements=4, seed=8)
        slow = TrainConfig(batch_size=10, epochs_pretrain=0, epochs_global_only=1, epochs_joint=0, ssvm_lr=1e-3)
        fast = TrainConfig(batch_size=10, epochs_pretrain=0, epochs_global_only=1, epochs_joint=0)
        moved = []
        for cfg in (slow, fast):
            trained, _ = train_spen(p, self.data, cfg, self.icfg, show_progress=False)
            moved.append(np.abs(trained.global_energy.C1 - p.global_energy.C1).max())
        self.assertLess(moved[0], moved[1])

    def test_deterministic(self):
        p = init_spen_params(3, 4, (5,), global_kind="crf", seed=4)
        cfg = TrainConfig(batch_size=10, epochs_pretrain=1, epochs_global_only=1, epochs_joint=1)
        first, _ = train_spen(p, self.data, cfg, self.icfg, show_progress=False)
        second, _ = train_spen(p, self.data, cfg, self.icfg, show_progress=False)
        for name, value in first.named_tensors().items():
            np.testing.assert_array_equal(value, second.named_tensors()[name], name)

    def test_no_global_energy_only_pretrains(self):
        p = init_spen_params(3, 4, (), global_kind="none", seed=5)
        cfg = TrainConfig(batch_size=10, epochs_pretrain=1, epochs_global_only=3, epochs_joint=3)
        _, report = train_spen(p, self.data, cfg, self.icfg, show_progress=False)
        self.assertEqual([r["stage"] for r in report.records], ["pretrain"])
        self.assertIsNone(report.threshold)

    def test_divergence(self):
        data = Dataset(np.full((20, 3), 10.0), self.data.Y[:20])
        p = init_spen_params(3, 4, (5,), global_kind="none", seed=6)
        cfg = TrainConfig(lr=1e308, batch_size=5, epochs_pretrain=2)
        with np.errstate(all="ignore"):
            with self.assertRaises(NumericError) as ctx:
                train_spen(p, data, cfg, self.icfg, show_progress=False)
        self.assertEqual(ctx.exception.stage, "pretrain")
        self.assertEqual(ctx.exception.epoch, 0)

    def test_divergence_in_ssvm_stage(self):
        p = init_spen_params(3, 4, (5,), global_kind="label_only", n_measurements=4, seed=6)
        cfg = TrainConfig(lr=1e300, batch_size=5, epochs_pretrain=0, epochs_global_only=2, epochs_joint=0)
        with np.errstate(all="ignore"):
            with self.assertRaises(NumericError) as ctx:
                train_spen(p, self.data, cfg, self.icfg, show_progress=False)
        self.assertEqual(ctx.exception.stage, "global_only")
        self.assertIn(ctx.exception.epoch, (0, 1))

    def test_numeric_error_location(self):
        located = NumericError("non-finite gradient", coordinate=2).at("joint", 3)
        self.assertEqual((located.stage, located.epoch, located.coordinate), ("joint", 3, 2))
        self.assertEqual(str(located), "non-finite gradient [stage=joint, epoch=3, coordinate=2]")

    def test_mismatched_data(self):
        p = init_spen_params(5, 4, (), global_kind="none", seed=7)
        with self.assertRaises(DimensionError):
            train_spen(p, self.data, TrainConfig(), self.icfg, show_progress=False)

    def test_report_jsonl(self):
        report = TrainingReport()
        report.add({"stage": "pretrain", "epoch": 0, "loss": 1.5})
        report.add({"stage": "joint", "epoch": 0, "loss": 0.5})
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "training_report.jsonl")
            report.to_jsonl(path)
            with open(path) as f:
                records = [json.loads(line) for line in f]
        self.assertEqual(records[1], {"stage": "joint", "epoch": 0, "loss": 0.5})
        self.assertEqual(len(report), 2)


if __name__ == '__main__':
    unittest.main()
