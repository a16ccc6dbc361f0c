# -*- coding: utf-8 -*-

# CMD: python -m unittest spenml.tests.test_serialization

import sys, os
import tempfile
import unittest

testdir = os.path.dirname(__file__)
srcdir = '../../'
sys.path.insert(0, os.path.abspath(os.path.join(testdir, srcdir)))

import numpy as np

from spenml.serialization import *
from spenml.energy import feature_forward, init_spen_params, total_energy
from spenml.errors import DataFormatError
from spenml.meanfield import dmf_forward, init_dmf_params


class TestSerialization(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "model.npz")
        self.rng = np.random.default_rng(0)

    def tearDown(self):
        self.tmp.cleanup()

    def assertSameTensors(self, a, b):
        ta, tb = a.named_tensors(), b.named_tensors()
        self.assertEqual(set(ta), set(tb))
        for name in ta:
            np.testing.assert_array_equal(ta[name], tb[name], name)

    def test_spen_kinds(self):
        for kind, depth in (("label_only", 1), ("label_only", 2), ("conditioned", 1), ("crf", 1), ("none", 1)):
            p = init_spen_params(4, 3, (5, 2), "softplus", "sigmoid", kind, n_measurements=3, global_depth=depth,
                                 g_global="relu", seed=1)
            save_model(self.path, p, threshold=0.45, model_config={"model.kind": "spen"})
            q, meta = load_model(self.path)
            self.assertSameTensors(p, q)
            self.assertEqual(q.global_kind, p.global_kind)
            self.assertEqual(meta["threshold"], 0.45)
            self.assertEqual(meta["model_config"], {"model.kind": "spen"})
            self.assertEqual(meta["kind"], "spen")
            x = self.rng.standard_normal(4)
            y = self.rng.uniform(size=3)
            self.assertEqual(total_energy(q, feature_forward(q.feat, x), y), total_energy(p, feature_forward(p.feat, x), y))

    def test_dimensions_in_metadata(self):
        p = init_spen_params(4, 3, (5, 2), global_kind="label_only", n_measurements=6, global_depth=2, seed=3)
        save_model(self.path, p)
        _, meta = load_model(self.path)
        dims = {k: meta[k] for k in ("input_dim", "hidden_dim", "feature_dim", "n_labels", "n_measurements",
                                     "global_depth")}
        self.assertEqual(dims, {"input_dim": 4, "hidden_dim": 5, "feature_dim": 2, "n_labels": 3,
                                "n_measurements": 6, "global_depth": 2})
        save_model(self.path, init_spen_params(4, 3, (), global_kind="crf", seed=3))
        _, meta = load_model(self.path)
        self.assertEqual((meta["hidden_dim"], meta["feature_dim"], meta["n_measurements"]), (None, 4, None))

    def test_dmf(self):
        unary = init_spen_params(4, 3, (5,), global_kind="none", seed=2)
        p = init_dmf_params(unary, iters=7, clamp_unaries=False)
        p.W[...] = self.rng.standard_normal((3, 3))
        save_model(self.path, p)
        q, meta = load_model(self.path)
        self.assertEqual((q.iters, q.clamp_unaries), (7, False))
        self.assertIsNone(meta["threshold"])
        x = self.rng.standard_normal(4)
        np.testing.assert_array_equal(dmf_forward(q, x), dmf_forward(p, x))

    def test_not_a_model(self):
        with open(self.path, "w") as f:
            f.write("not a model")
        with self.assertRaises(DataFormatError):
            load_model(self.path)

    def test_missing_metadata(self):
        with open(self.path, "wb") as f:
            np.savez(f, W=np.zeros(2))
        with self.assertRaises(DataFormatError):
            load_model(self.path)

    def test_wrong_version(self):
        with open(self.path, "wb") as f:
            np.savez(f, **{META_KEY: np.array('{"format_version": "other/9", "kind": "spen"}')})
        with self.assertRaises(DataFormatError):
            load_model(self.path)

    def test_missing_file(self):
        with self.assertRaises(DataFormatError):
            load_model(os.path.join(self.tmp.name, "missing.npz"))


if __name__ == '__main__':
    unittest.main()
