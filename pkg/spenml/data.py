# -*- coding: utf-8 -*-
"""
This module reads, writes, splits and generates multi-label data sets.

Canonical text format (UTF-8, LF line endings)::

    #ml d=<d> L=<L>
    <comma-separated 0-based positive label indices, or nothing> <idx>:<val> <idx>:<val> ...

Feature indices are 0-based and omitted features are 0. A line whose label field is empty starts with the separating
space; a line without features holds only the label field.

Synthetic block-exclusivity data: X and A have i.i.d. standard normal entries (numpy's PCG64 generator, ziggurat
sampling), Z = X A, the L columns of Z are cut into consecutive blocks and, within each block, the largest entry of a
row is the only positive label. Generation is deterministic given the seed.

Benchmark data (Bibtex, Delicious, Bookmarks, Yeast) comes in several formats; files in the extreme classification
repository format (header ``n d L``, same line syntax) convert with ``convert_xc``.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .errors import DataFormatError, DimensionError

logger = logging.getLogger(__name__)

HEADER_PREFIX = "#ml"


@dataclass(frozen=True)
class LabeledExample:
    '''
    One example.

    Args:
        - **features** (*ndarray*): x, length d.
        - **labels** (*ndarray of int8*): y in {0,1}^L.
    '''
    features: np.ndarray
    labels: np.ndarray


class Dataset:
    '''
    A multi-label data set held as two dense arrays.

    Args:
        - **X** (*ndarray*): Features, shape (n, d).
        - **Y** (*ndarray*): Binary labels, shape (n, L).
        - **name** (*str*): A label for logs and reports.

    Methods:
        - **subset** (*indices*): The examples at *indices*, in that order.
        - **summary** (): d, L, example count and positive-label rate.
    '''

    def __init__(self, X, Y, name=""):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y)
        if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
            raise DimensionError("features and labels must be 2-D with one row per example", X.shape, Y.shape)
        if not np.all(np.isfinite(X)):
            raise DataFormatError("features must be finite")
        if not np.all((Y == 0) | (Y == 1)):
            raise DataFormatError("labels must be 0 or 1")
        self.X = X
        self.Y = Y.astype(np.int8)
        self.name = name

    @classmethod
    def from_examples(cls, examples, name=""):
        examples = list(examples)
        if not examples:
            raise DataFormatError("a data set needs at least one example")
        return cls(np.vstack([e.features for e in examples]), np.vstack([e.labels for e in examples]), name)

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def L(self):
        return self.Y.shape[1]

    @property
    def examples(self):
        return [self[i] for i in range(len(self))]

    @property
    def positive_rate(self):
        return float(self.Y.mean()) if self.Y.size else 0.0

    def __len__(self):
        return self.X.shape[0]

    def __getitem__(self, i):
        return LabeledExample(self.X[i], self.Y[i])

    def subset(self, indices, name=None):
        indices = np.asarray(indices, dtype=int)
        return Dataset(self.X[indices], self.Y[indices], self.name if name is None else name)

    def summary(self):
        return {"name": self.name, "d": self.d, "L": self.L, "examples": len(self),
                "positive_rate_percent": 100.0 * self.positive_rate}

    def __repr__(self):
        return "Dataset(name=%r, n=%d, d=%d, L=%d)" % (self.name, len(self), self.d, self.L)


def _parse_header(line, path):
    parts = line.split()
    if not parts or parts[0] != HEADER_PREFIX:
        raise DataFormatError("expected header '#ml d=<d> L=<L>'", path, 1)
    values = {}
    for token in parts[1:]:
        key, _, value = token.partition("=")
        try:
            values[key] = int(value)
        except ValueError:
            raise DataFormatError("bad header field %r" % token, path, 1) from None
    if "d" not in values or "L" not in values or values["d"] < 0 or values["L"] < 1:
        raise DataFormatError("header must declare d >= 0 and L >= 1", path, 1)
    return values["d"], values["L"]


def _parse_line(line, d, L, path, line_number):
    label_field, _, rest = line.partition(" ")
    if ":" in label_field:  # no label field at all, the line starts with a feature
        label_field, rest = "", line
    labels, indices, values = [], [], []
    try:
        if label_field:
            labels = [int(t) for t in label_field.split(",")]
        for token in rest.split():
            j, _, v = token.partition(":")
            indices.append(int(j))
            values.append(float(v))
    except ValueError:
        raise DataFormatError("malformed line %r" % line, path, line_number) from None
    if any(not 0 <= i < L for i in labels):
        raise DataFormatError("label index out of range [0, %d)" % L, path, line_number)
    if any(not 0 <= j < d for j in indices):
        raise DataFormatError("feature index out of range [0, %d)" % d, path, line_number)
    if len(set(indices)) != len(indices):
        raise DataFormatError("repeated feature index", path, line_number)
    if not all(math.isfinite(v) for v in values):
        raise DataFormatError("non-finite feature value", path, line_number)
    return labels, indices, values


def _assemble(rows, d, L, name):
    indptr, indices, values = [0], [], []
    Y = np.zeros((len(rows), L), dtype=np.int8)
    for i, (labels, cols, vals) in enumerate(rows):
        Y[i, labels] = 1
        indices.extend(cols)
        values.extend(vals)
        indptr.append(len(indices))
    X = csr_matrix((np.array(values, dtype=float), np.array(indices, dtype=int), np.array(indptr)),
                   shape=(len(rows), d)).toarray()
    return Dataset(X, Y, name)


def load_multilabel(path, name=None):
    '''
    Reads a data set in the canonical text format and logs its summary (d, L, size, % positive labels).

    Args:
        - **path** (*str*): The file.
        - **name** (*str*): Data set name (defaults to the path).

    Returns:
        - **dataset** (*Dataset*)
    '''
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise DataFormatError("empty file", path)
    d, L = _parse_header(lines[0], path)
    rows = [_parse_line(line, d, L, path, k) for k, line in enumerate(lines[1:], start=2)]
    if not rows:
        raise DataFormatError("no examples", path)
    dataset = _assemble(rows, d, L, str(path) if name is None else name)
    logger.info("loaded %s", dataset.summary())
    return dataset


def _format_value(v):
    return repr(float(v))


def save_multilabel(dataset, path):
    '''
    Writes a data set in the canonical text format. Values are written with their shortest exact representation, so
    ``load_multilabel`` reads back the same examples bit for bit.

    Args:
        - **dataset** (*Dataset*)
        - **path** (*str*)
    '''
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("%s d=%d L=%d\n" % (HEADER_PREFIX, dataset.d, dataset.L))
        for x, y in zip(dataset.X, dataset.Y):
            label_field = ",".join(str(i) for i in np.flatnonzero(y))
            nonzero = np.flatnonzero((x != 0.0) | np.signbit(x))
            features = " ".join("%d:%s" % (j, _format_value(x[j])) for j in nonzero)
            f.write(label_field + (" " + features if features else "") + "\n")


def convert_xc(src, dst, name=None):
    '''
    Converts a file in the extreme classification repository format (first line ``n d L``, then the canonical line
    syntax) into the canonical format.

    Args:
        - **src** (*str*): Input file.
        - **dst** (*str*): Output file.

    Returns:
        - **dataset** (*Dataset*): The converted data.
    '''
    with open(src, encoding="utf-8") as f:
        lines = f.read().splitlines()
    try:
        n, d, L = (int(t) for t in lines[0].split())
    except (IndexError, ValueError):
        raise DataFormatError("expected header 'n d L'", src, 1) from None
    rows = [_parse_line(line, d, L, src, k) for k, line in enumerate(lines[1:], start=2)]
    if len(rows) != n:
        raise DataFormatError("header declares %d examples, found %d" % (n, len(rows)), src)
    dataset = _assemble(rows, d, L, str(src) if name is None else name)
    save_multilabel(dataset, dst)
    logger.info("converted %s -> %s: %s", src, dst, dataset.summary())
    return dataset


@dataclass
class SynthConfig:
    '''
    Settings of the synthetic block-exclusivity generator.

    Args:
        - **n_examples** (*int*)
        - **d** (*int*): Number of features (64).
        - **n_labels** (*int*): Number of labels (16).
        - **block_size** (*int*): Labels per exclusive block (4).
        - **seed** (*int*)
    '''
    n_examples: int = 1500
    d: int = 64
    n_labels: int = 16
    block_size: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.n_examples < 1 or self.d < 1 or self.block_size < 1:
            raise ValueError("n_examples, d and block_size must be positive")
        if self.n_labels % self.block_size:
            raise ValueError("n_labels (%d) must be divisible by block_size (%d)" % (self.n_labels, self.block_size))


def block_argmax_labels(Z, block_size):
    """Labels with a single 1 per row-wise block, at the largest entry of the block."""
    n, L = Z.shape
    winners = np.argmax(Z.reshape(n, L // block_size, block_size), axis=2)
    Y = np.zeros((n, L // block_size, block_size), dtype=np.int8)
    np.put_along_axis(Y, winners[:, :, None], 1, axis=2)
    return Y.reshape(n, L)


def generate_synthetic(cfg):
    '''
    Generates the synthetic block-exclusivity data set.

    Args:
        - **cfg** (*SynthConfig*)

    Returns:
        - **dataset** (*Dataset*): Every row has exactly n_labels / block_size positive labels.
    '''
    rng = np.random.default_rng(cfg.seed)
    X = rng.standard_normal((cfg.n_examples, cfg.d))
    A = rng.standard_normal((cfg.d, cfg.n_labels))
    Y = block_argmax_labels(X @ A, cfg.block_size)
    return Dataset(X, Y, "synthetic-%d-seed%d" % (cfg.n_examples, cfg.seed))


def split(data, fractions, seed):
    '''
    Random train/dev/test partition. Each part keeps the original order of its examples.

    Args:
        - **data** (*Dataset*)
        - **fractions** (*tuple*): (train, dev, test), summing to 1.
        - **seed** (*int*)

    Returns:
        - **train**, **dev**, **test** (*Dataset*): Empty parts are returned as None.
    '''
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must be three non-negative numbers summing to 1, got %r" % (fractions,))
    n = len(data)
    n_dev = int(round(n * fractions[1]))
    n_test = int(round(n * fractions[2]))
    n_train = n - n_dev - n_test
    sizes = (n_train, n_dev, n_test)
    for part, (size, fraction) in enumerate(zip(sizes, fractions)):
        if fraction > 0 and size <= 0:
            raise ValueError("split part %d would be empty for %d examples and fractions %r" % (part, n, fractions))
    order = np.random.default_rng(seed).permutation(n)
    bounds = np.cumsum((0,) + sizes)
    parts = []
    for part, tag in enumerate(("train", "dev", "test")):
        indices = np.sort(order[bounds[part]:bounds[part + 1]])
        parts.append(data.subset(indices, "%s/%s" % (data.name, tag)) if len(indices) else None)
    return tuple(parts)


def kfold(data, k, seed):
    '''
    k-fold cross-validation splits.

    Args:
        - **data** (*Dataset*)
        - **k** (*int*): Number of folds, 2 <= k <= len(data).
        - **seed** (*int*)

    Returns:
        - **folds** (*list of (Dataset, Dataset)*): (train, test) per fold.
    '''
    if not 2 <= k <= len(data):
        raise ValueError("k must be in [2, %d], got %r" % (len(data), k))
    order = np.random.default_rng(seed).permutation(len(data))
    folds = np.array_split(order, k)
    out = []
    for i, test_idx in enumerate(folds):
        train_idx = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((data.subset(np.sort(train_idx), "%s/fold%d-train" % (data.name, i)),
                    data.subset(np.sort(test_idx), "%s/fold%d-test" % (data.name, i))))
    return out


def load_split_indices(path):
    """0-based example indices, one per line, e.g. a published train/dev/test split."""
    try:
        indices = np.loadtxt(path, dtype=int, ndmin=1)
    except ValueError as e:
        raise DataFormatError("bad split file: %s" % e, path) from None
    return indices
