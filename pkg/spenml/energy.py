# -*- coding: utf-8 -*-
"""
This module contains the energy networks of a SPEN (structured prediction energy network). A SPEN scores a pair
(x, ybar) with a scalar energy, where ybar is a relaxed label vector in [0,1]^L; prediction minimises the energy over ybar.

The energy is the sum of two terms:
    - ``local energy``: a linear model per label on top of the feature network F(x).
    - ``global energy``: one of
        - ``label_only``: c2' g(C1 ybar + c1_bias), optionally with a second hidden layer. The rows of C1 are the learned
          label measurements.
        - ``conditioned``: d2' g(D1 [ybar; F(x)] + d1_bias).
        - ``crf``: ybar' S1 ybar + s' ybar, a fully connected pairwise CRF written as a SPEN.
        - ``none``: local energy only (the MLP baseline).

The feature network is F(x) = g_out(A2 g_hidden(A1 x + a1_bias) + a2_bias). It may also have a single layer or no
layer at all, in which case F(x) = x (linear features).

The local energy has a per-label bias: B has one extra column that multiplies a constant 1 appended to F(x).

Every energy function accepts either a single example (1-D arrays, returns a float) or a batch (2-D arrays with one
example per row, returns one energy per row). Gradients with respect to parameters are summed over the batch.
"""

import copy
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Union

import numpy as np

from .compute import DTYPE, Nonlinearity, affine, apply_nonlinearity, matvec, nonlinearity_grad
from .errors import DimensionError

logger = logging.getLogger(__name__)


class GlobalKind(str, Enum):
    LABEL_ONLY = "label_only"
    CONDITIONED = "conditioned"
    CRF = "crf"
    NONE = "none"


def _tensor(values):
    return np.array(values, dtype=DTYPE, copy=True)


@dataclass
class FeatureNetParams:
    '''
    Parameters of the feature network F(x).

    Args:
        - **input_dim** (*int*): d, the length of x.
        - **weights** (*list of ndarray*): A1 (h1 x d), A2 (f x h1); empty for linear features.
        - **biases** (*list of ndarray*): One bias vector per layer.
        - **g_hidden** (*Nonlinearity*): Non-linearity of every layer but the last.
        - **g_out** (*Nonlinearity*): Non-linearity of the last layer.
    '''
    input_dim: int
    weights: List[np.ndarray] = field(default_factory=list)
    biases: List[np.ndarray] = field(default_factory=list)
    g_hidden: Nonlinearity = Nonlinearity.RELU
    g_out: Nonlinearity = Nonlinearity.RELU

    def __post_init__(self):
        self.g_hidden = Nonlinearity.parse(self.g_hidden)
        self.g_out = Nonlinearity.parse(self.g_out)
        self.weights = [_tensor(W) for W in self.weights]
        self.biases = [_tensor(b) for b in self.biases]
        if len(self.weights) != len(self.biases):
            raise DimensionError("feature network needs one bias per layer", len(self.weights), len(self.biases))
        fan_in = self.input_dim
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or W.shape[1] != fan_in or b.shape != (W.shape[0],):
                raise DimensionError("feature layer %d does not chain" % (k + 1), W.shape, b.shape, fan_in)
            fan_in = W.shape[0]

    @property
    def output_dim(self):
        return self.weights[-1].shape[0] if self.weights else self.input_dim

    @property
    def A1(self):
        return self.weights[0]

    @property
    def A2(self):
        return self.weights[1]

    def named_tensors(self):
        tensors = {}
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            tensors["A%d" % (k + 1)] = W
            tensors["a%d_bias" % (k + 1)] = b
        return tensors


@dataclass
class LocalEnergyParams:
    '''
    Parameters of the local energy: one row b_i per label over [F(x); 1].

    Args:
        - **B** (*ndarray*): shape (L, f + 1), the last column holds the per-label biases.
    '''
    B: np.ndarray

    def __post_init__(self):
        self.B = _tensor(self.B)
        if self.B.ndim != 2 or self.B.shape[1] < 1:
            raise DimensionError("B must be L x (f + 1)", self.B.shape)

    @property
    def n_labels(self):
        return self.B.shape[0]

    @property
    def feature_dim(self):
        return self.B.shape[1] - 1

    def named_tensors(self):
        return {"B": self.B}


@dataclass
class GlobalEnergyParams:
    '''
    Label-only global energy c2' g(C1 ybar + c1_bias), with an optional second layer g(C2 h + C2_bias).

    Args:
        - **C1** (*ndarray*): m x L measurement matrix.
        - **c1_bias** (*ndarray*): m affine offsets of the measurements.
        - **c2** (*ndarray*): Output weights, the width of the last hidden layer.
        - **g_glob** (*Nonlinearity*): Non-linearity of the hidden layers.
        - **C2**, **C2_bias** (*ndarray*): Second hidden layer (depth 2 only).
    '''
    C1: np.ndarray
    c1_bias: np.ndarray
    c2: np.ndarray
    g_glob: Nonlinearity = Nonlinearity.SOFTPLUS
    C2: Optional[np.ndarray] = None
    C2_bias: Optional[np.ndarray] = None

    def __post_init__(self):
        self.g_glob = Nonlinearity.parse(self.g_glob)
        self.C1, self.c1_bias, self.c2 = _tensor(self.C1), _tensor(self.c1_bias), _tensor(self.c2)
        if self.C1.ndim != 2 or self.C1.shape[0] < 1 or self.c1_bias.shape != (self.C1.shape[0],):
            raise DimensionError("C1 must be m x L with m >= 1 and c1_bias of length m", self.C1.shape, self.c1_bias.shape)
        width = self.C1.shape[0]
        if (self.C2 is None) != (self.C2_bias is None):
            raise DimensionError("C2 and C2_bias go together")
        if self.C2 is not None:
            self.C2, self.C2_bias = _tensor(self.C2), _tensor(self.C2_bias)
            if self.C2.ndim != 2 or self.C2.shape[1] != width or self.C2_bias.shape != (self.C2.shape[0],):
                raise DimensionError("C2 must take the m measurements", self.C2.shape, self.C2_bias.shape)
            width = self.C2.shape[0]
        if self.c2.shape != (width,):
            raise DimensionError("c2 must match the last hidden layer", self.c2.shape, width)

    @property
    def depth(self):
        return 1 if self.C2 is None else 2

    @property
    def n_labels(self):
        return self.C1.shape[1]

    def named_tensors(self):
        tensors = {"C1": self.C1, "c1_bias": self.c1_bias, "c2": self.c2}
        if self.C2 is not None:
            tensors["C2"] = self.C2
            tensors["C2_bias"] = self.C2_bias
        return tensors


@dataclass
class CondEnergyParams:
    '''
    Global energy conditioned on x: d2' g(D1 [ybar; F(x)] + d1_bias).

    Args:
        - **D1** (*ndarray*): m x (L + f).
        - **d1_bias** (*ndarray*): length m.
        - **d2** (*ndarray*): length m.
        - **g_cond** (*Nonlinearity*)
        - **n_labels** (*int*): L, the number of leading columns of D1 that read ybar.
    '''
    D1: np.ndarray
    d1_bias: np.ndarray
    d2: np.ndarray
    n_labels: int
    g_cond: Nonlinearity = Nonlinearity.SOFTPLUS

    def __post_init__(self):
        self.g_cond = Nonlinearity.parse(self.g_cond)
        self.D1, self.d1_bias, self.d2 = _tensor(self.D1), _tensor(self.d1_bias), _tensor(self.d2)
        m = self.D1.shape[0]
        if self.D1.ndim != 2 or self.D1.shape[1] <= self.n_labels or self.d1_bias.shape != (m,) or self.d2.shape != (m,):
            raise DimensionError("D1 must be m x (L + f) with d1_bias and d2 of length m",
                                 self.D1.shape, self.d1_bias.shape, self.d2.shape)

    @property
    def feature_dim(self):
        return self.D1.shape[1] - self.n_labels

    def named_tensors(self):
        return {"D1": self.D1, "d1_bias": self.d1_bias, "d2": self.d2}


@dataclass
class CrfEnergyParams:
    '''
    Pairwise CRF energy ybar' S1 ybar + s' ybar. The diagonal of S1 is zeroed on construction: a diagonal term is linear
    in a binary label and belongs in s.

    Args:
        - **S1** (*ndarray*): L x L.
        - **s** (*ndarray*): length L.
    '''
    S1: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        self.S1, self.s = _tensor(self.S1), _tensor(self.s)
        L = self.s.shape[0]
        if self.S1.shape != (L, L):
            raise DimensionError("S1 must be square and match s", self.S1.shape, self.s.shape)
        np.fill_diagonal(self.S1, 0.0)

    @property
    def n_labels(self):
        return self.s.shape[0]

    def named_tensors(self):
        return {"S1": self.S1, "s": self.s}


GlobalParams = Union[GlobalEnergyParams, CondEnergyParams, CrfEnergyParams]


@dataclass
class SpenParams:
    '''
    All parameters of a SPEN: the feature network, the local energy and an optional global energy.

    Args:
        - **feat** (*FeatureNetParams*)
        - **local** (*LocalEnergyParams*)
        - **global_energy** (*GlobalEnergyParams*, *CondEnergyParams*, *CrfEnergyParams* or *None*)
    '''
    feat: FeatureNetParams
    local: LocalEnergyParams
    global_energy: Optional[GlobalParams] = None

    def __post_init__(self):
        if self.local.feature_dim != self.feat.output_dim:
            raise DimensionError("local energy must read the feature network output",
                                 self.local.B.shape, self.feat.output_dim)
        g = self.global_energy
        if g is not None and g.n_labels != self.n_labels:
            raise DimensionError("global energy must use the same number of labels", g.n_labels, self.n_labels)
        if isinstance(g, CondEnergyParams) and g.feature_dim != self.feat.output_dim:
            raise DimensionError("conditioned energy must read the feature network output",
                                 g.D1.shape, self.feat.output_dim)

    @property
    def global_kind(self):
        if isinstance(self.global_energy, GlobalEnergyParams):
            return GlobalKind.LABEL_ONLY
        if isinstance(self.global_energy, CondEnergyParams):
            return GlobalKind.CONDITIONED
        if isinstance(self.global_energy, CrfEnergyParams):
            return GlobalKind.CRF
        return GlobalKind.NONE

    @property
    def n_labels(self):
        return self.local.n_labels

    @property
    def input_dim(self):
        return self.feat.input_dim

    def named_tensors(self):
        '''
        Returns every parameter tensor keyed by a dotted name (``feat.A1``, ``local.B``, ``global.C1`` ...). The arrays
        are the ones stored in this object, so writing into them updates the parameters.
        '''
        tensors = {}
        parts = [("feat", self.feat), ("local", self.local), ("global", self.global_energy)]
        for prefix, part in parts:
            if part is None:
                continue
            for name, value in part.named_tensors().items():
                tensors[prefix + "." + name] = value
        return tensors

    def copy(self):
        return copy.deepcopy(self)

    def zeros_like(self):
        """A parameter-shaped container filled with zeros, used to hold gradients."""
        zeros = self.copy()
        for value in zeros.named_tensors().values():
            value[...] = 0.0
        return zeros


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------

def _rows(a):
    a = np.asarray(a, dtype=DTYPE)
    if a.ndim == 1:
        return a[None, :], True
    return a, False


def _output(values, single):
    return float(values[0]) if single else values


def _check_labels(ybar, L):
    if ybar.shape[-1] != L:
        raise DimensionError("relaxed labels must have length L", ybar.shape, L)


def _check_features(F_x, f):
    if F_x.shape[-1] != f:
        raise DimensionError("feature vector must have length f", F_x.shape, f)


def _augment(F_x):
    return np.concatenate([F_x, np.ones(F_x.shape[:-1] + (1,), dtype=DTYPE)], axis=-1)


def _feature_forward_cached(p, X):
    if X.shape[-1] != p.input_dim:
        raise DimensionError("x must have length d", X.shape, p.input_dim)
    h = X
    pre_activations, activations = [], [X]
    last = len(p.weights) - 1
    for k, (W, b) in enumerate(zip(p.weights, p.biases)):
        z = affine(W, b, h)
        h = apply_nonlinearity(p.g_out if k == last else p.g_hidden, z)
        pre_activations.append(z)
        activations.append(h)
    return h, (pre_activations, activations)


def feature_forward(p, x):
    '''
    Evaluates the feature network F(x) = g(A2 g(A1 x)). The result does not depend on the labels, so callers compute it
    once per example and reuse it for every step of prediction.

    Args:
        - **p** (*FeatureNetParams*): The feature network.
        - **x** (*ndarray*): shape (d,) or (n, d).

    Returns:
        - **F_x** (*ndarray*): shape (f,) or (n, f).
    '''
    F_x, _ = _feature_forward_cached(p, np.asarray(x, dtype=DTYPE))
    return F_x


def local_scores(p, F_x):
    '''
    The per-label scores b_i' [F(x); 1]. A negative score favours turning label i on, since energy is minimised.

    Args:
        - **p** (*LocalEnergyParams*)
        - **F_x** (*ndarray*): shape (f,) or (n, f).

    Returns:
        - **scores** (*ndarray*): shape (L,) or (n, L).
    '''
    F_x = np.asarray(F_x, dtype=DTYPE)
    _check_features(F_x, p.feature_dim)
    return matvec(p.B, _augment(F_x))


def local_energy(p, F_x, ybar):
    '''
    The local energy, the sum over labels of ybar_i * (b_i' F(x)).

    Args:
        - **p** (*LocalEnergyParams*)
        - **F_x** (*ndarray*): The feature vector(s).
        - **ybar** (*ndarray*): The relaxed labels, shape (L,) or (n, L).

    Returns:
        - **energy** (*float* or *ndarray*)
    '''
    ybar = np.asarray(ybar, dtype=DTYPE)
    _check_labels(ybar, p.n_labels)
    return _energy_sum(ybar * local_scores(p, F_x))


def _energy_sum(terms):
    total = np.sum(terms, axis=-1)
    return float(total) if np.ndim(total) == 0 else total


def _label_only_forward(p, Y):
    z1 = affine(p.C1, p.c1_bias, Y)
    h1 = apply_nonlinearity(p.g_glob, z1)
    z2 = None
    h = h1
    if p.C2 is not None:
        z2 = affine(p.C2, p.C2_bias, h1)
        h = apply_nonlinearity(p.g_glob, z2)
    return h @ p.c2, (z1, h1, z2, h)


def global_energy(p, ybar):
    '''
    The label-only global energy c2' g(C1 ybar + c1_bias), with the extra hidden layer when the network has depth 2.

    Args:
        - **p** (*GlobalEnergyParams*)
        - **ybar** (*ndarray*): shape (L,) or (n, L).

    Returns:
        - **energy** (*float* or *ndarray*)
    '''
    Y, single = _rows(ybar)
    _check_labels(Y, p.n_labels)
    energy, _ = _label_only_forward(p, Y)
    return _output(energy, single)


def _cond_forward(p, F_x, Y):
    u = np.concatenate([Y, F_x], axis=-1)
    z = affine(p.D1, p.d1_bias, u)
    h = apply_nonlinearity(p.g_cond, z)
    return h @ p.d2, (u, z, h)


def cond_energy(p, F_x, ybar):
    '''
    The global energy conditioned on the features, d2' g(D1 [ybar; F(x)] + d1_bias).

    Args:
        - **p** (*CondEnergyParams*)
        - **F_x** (*ndarray*): shape (f,) or (n, f).
        - **ybar** (*ndarray*): shape (L,) or (n, L).

    Returns:
        - **energy** (*float* or *ndarray*)
    '''
    Y, single = _rows(ybar)
    F_x, _ = _rows(F_x)
    _check_labels(Y, p.n_labels)
    _check_features(F_x, p.feature_dim)
    energy, _ = _cond_forward(p, F_x, Y)
    return _output(energy, single)


def crf_energy(p, ybar):
    '''
    The pairwise CRF energy ybar' S1 ybar + s' ybar.

    Args:
        - **p** (*CrfEnergyParams*)
        - **ybar** (*ndarray*): shape (L,) or (n, L).

    Returns:
        - **energy** (*float* or *ndarray*)
    '''
    ybar = np.asarray(ybar, dtype=DTYPE)
    _check_labels(ybar, p.n_labels)
    return _energy_sum(ybar * matvec(p.S1, ybar) + ybar * p.s)


def global_term(p, F_x, ybar):
    """The configured global term of *p*; zero when the SPEN has none."""
    kind = p.global_kind
    if kind is GlobalKind.LABEL_ONLY:
        return global_energy(p.global_energy, ybar)
    if kind is GlobalKind.CONDITIONED:
        return cond_energy(p.global_energy, F_x, ybar)
    if kind is GlobalKind.CRF:
        return crf_energy(p.global_energy, ybar)
    ybar = np.asarray(ybar, dtype=DTYPE)
    return _energy_sum(np.zeros_like(ybar))


def total_energy(p, F_x, ybar):
    '''
    The SPEN energy E_x(ybar): local energy plus the configured global term.

    Args:
        - **p** (*SpenParams*)
        - **F_x** (*ndarray*): Cached feature vector(s) F(x).
        - **ybar** (*ndarray*): Relaxed labels, shape (L,) or (n, L).

    Returns:
        - **energy** (*float* or *ndarray*)
    '''
    return local_energy(p.local, F_x, ybar) + global_term(p, F_x, ybar)


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------

def _label_only_backward(p, Y, cache):
    z1, h1, z2, h = cache
    # E = sum_j c2_j h_j, so dE/dh is c2 on every row
    grads = {"c2": h.sum(axis=0)}
    dh = np.broadcast_to(p.c2, h.shape)
    if p.C2 is not None:
        dz2 = dh * nonlinearity_grad(p.g_glob, z2)
        grads["C2"] = dz2.T @ h1
        grads["C2_bias"] = dz2.sum(axis=0)
        dh = dz2 @ p.C2
    # per-example gradients are summed over the batch
    dz1 = dh * nonlinearity_grad(p.g_glob, z1)
    grads["C1"] = dz1.T @ Y
    grads["c1_bias"] = dz1.sum(axis=0)
    return dz1 @ p.C1, grads


def _cond_backward(p, cache):
    u, z, h = cache
    # u = [y, F(x)], split the input gradient back into its two halves
    dz = p.d2 * nonlinearity_grad(p.g_cond, z)
    grads = {"D1": dz.T @ u, "d1_bias": dz.sum(axis=0), "d2": h.sum(axis=0)}
    du = dz @ p.D1
    L = p.n_labels
    return du[:, :L], du[:, L:], grads


def _crf_grad_y(p, Y):
    # S1 has a zero diagonal, so S1 + S1' is the full pairwise gradient
    return matvec(p.S1 + p.S1.T, Y) + p.s


def energy_grad_y(p, F_x, ybar):
    '''
    The gradient of the total energy with respect to the relaxed labels. The feature vector is treated as a constant
    (no back-propagation into the feature network).

    Args:
        - **p** (*SpenParams*)
        - **F_x** (*ndarray*): Cached feature vector(s).
        - **ybar** (*ndarray*): shape (L,) or (n, L).

    Returns:
        - **gradient** (*ndarray*): Same shape as *ybar*.
    '''
    Y, single = _rows(ybar)
    F_x, _ = _rows(F_x)
    _check_labels(Y, p.n_labels)
    # the local energy is linear in y, its gradient is the score vector
    grad = np.broadcast_to(local_scores(p.local, F_x), Y.shape).copy()
    kind = p.global_kind
    if kind is GlobalKind.LABEL_ONLY:
        _, cache = _label_only_forward(p.global_energy, Y)
        dY, _ = _label_only_backward(p.global_energy, Y, cache)
        grad += dY
    elif kind is GlobalKind.CONDITIONED:
        _, cache = _cond_forward(p.global_energy, F_x, Y)
        dY, _, _ = _cond_backward(p.global_energy, cache)
        grad += dY
    elif kind is GlobalKind.CRF:
        grad += _crf_grad_y(p.global_energy, Y)
    return grad[0] if single else grad


def _feature_backward(p, cache, dF):
    pre_activations, activations = cache
    grads = {}
    dh = dF
    last = len(p.weights) - 1
    # activations[k] is the input of layer k, activations[0] is x
    for k in range(last, -1, -1):
        g = p.g_out if k == last else p.g_hidden
        dz = dh * nonlinearity_grad(g, pre_activations[k])
        grads["A%d" % (k + 1)] = dz.T @ activations[k]
        grads["a%d_bias" % (k + 1)] = dz.sum(axis=0)
        dh = dz @ p.weights[k]
    return grads


def _local_backward(feat, local, F_x, cache, d_scores, dF_extra=None):
    Faug = _augment(F_x)
    grads = {"local.B": d_scores.T @ Faug}
    # drop the bias column of the augmented features
    dF = (d_scores @ local.B)[:, :-1]
    if dF_extra is not None:
        dF = dF + dF_extra
    for name, value in _feature_backward(feat, cache, dF).items():
        grads["feat." + name] = value
    return grads


def scores_grad_params(feat, local, x, d_scores):
    '''
    Back-propagates a weighting of the local scores into the feature network and the local energy: returns the gradient
    of sum_n sum_i d_scores[n, i] * score_i(x_n). This is the backward pass shared by local pre-training and the
    mean-field baseline.

    Args:
        - **feat** (*FeatureNetParams*)
        - **local** (*LocalEnergyParams*)
        - **x** (*ndarray*): shape (n, d).
        - **d_scores** (*ndarray*): shape (n, L).

    Returns:
        - **grads** (*dict*): Gradients keyed like ``SpenParams.named_tensors`` (``feat.*`` and ``local.B``).
    '''
    X, _ = _rows(x)
    F_x, cache = _feature_forward_cached(feat, X)
    return _local_backward(feat, local, F_x, cache, np.atleast_2d(d_scores))


def _to_params(p, grads):
    out = p.zeros_like()
    tensors = out.named_tensors()
    for name, value in grads.items():
        tensors[name][...] = value
    return out


def energy_grad_params(p, x, ybar):
    '''
    The gradient of the total energy with respect to every parameter tensor, back-propagating through the feature
    network. For a batch, the gradients of the per-example energies are summed.

    Args:
        - **p** (*SpenParams*)
        - **x** (*ndarray*): Raw input(s), shape (d,) or (n, d).
        - **ybar** (*ndarray*): Relaxed labels, shape (L,) or (n, L).

    Returns:
        - **gradient** (*SpenParams*): Same structure as *p*, holding gradients.
    '''
    X, _ = _rows(x)
    Y, _ = _rows(ybar)
    _check_labels(Y, p.n_labels)
    if X.shape[0] != Y.shape[0]:
        raise DimensionError("need one label vector per input", X.shape, Y.shape)
    F_x, cache = _feature_forward_cached(p.feat, X)
    grads = {}
    dF_extra = None
    kind = p.global_kind
    if kind is GlobalKind.LABEL_ONLY:
        _, gcache = _label_only_forward(p.global_energy, Y)
        _, global_grads = _label_only_backward(p.global_energy, Y, gcache)
    elif kind is GlobalKind.CONDITIONED:
        _, gcache = _cond_forward(p.global_energy, F_x, Y)
        _, dF_extra, global_grads = _cond_backward(p.global_energy, gcache)
    elif kind is GlobalKind.CRF:
        dS1 = Y.T @ Y
        np.fill_diagonal(dS1, 0.0)
        # the diagonal stays fixed at zero
        global_grads = {"S1": dS1, "s": Y.sum(axis=0)}
    else:
        global_grads = {}
    for name, value in global_grads.items():
        grads["global." + name] = value
    # dE_local/dscores is y itself
    grads.update(_local_backward(p.feat, p.local, F_x, cache, Y, dF_extra))
    return _to_params(p, grads)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def _glorot(rng, rows, cols, scale=1.0):
    return scale * rng.standard_normal((rows, cols)) / np.sqrt(max(cols, 1))


def init_feature_net(input_dim, hidden_sizes=(), g_hidden="relu", g_out="relu", rng=None):
    '''
    Random feature network with layers of the given sizes (none gives linear features F(x) = x).

    Args:
        - **input_dim** (*int*): d.
        - **hidden_sizes** (*sequence of int*): Output width of each layer, e.g. (150, 150).
        - **g_hidden**, **g_out** (*str*): Non-linearities.
        - **rng** (*numpy.random.Generator*)

    Returns:
        - **params** (*FeatureNetParams*)
    '''
    rng = rng if rng is not None else np.random.default_rng(0)
    weights, biases = [], []
    fan_in = input_dim
    for width in hidden_sizes:
        weights.append(_glorot(rng, width, fan_in))
        biases.append(np.zeros(width))
        fan_in = width
    return FeatureNetParams(input_dim, weights, biases, g_hidden, g_out)


def init_spen_params(input_dim, n_labels, hidden_sizes=(), g_hidden="relu", g_out="relu",
                     global_kind=GlobalKind.LABEL_ONLY, n_measurements=15, global_depth=1, global_hidden=None,
                     g_global="softplus", seed=0):
    '''
    Builds a randomly initialised SPEN, deterministic given *seed*.

    Args:
        - **input_dim** (*int*): d.
        - **n_labels** (*int*): L.
        - **hidden_sizes** (*sequence of int*): Feature network layer widths; empty for linear features.
        - **g_hidden**, **g_out** (*str*): Feature network non-linearities.
        - **global_kind** (*GlobalKind* or *str*): ``label_only``, ``conditioned``, ``crf`` or ``none``.
        - **n_measurements** (*int*): m, the number of rows of C1 (or D1).
        - **global_depth** (*int*): 1 or 2.
        - **global_hidden** (*int*): Width of the second global layer (defaults to m).
        - **g_global** (*str*): Non-linearity of the global network.
        - **seed** (*int*)

    Returns:
        - **params** (*SpenParams*)
    '''
    rng = np.random.default_rng(seed)
    feat = init_feature_net(input_dim, hidden_sizes, g_hidden, g_out, rng)
    f = feat.output_dim
    local = LocalEnergyParams(np.hstack([_glorot(rng, n_labels, f, 0.1), np.zeros((n_labels, 1))]))
    kind = GlobalKind(global_kind)
    if global_depth not in (1, 2):
        raise ValueError("global_depth must be 1 or 2, got %r" % global_depth)
    m = n_measurements
    global_params = None
    if kind is GlobalKind.LABEL_ONLY:
        C2 = C2_bias = None
        width = m
        if global_depth == 2:
            width = global_hidden or m
            C2, C2_bias = _glorot(rng, width, m), np.zeros(width)
        global_params = GlobalEnergyParams(_glorot(rng, m, n_labels), 0.1 * rng.standard_normal(m),
                                           rng.standard_normal(width) / np.sqrt(width), g_global, C2, C2_bias)
    elif kind is GlobalKind.CONDITIONED:
        global_params = CondEnergyParams(_glorot(rng, m, n_labels + f), 0.1 * rng.standard_normal(m),
                                         rng.standard_normal(m) / np.sqrt(m), n_labels, g_global)
    elif kind is GlobalKind.CRF:
        global_params = CrfEnergyParams(np.zeros((n_labels, n_labels)), np.zeros(n_labels))
    logger.debug("initialised SPEN d=%d f=%d L=%d global=%s", input_dim, f, n_labels, kind.value)
    return SpenParams(feat, local, global_params)
