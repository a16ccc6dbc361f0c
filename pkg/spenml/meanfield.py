# -*- coding: utf-8 -*-
"""
This module contains the deep mean-field (DMF) baseline: mean-field inference in a fully connected pairwise CRF over the
labels, unrolled for a fixed number of iterations and trained end to end by maximum likelihood.

Vectorised mean-field, starting from ybar = [0.5]^L::

    D <- diag(A)
    for t = 1..m:
        E    <- A ybar - D + C + u(x)
        ybar <- sigmoid(E)

u(x) = -score(x) are the unary log-odds of a pretrained local classifier (the MLP), so scores are negated energies and a
positive entry of A raises the chance that two labels are on together. A = (W + W')/2 is kept symmetric and does not
depend on x, giving L^2 pairwise parameters.
"""

import copy
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from tqdm import tqdm

from .energy import SpenParams, feature_forward, local_scores, scores_grad_params
from .errors import DimensionError, NumericError
from .optim import MomentumSGD, epoch_learning_rate, iterate_minibatches

logger = logging.getLogger(__name__)


@dataclass
class DmfParams:
    '''
    Parameters of the DMF baseline.

    Args:
        - **unary** (*SpenParams*): The pretrained local scorer (feature network plus local energy, no global energy).
        - **W** (*ndarray*): L x L, the pairwise weights are A = (W + W') / 2.
        - **C** (*ndarray*): length L unary adjustments.
        - **iters** (*int*): m, the number of unrolled mean-field iterations (default 5).
        - **clamp_unaries** (*bool*): Keep the unary scorer fixed during training (default True).
    '''
    unary: SpenParams
    W: np.ndarray
    C: np.ndarray
    iters: int = 5
    clamp_unaries: bool = True

    def __post_init__(self):
        self.W = np.array(self.W, dtype=float)
        self.C = np.array(self.C, dtype=float)
        L = self.unary.n_labels
        if self.W.shape != (L, L) or self.C.shape != (L,):
            raise DimensionError("W must be L x L and C of length L", self.W.shape, self.C.shape, L)
        if self.iters < 1:
            raise ValueError("iters must be >= 1, got %r" % self.iters)

    @property
    def A(self):
        return 0.5 * (self.W + self.W.T)

    @property
    def n_labels(self):
        return self.unary.n_labels

    @property
    def input_dim(self):
        return self.unary.input_dim

    def named_tensors(self):
        tensors = {"unary." + name: value for name, value in self.unary.named_tensors().items()}
        tensors["W"] = self.W
        tensors["C"] = self.C
        return tensors

    def copy(self):
        return copy.deepcopy(self)


def init_dmf_params(unary, iters=5, clamp_unaries=True):
    """DMF on top of a trained local scorer, with no pairwise coupling yet."""
    L = unary.n_labels
    return DmfParams(unary.copy(), np.zeros((L, L)), np.zeros(L), iters, clamp_unaries)


def unary_logits(p, X):
    """u(x) = -score(x), the log-odds the local scorer assigns to each label."""
    return -local_scores(p.unary.local, feature_forward(p.unary.feat, X))


def _unroll(p, X):
    A = p.A
    # E = A y - diag(A) + C + u
    D = np.diag(A)
    # u = -scores, so a low local energy for y_i = 1 raises its logit
    U = unary_logits(p, X) + p.C
    Y = np.full(U.shape, 0.5)
    iterates, potentials = [Y], []
    for _ in range(p.iters):
        # parallel update of every label from the previous marginals
        E = Y @ A.T - D + U
        Y = expit(E)
        potentials.append(E)
        iterates.append(Y)
    return iterates, potentials


def dmf_forward(p, x):
    '''
    Runs the unrolled mean-field iterations and returns the label marginals.

    Args:
        - **p** (*DmfParams*)
        - **x** (*ndarray*): shape (d,) or (n, d).

    Returns:
        - **ybar** (*ndarray*): Marginals in (0, 1), shape (L,) or (n, L).
    '''
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    iterates, _ = _unroll(p, np.atleast_2d(x))
    return iterates[-1][0] if single else iterates[-1]


def dmf_loss(p, X, Y_gold):
    """Mean over examples of the per-label logistic loss of the DMF marginals."""
    _, potentials = _unroll(p, np.atleast_2d(X))
    E = potentials[-1]
    G = np.atleast_2d(np.asarray(Y_gold, dtype=float))
    return float(np.mean(np.sum(np.logaddexp(0.0, E) - G * E, axis=1)))


def dmf_loss_grad(p, X, Y_gold):
    '''
    The training loss and its gradient, back-propagated through all unrolled iterations.

    Args:
        - **p** (*DmfParams*)
        - **X** (*ndarray*): shape (n, d).
        - **Y_gold** (*ndarray*): shape (n, L).

    Returns:
        - **loss** (*float*)
        - **grads** (*dict*): Keyed like ``DmfParams.named_tensors``; ``unary.*`` entries only when the unaries are
          not clamped.
    '''
    X = np.atleast_2d(np.asarray(X, dtype=float))
    G = np.atleast_2d(np.asarray(Y_gold, dtype=float))
    if G.shape != (X.shape[0], p.n_labels):
        raise DimensionError("need one gold label vector per input", X.shape, G.shape)
    n = X.shape[0]
    A = p.A
    iterates, potentials = _unroll(p, X)
    E = potentials[-1]
    loss = float(np.mean(np.sum(np.logaddexp(0.0, E) - G * E, axis=1)))

    # logistic loss on the last potentials: dL/dE = sigmoid(E) - y
    dA = np.zeros_like(A)
    dU = np.zeros_like(E)
    dE = (iterates[-1] - G) / n
    for t in range(p.iters, 0, -1):
        # through the sigmoid of every earlier iteration
        if t < p.iters:
            Y_t = iterates[t]
            dE = dY * Y_t * (1.0 - Y_t)
        dA += dE.T @ iterates[t - 1]
        # the diagonal enters twice: once in A y and once in -diag(A)
        dA[np.diag_indices_from(dA)] -= dE.sum(axis=0)
        dU += dE
        dY = dE @ A
    # A = (W + W')/2
    grads = {"W": 0.5 * (dA + dA.T), "C": dU.sum(axis=0)}
    if not p.clamp_unaries:
        for name, value in scores_grad_params(p.unary.feat, p.unary.local, X, -dU).items():
            grads["unary." + name] = value
    return loss, grads


def dmf_train(p, data, cfg, dev=None, report=None, show_progress=True):
    '''
    End-to-end maximum likelihood training of the pairwise weights (and of the unaries when they are not clamped).
    Runs ``cfg.epochs_global_only`` epochs of momentum SGD. With dev data and ``cfg.select_best`` the epoch of lowest dev
    loss is returned.

    Args:
        - **p** (*DmfParams*): Starting parameters; the unary scorer should already be pretrained.
        - **data** (*Dataset*): Training data.
        - **cfg** (*TrainConfig*)
        - **dev** (*Dataset*): Optional development data; its loss is recorded per epoch.
        - **report** (*TrainingReport*): Optional report receiving one record per epoch.

    Returns:
        - **params** (*DmfParams*): The trained copy.
    '''
    p = p.copy()
    tensors = {"W": p.W, "C": p.C}
    l2 = {"W": cfg.l2_global, "C": cfg.l2_global if cfg.l2_biases else 0.0}
    if not p.clamp_unaries:
        for name, value in p.unary.named_tensors().items():
            tensors["unary." + name] = value
            l2["unary." + name] = cfg.l2_local if (cfg.l2_biases or not name.endswith("_bias")) else 0.0
    optimizer = MomentumSGD(tensors, cfg.lr, cfg.momentum, l2)
    rng = np.random.default_rng(cfg.seed)
    epochs = range(cfg.epochs_global_only)
    best_loss, best = np.inf, None
    for epoch in tqdm(epochs, desc="dmf", disable=not show_progress):
        optimizer.lr = epoch_learning_rate(cfg.lr, cfg.lr_decay, epoch)
        losses = []
        for idx in iterate_minibatches(len(data), cfg.batch_size, rng):
            loss, grads = dmf_loss_grad(p, data.X[idx], data.Y[idx])
            if not np.isfinite(loss):
                raise NumericError("training loss is not finite", stage="dmf", epoch=epoch)
            losses.append(loss * len(idx))
            optimizer.step(grads)
        mean_loss = float(np.sum(losses) / len(data))
        if not np.isfinite(mean_loss) or not all(np.all(np.isfinite(v)) for v in tensors.values()):
            raise NumericError("training diverged", stage="dmf", epoch=epoch)
        record = {"stage": "dmf", "epoch": epoch, "loss": mean_loss}
        if dev is not None:
            record["dev_loss"] = dmf_loss(p, dev.X, dev.Y)
            if record["dev_loss"] < best_loss:
                best_loss, best = record["dev_loss"], (epoch, p.copy())
        logger.info("dmf epoch %d: %s", epoch, record)
        if report is not None:
            report.add(record)
    if cfg.select_best and best is not None:
        logger.info("dmf: keeping epoch %d (dev loss %.4f)", best[0], best_loss)
        if report is not None:
            report.selected = ("dmf", best[0])
        return best[1]
    return p
