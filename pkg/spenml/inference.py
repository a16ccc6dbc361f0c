# -*- coding: utf-8 -*-
"""
This module contains gradient-based prediction for SPENs: the energy is minimised over the relaxed labels
ybar in (0,1)^L with entropic mirror descent and momentum.

The mirror step normalises over each coordinate::

    ybar_i <- ybar_i exp(-eta g_i) / (ybar_i exp(-eta g_i) + (1 - ybar_i))

which is a gradient step on the log-odds of ybar_i, so iterates never leave the open hypercube. Momentum is heavy-ball on
the gradient: v <- momentum * v + g, and the step uses eta * v.

An example has converged when the relative change of its objective is below ``rel_obj_tol`` AND the largest change of a
coordinate is below ``abs_iterate_tol``. Examples are predicted in batches sharing one iteration counter; when at least
``batch_converged_fraction`` of a batch has converged the remaining examples are frozen where they are.

Initialisation ``from_local_classifier`` starts at sigmoid(-b_i' F(x)): a negative local score lowers the energy of
turning label i on, so it maps to a probability above 0.5.
"""

import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import List

import numpy as np
from scipy.special import entr, expit, logit, xlogy

from .energy import GlobalKind, energy_grad_y, feature_forward, local_scores, total_energy
from .errors import DimensionError, NumericError

logger = logging.getLogger(__name__)

INIT_EPS = 1e-4  # clipping of the local-classifier initialisation
LOGIT_BOUND = 30.0  # iterates stay within [expit(-30), expit(30)], strictly inside (0, 1)


class InitKind(str, Enum):
    UNIFORM = "uniform"
    FROM_LOCAL_CLASSIFIER = "from_local_classifier"


class Surrogate(str, Enum):
    """Differentiable stand-ins for the Hamming loss used in loss-augmented inference."""

    SQUARED = "squared"
    LOG = "log"


@dataclass
class InferenceConfig:
    '''
    Settings of gradient-based prediction.

    Args:
        - **step_size** (*float*): eta, default 0.1.
        - **momentum** (*float*): default 0.95.
        - **max_iters** (*int*): default 60.
        - **rel_obj_tol** (*float*): Relative objective change tolerance, default 1e-5.
        - **abs_iterate_tol** (*float*): Largest coordinate change tolerance, default 1e-4.
        - **batch_converged_fraction** (*float*): Fraction of a batch that must converge before the rest is frozen.
        - **entropy_temperature** (*float*): tau >= 0 of the test-time entropy term.
        - **init** (*InitKind*): ``uniform`` or ``from_local_classifier``.
        - **batch_size** (*int*): Number of examples predicted together.
    '''
    step_size: float = 0.1
    momentum: float = 0.95
    max_iters: int = 60
    rel_obj_tol: float = 1e-5
    abs_iterate_tol: float = 1e-4
    batch_converged_fraction: float = 1.0
    entropy_temperature: float = 0.0
    init: InitKind = InitKind.UNIFORM
    batch_size: int = 100

    def __post_init__(self):
        self.init = InitKind(self.init)
        if not self.step_size > 0:
            raise ValueError("step_size must be positive, got %r" % self.step_size)
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1), got %r" % self.momentum)
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0, got %r" % self.max_iters)
        if not 0.0 < self.batch_converged_fraction <= 1.0:
            raise ValueError("batch_converged_fraction must be in (0, 1], got %r" % self.batch_converged_fraction)
        if self.entropy_temperature < 0:
            raise ValueError("entropy_temperature must be >= 0, got %r" % self.entropy_temperature)
        if self.rel_obj_tol < 0 or self.abs_iterate_tol < 0:
            raise ValueError("tolerances must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1, got %r" % self.batch_size)


@dataclass
class PredictionTrace:
    '''
    What happened while predicting one example.

    Args:
        - **iterations_used** (*int*): Iterations performed before converging or being frozen.
        - **converged** (*bool*): False when the example hit max_iters or was frozen by the batch policy.
        - **final_energy** (*float*): Energy at the returned point.
        - **objective_history** (*list of float*): Objective before the first step and after every step.
    '''
    iterations_used: int
    converged: bool
    final_energy: float
    objective_history: List[float] = field(default_factory=list)

    def to_record(self, example_id):
        return {"example": example_id, "iterations": self.iterations_used,
                "converged": self.converged, "final_energy": self.final_energy}


def mirror_step(ybar, grad, step_size):
    '''
    One entropic mirror descent step, coordinate by coordinate.

    Args:
        - **ybar** (*ndarray*): Interior point(s), shape (L,) or (n, L).
        - **grad** (*ndarray*): Gradient, same shape.
        - **step_size** (*float*): eta.

    Returns:
        - **ybar** (*ndarray*): The next iterate, strictly inside (0,1).
    '''
    ybar = np.asarray(ybar, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if ybar.shape != grad.shape:
        raise DimensionError("gradient must match the iterate", ybar.shape, grad.shape)
    bad = ~np.isfinite(grad)
    if bad.any():
        coordinate = int(np.argwhere(bad)[0][-1])
        raise NumericError("non-finite gradient", coordinate=coordinate)
    z = np.clip(logit(ybar) - step_size * grad, -LOGIT_BOUND, LOGIT_BOUND)
    return expit(z)


def entropy(ybar):
    """H(ybar) = -sum_i [ybar_i ln ybar_i + (1 - ybar_i) ln(1 - ybar_i)], per row."""
    ybar = np.asarray(ybar, dtype=float)
    return np.sum(entr(ybar) + entr(1.0 - ybar), axis=-1)


def _check_interior(ybar):
    if not np.all((ybar > 0.0) & (ybar < 1.0)):
        raise ValueError("relaxed labels must lie strictly inside (0, 1)")


def entropy_smoothed_grad(p, F_x, ybar, temperature):
    '''
    Gradient of E_x(ybar) - tau H(ybar). The entropy part contributes tau ln(ybar_i / (1 - ybar_i)) per coordinate.

    Args:
        - **p** (*SpenParams*)
        - **F_x** (*ndarray*): Cached features.
        - **ybar** (*ndarray*): Interior point(s).
        - **temperature** (*float*): tau >= 0.

    Returns:
        - **gradient** (*ndarray*)
    '''
    if temperature < 0:
        raise ValueError("temperature must be >= 0, got %r" % temperature)
    ybar = np.asarray(ybar, dtype=float)
    _check_interior(ybar)
    grad = energy_grad_y(p, F_x, ybar)
    if temperature > 0:
        grad = grad + temperature * logit(ybar)
    return grad


def surrogate_loss(surrogate, y_gold, ybar):
    '''
    The surrogate task loss between gold labels and relaxed labels, summed over labels.

    Args:
        - **surrogate** (*Surrogate*): ``squared``: sum (ybar_i - y_i)^2; ``log``: -sum [y_i ln ybar_i + (1 - y_i) ln(1 - ybar_i)].
        - **y_gold** (*ndarray*): Binary labels.
        - **ybar** (*ndarray*): Relaxed labels (interior for ``log``).

    Returns:
        - **loss** (*float* or *ndarray*)
    '''
    surrogate = Surrogate(surrogate)
    y_gold = np.asarray(y_gold, dtype=float)
    ybar = np.asarray(ybar, dtype=float)
    if surrogate is Surrogate.SQUARED:
        values = (ybar - y_gold) ** 2
    else:
        values = -(xlogy(y_gold, ybar) + xlogy(1.0 - y_gold, 1.0 - ybar))
    total = np.sum(values, axis=-1)
    return float(total) if np.ndim(total) == 0 else total


def surrogate_grad(surrogate, y_gold, ybar):
    """Derivative of ``surrogate_loss`` with respect to ybar."""
    surrogate = Surrogate(surrogate)
    y_gold = np.asarray(y_gold, dtype=float)
    ybar = np.asarray(ybar, dtype=float)
    if surrogate is Surrogate.SQUARED:
        return 2.0 * (ybar - y_gold)
    return (1.0 - y_gold) / (1.0 - ybar) - y_gold / ybar


def initial_labels(p, F_x, init):
    '''
    Starting point of prediction.

    Args:
        - **p** (*SpenParams*)
        - **F_x** (*ndarray*): shape (n, f).
        - **init** (*InitKind*): ``uniform`` gives 0.5 everywhere; ``from_local_classifier`` gives sigmoid(-score)
          clipped to [1e-4, 1 - 1e-4].

    Returns:
        - **ybar** (*ndarray*): shape (n, L).
    '''
    F_x = np.atleast_2d(F_x)
    if InitKind(init) is InitKind.UNIFORM:
        return np.full((F_x.shape[0], p.n_labels), 0.5)
    return np.clip(expit(-local_scores(p.local, F_x)), INIT_EPS, 1.0 - INIT_EPS)


def _mirror_descent(objective, gradient, Y0, cfg):
    # objective(Y_rows, idx) -> (k,), gradient(Y_rows, idx) -> (k, L)
    Y = np.array(Y0, dtype=float)
    n = Y.shape[0]
    all_rows = np.arange(n)
    velocity = np.zeros_like(Y)
    active = np.ones(n, dtype=bool)
    converged = np.zeros(n, dtype=bool)
    iterations = np.zeros(n, dtype=int)
    f_prev = objective(Y, all_rows)
    histories = [[float(f)] for f in f_prev]
    for t in range(1, cfg.max_iters + 1):
        rows = np.flatnonzero(active)
        # Heavy-ball: accumulate the gradient into the velocity of the rows still running
        velocity[rows] = cfg.momentum * velocity[rows] + gradient(Y[rows], rows)
        # Multiplicative step in logit space, keeps every coordinate inside (0, 1)
        Y_new = mirror_step(Y[rows], velocity[rows], cfg.step_size)
        _check_interior(Y_new)
        f_new = objective(Y_new, rows)
        if not np.all(np.isfinite(f_new)):
            raise NumericError("non-finite objective during prediction")
        # Termination measures: largest coordinate move and relative objective change
        dy = np.max(np.abs(Y_new - Y[rows]), axis=1)
        rel = np.abs(f_new - f_prev[rows]) / np.maximum(np.abs(f_prev[rows]), 1e-12)
        Y[rows] = Y_new
        f_prev[rows] = f_new
        iterations[rows] = t
        for r, f in zip(rows, f_new):
            histories[r].append(float(f))
        # Both tolerances must hold
        done = (rel < cfg.rel_obj_tol) & (dy < cfg.abs_iterate_tol)
        converged[rows[done]] = True
        active[rows[done]] = False
        if not active.any():
            break
        # Stragglers are frozen once enough of the batch has converged
        if converged.mean() >= cfg.batch_converged_fraction:
            logger.debug("batch policy froze %d examples at iteration %d", int(active.sum()), t)
            break
    return Y, iterations, converged, histories


def _predict_rows(p, F_x, cfg, y_init=None):
    F_x = np.atleast_2d(np.asarray(F_x, dtype=float))
    Y0 = initial_labels(p, F_x, cfg.init) if y_init is None else np.atleast_2d(np.array(y_init, dtype=float))
    if Y0.shape != (F_x.shape[0], p.n_labels):
        raise DimensionError("initial point must be one label vector per example", Y0.shape, F_x.shape)
    tau = cfg.entropy_temperature

    def objective(Yr, rows):
        values = total_energy(p, F_x[rows], Yr)
        if tau > 0:
            values = values - tau * entropy(Yr)
        return values

    def gradient(Yr, rows):
        return entropy_smoothed_grad(p, F_x[rows], Yr, tau)

    Y, iterations, converged, histories = _mirror_descent(objective, gradient, Y0, cfg)
    energies = total_energy(p, F_x, Y)
    traces = [PredictionTrace(int(iterations[i]), bool(converged[i]), float(energies[i]), histories[i])
              for i in range(Y.shape[0])]
    return Y, traces


def predict(p, F_x, cfg, y_init=None):
    '''
    Predicts relaxed labels for one example by minimising E_x(ybar) - tau H(ybar) with mirror descent.

    Args:
        - **p** (*SpenParams*)
        - **F_x** (*ndarray*): Cached features, shape (f,).
        - **cfg** (*InferenceConfig*)
        - **y_init** (*ndarray*): Optional starting point overriding ``cfg.init``.

    Returns:
        - **ybar** (*ndarray*): shape (L,).
        - **trace** (*PredictionTrace*)
    '''
    Y, traces = _predict_rows(p, np.asarray(F_x, dtype=float)[None, :], cfg, y_init)
    return Y[0], traces[0]


def predict_batch(p, examples, cfg, y_init=None):
    '''
    Predicts a batch with a shared iteration counter and the batch termination policy.

    Args:
        - **p** (*SpenParams*)
        - **examples** (*ndarray*): Cached features, shape (n, f), n >= 1.
        - **cfg** (*InferenceConfig*)
        - **y_init** (*ndarray*): Optional starting points, shape (n, L).

    Returns:
        - **results** (*list of (ndarray, PredictionTrace)*)
    '''
    F_x = np.atleast_2d(np.asarray(examples, dtype=float))
    if F_x.shape[0] == 0:
        raise ValueError("predict_batch needs at least one example")
    Y, traces = _predict_rows(p, F_x, cfg, y_init)
    return list(zip(Y, traces))


def local_marginals(p, F_x):
    """sigmoid(-score): the soft output of the local classifier alone (the MLP baseline prediction)."""
    return expit(-local_scores(p.local, F_x))


def relaxed_predictions(p, X, cfg, workers=1):
    '''
    Relaxed predictions for a whole data set, in batches of ``cfg.batch_size``. A SPEN without a global energy is the
    MLP baseline and predicts its local marginals directly.

    Args:
        - **p** (*SpenParams*)
        - **X** (*ndarray*): Raw inputs, shape (n, d).
        - **cfg** (*InferenceConfig*)
        - **workers** (*int*): Number of threads working on batches.

    Returns:
        - **ybar** (*ndarray*): shape (n, L).
        - **traces** (*list of PredictionTrace*): Empty for the MLP baseline.
    '''
    X = np.atleast_2d(np.asarray(X, dtype=float))
    F_x = feature_forward(p.feat, X)
    if p.global_kind is GlobalKind.NONE:
        return local_marginals(p, F_x), []
    chunks = [F_x[i:i + cfg.batch_size] for i in range(0, F_x.shape[0], cfg.batch_size)]

    def run(chunk):
        return _predict_rows(p, chunk, cfg)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(chunk) for chunk in chunks]
    Y = np.vstack([r[0] for r in results]) if results else np.zeros((0, p.n_labels))
    traces = [t for r in results for t in r[1]]
    return Y, traces


def loss_augmented_predict(p, F_x, y_gold, surrogate, cfg, y_init=None):
    '''
    Loss-augmented inference: minimises E_x(ybar) - Delta(y_gold, ybar) with the given surrogate loss and returns the
    unrounded relaxed minimiser. No entropy term is used here.

    Args:
        - **p** (*SpenParams*)
        - **F_x** (*ndarray*): Cached features, shape (f,) or (n, f).
        - **y_gold** (*ndarray*): Gold labels, shape (L,) or (n, L).
        - **surrogate** (*Surrogate*)
        - **cfg** (*InferenceConfig*)
        - **y_init** (*ndarray*): Optional starting point(s).

    Returns:
        - **ybar** (*ndarray*): Same shape as *y_gold*.
    '''
    single = np.ndim(y_gold) == 1
    F_x = np.atleast_2d(np.asarray(F_x, dtype=float))
    G = np.atleast_2d(np.asarray(y_gold, dtype=float))
    if G.shape != (F_x.shape[0], p.n_labels):
        raise DimensionError("need one gold label vector per example", G.shape, F_x.shape)
    surrogate = Surrogate(surrogate)
    Y0 = initial_labels(p, F_x, cfg.init) if y_init is None else np.atleast_2d(np.array(y_init, dtype=float))
    if Y0.shape != G.shape:
        raise DimensionError("initial point must match the gold labels", Y0.shape, G.shape)

    def objective(Yr, rows):
        return total_energy(p, F_x[rows], Yr) - surrogate_loss(surrogate, G[rows], Yr)

    def gradient(Yr, rows):
        return energy_grad_y(p, F_x[rows], Yr) - surrogate_grad(surrogate, G[rows], Yr)

    Y, _, _, _ = _mirror_descent(objective, gradient, Y0, cfg)
    return Y[0] if single else Y


def round_prediction(ybar, threshold):
    '''
    Rounds relaxed labels: y_i = 1 iff ybar_i >= threshold.

    Args:
        - **ybar** (*ndarray*)
        - **threshold** (*float*): in (0, 1).

    Returns:
        - **labels** (*ndarray of int8*)
    '''
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1), got %r" % threshold)
    return (np.asarray(ybar) >= threshold).astype(np.int8)


def brute_force_minimum(p, F_x, max_labels=20, chunk=1 << 14):
    '''
    The exact minimum of the energy over all 2^L binary label vectors. Only sensible for small L; used as an oracle.

    Args:
        - **p** (*SpenParams*)
        - **F_x** (*ndarray*): Cached features of one example, shape (f,).
        - **max_labels** (*int*): Refuses larger label sets.

    Returns:
        - **labels** (*ndarray of int8*): A minimising assignment.
        - **energy** (*float*): Its energy.
    '''
    L = p.n_labels
    if L > max_labels:
        raise ValueError("brute force over 2^%d assignments refused (max_labels=%d)" % (L, max_labels))
    F_x = np.asarray(F_x, dtype=float)
    bits = np.arange(L)
    best_y, best_e = None, np.inf
    for start in range(0, 1 << L, chunk):
        codes = np.arange(start, min(start + chunk, 1 << L))
        Y = ((codes[:, None] >> bits) & 1).astype(float)
        energies = total_energy(p, np.broadcast_to(F_x, (Y.shape[0], F_x.shape[0])), Y)
        i = int(np.argmin(energies))
        if energies[i] < best_e:
            best_e, best_y = float(energies[i]), Y[i].astype(np.int8)
    return best_y, best_e


def write_traces(path, traces, ids=None):
    '''
    Writes prediction traces as line-delimited JSON records (example id, iterations, converged flag, final energy).

    Args:
        - **path** (*str*): Output file.
        - **traces** (*list of PredictionTrace*)
        - **ids** (*sequence*): Example ids; defaults to 0, 1, 2 ...
    '''
    ids = itertools.count() if ids is None else ids
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for example_id, trace in zip(ids, traces):
            f.write(json.dumps(trace.to_record(example_id)) + "\n")


def config_dict(cfg):
    """The configuration as plain values (enums by name)."""
    values = asdict(cfg)
    values["init"] = cfg.init.value
    return values
