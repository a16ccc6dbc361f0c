# -*- coding: utf-8 -*-
"""
This module has the evaluation measures for multi-label predictions.

Measures:
    - ``Example-averaged (macro) F1``: the mean over examples of 2 |pred & gold| / (|pred| + |gold|). An example with
      empty predicted and gold label sets scores 1; exactly one empty set scores 0.
    - ``Hamming error``: the percentage of wrongly predicted labels (100 x wrong labels / L, averaged over examples).
    - ``Search error rate``: the fraction of examples whose predicted energy exceeds the energy of the ground truth,
      i.e. where prediction failed to find a point the model itself prefers.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from sklearn.metrics import f1_score, hamming_loss

from .energy import feature_forward, total_energy
from .errors import DimensionError
from .inference import round_prediction

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD_GRID = tuple(np.round(np.linspace(0.05, 0.95, 19), 2))


@dataclass
class EvalReport:
    '''
    Evaluation summary.

    Args:
        - **macro_f1** (*float*): in [0, 1].
        - **hamming_error** (*float*): Percentage of wrong labels.
        - **threshold_used** (*float*): Rounding threshold.
        - **n_examples** (*int*)
        - **search_error_rate** (*float*): in [0, 1], when counted.
    '''
    macro_f1: float
    hamming_error: float
    threshold_used: float
    n_examples: int = 0
    search_error_rate: Optional[float] = None

    def to_text(self):
        """Flat ``key=value`` lines."""
        return "".join("%s=%s\n" % (k, v) for k, v in asdict(self).items() if v is not None)

    @classmethod
    def from_text(cls, text):
        values = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
        return cls(float(values["macro_f1"]), float(values["hamming_error"]), float(values["threshold_used"]),
                   int(values.get("n_examples", 0)),
                   float(values["search_error_rate"]) if "search_error_rate" in values else None)


def _binary(a):
    return np.asarray(a).astype(bool).astype(np.int8)


def _pair(preds, golds):
    P = np.atleast_2d(_binary(preds))
    G = np.atleast_2d(_binary(golds))
    if P.shape != G.shape:
        raise DimensionError("predictions and gold labels must have the same shape", P.shape, G.shape)
    return P, G


def _samples_f1(P, G):
    # a single column reads as a binary target to scikit-learn; an all-zero column changes no per-example F1
    if P.shape[1] < 2:
        pad = np.zeros((P.shape[0], 1), dtype=np.int8)
        P, G = np.hstack([P, pad]), np.hstack([G, pad])
    return float(f1_score(G, P, average="samples", zero_division=1.0))


def example_f1(pred, gold):
    '''
    F1 between a predicted and a gold label set.

    Args:
        - **pred** (*ndarray*): Binary labels.
        - **gold** (*ndarray*): Binary labels, same length.

    Returns:
        - **f1** (*float*)
    '''
    pred, gold = np.asarray(pred), np.asarray(gold)
    if pred.shape != gold.shape or pred.ndim != 1:
        raise DimensionError("example_f1 needs two label vectors of equal length", pred.shape, gold.shape)
    return _samples_f1(_binary(pred)[None, :], _binary(gold)[None, :])


def macro_f1(preds, golds):
    '''
    Example-averaged F1: the unweighted mean of ``example_f1`` over examples.

    Args:
        - **preds** (*ndarray*): shape (n, L).
        - **golds** (*ndarray*): shape (n, L).

    Returns:
        - **f1** (*float*)
    '''
    P, G = _pair(preds, golds)
    if P.shape[0] == 0:
        raise ValueError("macro_f1 of an empty sequence")
    return _samples_f1(P, G)


def hamming_error(preds, golds):
    """Percentage of disagreeing labels, averaged over examples (100 x mistakes / L)."""
    P, G = _pair(preds, golds)
    if P.size == 0:
        raise ValueError("hamming_error of an empty sequence")
    return float(100.0 * hamming_loss(G, P))


def tune_threshold(relaxed_preds, golds, grid=DEFAULT_THRESHOLD_GRID, metric="f1"):
    '''
    Picks the rounding threshold that is best on held-out data. Ties go to the threshold closest to 0.5.

    Args:
        - **relaxed_preds** (*ndarray*): shape (n, L).
        - **golds** (*ndarray*): shape (n, L).
        - **grid** (*sequence of float*): Candidate thresholds in (0, 1).
        - **metric** (*str*): ``f1`` (maximised) or ``hamming`` (minimised).

    Returns:
        - **threshold** (*float*): A member of *grid*.
        - **value** (*float*): The metric at that threshold.
    '''
    grid = list(grid)
    if not grid:
        raise ValueError("empty threshold grid")
    if metric not in ("f1", "hamming"):
        raise ValueError("metric must be 'f1' or 'hamming', got %r" % metric)
    best = None
    for t in sorted(grid, key=lambda t: abs(t - 0.5)):
        rounded = round_prediction(relaxed_preds, t)
        value = macro_f1(rounded, golds) if metric == "f1" else hamming_error(rounded, golds)
        score = value if metric == "f1" else -value
        if best is None or score > best[0]:
            best = (score, t, value)
    logger.debug("tuned threshold %.2f (%s=%.4f)", best[1], metric, best[2])
    return float(best[1]), float(best[2])


def count_search_errors(p, X, golds, predictions, tol=1e-9):
    '''
    Fraction of examples where the energy of the prediction is greater than the energy of the ground truth.

    Args:
        - **p** (*SpenParams*)
        - **X** (*ndarray*): Raw inputs, shape (n, d).
        - **golds** (*ndarray*): Gold labels, shape (n, L).
        - **predictions** (*ndarray*): Relaxed or rounded predictions, shape (n, L).
        - **tol** (*float*): Slack on the energy comparison.

    Returns:
        - **rate** (*float*): in [0, 1].
    '''
    F_x = feature_forward(p.feat, np.atleast_2d(X))
    golds = np.atleast_2d(np.asarray(golds, dtype=float))
    predictions = np.atleast_2d(np.asarray(predictions, dtype=float))
    if golds.shape != predictions.shape:
        raise DimensionError("predictions and gold labels must have the same shape", predictions.shape, golds.shape)
    errors = total_energy(p, F_x, predictions) > total_energy(p, F_x, golds) + tol
    return float(np.mean(errors))


def evaluate(relaxed_preds, golds, threshold):
    """Rounds at *threshold* and returns an ``EvalReport``."""
    rounded = round_prediction(relaxed_preds, threshold)
    return EvalReport(macro_f1(rounded, golds), hamming_error(rounded, golds), float(threshold), len(rounded))
