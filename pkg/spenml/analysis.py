# -*- coding: utf-8 -*-
"""
This module inspects trained SPENs: what structure the global energy learned, and how fast prediction converges.

Functionality:
    - ``measurement_matrix``: the m x L matrix of label measurements (C1, or the label columns of D1).
    - ``normalized_abs``: absolute values scaled to [0, 1] per row, ready for a heatmap.
    - ``block_alignment_score`` and ``alignment_permutation_test``: how strongly the measurements line up with a known
      block structure of the labels, against a null of random label permutations.
    - ``speed_analysis`` and ``convergence_histogram``: iterations used and F1 as the batch termination policy and the
      convergence tolerances are relaxed.
"""

import csv
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import List

import numpy as np
from tqdm import tqdm

from .energy import GlobalKind
from .errors import DimensionError, SpenError
from .inference import relaxed_predictions, round_prediction
from .metrics import macro_f1

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
DEFAULT_TOLERANCE_MULTIPLIERS = (1.0, 10.0, 100.0, 1000.0)


def measurement_matrix(p):
    '''
    The learned label measurements: rows are hidden units, columns are labels.

    Args:
        - **p** (*SpenParams*)

    Returns:
        - **M** (*ndarray*): shape (m, L).
    '''
    kind = p.global_kind
    if kind is GlobalKind.LABEL_ONLY:
        return p.global_energy.C1.copy()
    if kind is GlobalKind.CONDITIONED:
        return p.global_energy.D1[:, :p.n_labels].copy()
    raise SpenError("a %s model has no measurement matrix" % kind.value)


def normalized_abs(M):
    """|M| divided by the largest absolute entry of its row; all-zero rows stay zero."""
    A = np.abs(np.asarray(M, dtype=float))
    peak = A.max(axis=1, keepdims=True)
    return np.divide(A, peak, out=np.zeros_like(A), where=peak > 0)


def block_alignment_score(M, block_size):
    '''
    For every block of consecutive labels, the best hidden unit's mean normalised weight inside the block minus its mean
    outside; the score is the mean over blocks. Near 0 for unstructured matrices, up to 1 for a unit per block.

    Args:
        - **M** (*ndarray*): Measurement matrix, shape (m, L).
        - **block_size** (*int*): Labels per block; must divide L, with at least two blocks.

    Returns:
        - **score** (*float*)
    '''
    N = normalized_abs(M)
    L = N.shape[1]
    if block_size < 1 or L % block_size or L // block_size < 2:
        raise DimensionError("block_size must split the labels into at least two blocks", L, block_size)
    scores = []
    for start in range(0, L, block_size):
        inside = np.zeros(L, dtype=bool)
        inside[start:start + block_size] = True
        scores.append(np.max(N[:, inside].mean(axis=1) - N[:, ~inside].mean(axis=1)))
    return float(np.mean(scores))


@dataclass
class AlignmentTest:
    '''
    Result of the permutation test.

    Args:
        - **score** (*float*): Alignment of the learned matrix.
        - **null_scores** (*ndarray*): Alignment under random column permutations.
        - **p_value** (*float*): Share of null scores at least as large as *score* (with the +1 correction).
    '''
    score: float
    null_scores: np.ndarray
    p_value: float

    def quantile(self, q):
        return float(np.quantile(self.null_scores, q))


def alignment_permutation_test(M, block_size, n_permutations=1000, seed=0):
    """Compares ``block_alignment_score`` of *M* with its distribution under random label permutations."""
    M = np.asarray(M, dtype=float)
    rng = np.random.default_rng(seed)
    score = block_alignment_score(M, block_size)
    null = np.array([block_alignment_score(M[:, rng.permutation(M.shape[1])], block_size)
                     for _ in range(n_permutations)])
    p_value = (1 + np.sum(null >= score)) / (1 + n_permutations)
    logger.info("block alignment %.3f, null q99 %.3f, p=%.4f", score, np.quantile(null, 0.99), p_value)
    return AlignmentTest(score, null, float(p_value))


def convergence_histogram(traces, max_iters):
    '''
    Number of examples by iterations used.

    Args:
        - **traces** (*list of PredictionTrace*)
        - **max_iters** (*int*)

    Returns:
        - **counts** (*ndarray of int*): counts[k] examples stopped after k iterations, length max_iters + 1.
    '''
    iterations = np.array([t.iterations_used for t in traces], dtype=int)
    return np.bincount(iterations, minlength=max_iters + 1)[:max_iters + 1]


def batch_iterations(traces, batch_size):
    """Mean over batches of the iterations the batch ran, i.e. the largest iteration count among its examples."""
    if not traces:
        return 0.0
    iterations = np.array([t.iterations_used for t in traces])
    return float(np.mean([iterations[i:i + batch_size].max() for i in range(0, len(iterations), batch_size)]))


@dataclass
class SpeedRow:
    sweep: str
    value: float
    iterations: float
    f1: float


@dataclass
class SpeedReport:
    '''
    Sweeps of the batch termination policy.

    Args:
        - **rows** (*list of SpeedRow*): ``fraction`` rows then ``tolerance`` rows.
        - **histogram** (*ndarray*): Convergence histogram of the full-convergence run.
    '''
    rows: List[SpeedRow] = field(default_factory=list)
    histogram: np.ndarray = None

    def sweep(self, name):
        return [r for r in self.rows if r.sweep == name]


def _speed_row(p, data, icfg, threshold, sweep, value, workers):
    relaxed, traces = relaxed_predictions(p, data.X, icfg, workers)
    f1 = macro_f1(round_prediction(relaxed, threshold), data.Y)
    return SpeedRow(sweep, float(value), batch_iterations(traces, icfg.batch_size), f1), traces


def speed_analysis(p, data, icfg, threshold=0.5, fractions=DEFAULT_FRACTIONS,
                   tolerance_multipliers=DEFAULT_TOLERANCE_MULTIPLIERS, workers=1, show_progress=True):
    '''
    Iterations used and F1 as the prediction settings are relaxed. The fraction sweep varies
    ``batch_converged_fraction``; the tolerance sweep multiplies both convergence tolerances at full convergence.

    Args:
        - **p** (*SpenParams*): A model with a global energy.
        - **data** (*Dataset*)
        - **icfg** (*InferenceConfig*): Base settings.
        - **threshold** (*float*): Rounding threshold.
        - **fractions** (*sequence of float*)
        - **tolerance_multipliers** (*sequence of float*)

    Returns:
        - **report** (*SpeedReport*)
    '''
    if p.global_kind is GlobalKind.NONE:
        raise SpenError("speed analysis needs a model with a global energy")
    report = SpeedReport()
    for fraction in tqdm(fractions, desc="fraction sweep", disable=not show_progress):
        row, traces = _speed_row(p, data, replace(icfg, batch_converged_fraction=fraction), threshold,
                                 "fraction", fraction, workers)
        report.rows.append(row)
        if fraction == 1.0:
            report.histogram = convergence_histogram(traces, icfg.max_iters)
    for multiplier in tqdm(tolerance_multipliers, desc="tolerance sweep", disable=not show_progress):
        cfg = replace(icfg, batch_converged_fraction=1.0, rel_obj_tol=icfg.rel_obj_tol * multiplier,
                      abs_iterate_tol=icfg.abs_iterate_tol * multiplier)
        row, _ = _speed_row(p, data, cfg, threshold, "tolerance", multiplier, workers)
        report.rows.append(row)
    for row in report.rows:
        logger.info("%s=%g: %.1f iterations, F1 %.4f", row.sweep, row.value, row.iterations, row.f1)
    return report


def write_matrix_csv(path, M, fmt="%.6g"):
    np.savetxt(path, np.asarray(M, dtype=float), delimiter=",", fmt=fmt)


def write_rows_csv(path, rows):
    '''
    Writes dataclass rows (or dicts) as a CSV table with a header.

    Args:
        - **path** (*str*)
        - **rows** (*list*)
    '''
    records = [asdict(r) if not isinstance(r, dict) else r for r in rows]
    if not records:
        raise ValueError("nothing to write")
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(records[0]))
        writer.writeheader()
        writer.writerows(records)


def write_histogram_csv(path, counts):
    write_rows_csv(path, [{"iterations": k, "examples": int(c)} for k, c in enumerate(counts)])
