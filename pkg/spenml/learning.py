# -*- coding: utf-8 -*-
"""
This module trains SPENs with the structured SVM (SSVM) objective.

Per example the hinge is::

    [ D(y, ybar_p) - E_x(ybar_p) + E_x(y) ]_+

where ybar_p comes from loss-augmented inference and D is the surrogate task loss used there. The subgradient treats
ybar_p as fixed: dE_x(y)/dtheta - dE_x(ybar_p)/dtheta on violating examples, zero otherwise.

Training runs three stages, each with fresh momentum buffers:
    - ``pretrain``: the feature network and local energy learn a per-label logistic loss (this is the MLP baseline).
    - ``global_only``: SSVM on the global energy with the feature network and local energy clamped.
    - ``joint``: SSVM on every tensor at ``lr * joint_lr_scale``.
"""

import json
import logging
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.special import expit
from tqdm import tqdm

from .energy import GlobalKind, energy_grad_params, feature_forward, local_scores, scores_grad_params, total_energy
from .errors import DimensionError, NumericError
from .inference import Surrogate, loss_augmented_predict, relaxed_predictions, surrogate_loss
from .metrics import hamming_error, tune_threshold
from .optim import MomentumSGD, epoch_learning_rate, iterate_minibatches

logger = logging.getLogger(__name__)

STAGES = ("pretrain", "global_only", "joint")


@dataclass
class TrainConfig:
    '''
    Settings of SGD training.

    Args:
        - **surrogate** (*Surrogate*): ``squared`` or ``log``.
        - **lr** (*float*): Base learning rate.
        - **lr_decay** (*float*): Multiplicative decay per epoch, in (0, 1].
        - **momentum** (*float*): default 0.9.
        - **l2_local** (*float*): L2 weight of the feature network and local energy.
        - **l2_global** (*float*): L2 weight of the global energy.
        - **l2_biases** (*bool*): Also regularise bias vectors (default False).
        - **batch_size** (*int*)
        - **epochs_pretrain**, **epochs_global_only**, **epochs_joint** (*int*): 0 skips a stage.
        - **ssvm_lr** (*float*): Base learning rate of the SSVM stages; None reuses **lr**.
        - **joint_lr_scale** (*float*): Learning rate multiplier of the joint stage, below 1.
        - **select_best** (*bool*): With dev data, every stage ends on its epoch of best dev F1. An SSVM stage keeps
          the parameters it started from when no epoch beats them.
        - **seed** (*int*): Seed of the mini-batch shuffles.
    '''
    surrogate: Surrogate = Surrogate.SQUARED
    lr: float = 0.1
    lr_decay: float = 1.0
    momentum: float = 0.9
    l2_local: float = 0.0
    l2_global: float = 0.0
    l2_biases: bool = False
    batch_size: int = 100
    epochs_pretrain: int = 10
    epochs_global_only: int = 10
    epochs_joint: int = 5
    ssvm_lr: Optional[float] = None
    joint_lr_scale: float = 0.1
    select_best: bool = True
    seed: int = 0

    def __post_init__(self):
        self.surrogate = Surrogate(self.surrogate)
        if not self.lr > 0:
            raise ValueError("lr must be positive, got %r" % self.lr)
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must be in (0, 1], got %r" % self.lr_decay)
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1), got %r" % self.momentum)
        if self.l2_local < 0 or self.l2_global < 0:
            raise ValueError("L2 weights must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1, got %r" % self.batch_size)
        if min(self.epochs_pretrain, self.epochs_global_only, self.epochs_joint) < 0:
            raise ValueError("epoch counts must be >= 0")
        if not 0.0 < self.joint_lr_scale < 1.0:
            raise ValueError("joint_lr_scale must be in (0, 1), got %r" % self.joint_lr_scale)
        if self.ssvm_lr is not None and not self.ssvm_lr > 0:
            raise ValueError("ssvm_lr must be positive, got %r" % self.ssvm_lr)

    @property
    def epochs_per_stage(self):
        return {"pretrain": self.epochs_pretrain, "global_only": self.epochs_global_only, "joint": self.epochs_joint}


@dataclass
class SsvmExampleLoss:
    '''
    The SSVM hinge of one example.

    Args:
        - **margin_violation** (*float*): max(0, delta_at_pred - energy_gap).
        - **delta_at_pred** (*float*): Surrogate loss between the gold labels and the loss-augmented prediction.
        - **energy_gap** (*float*): E(ybar_p) - E(y_gold).
    '''
    margin_violation: float
    delta_at_pred: float
    energy_gap: float


class TrainingReport:
    '''
    Per-epoch training records (stage, epoch, mean loss, dev metrics), the dev-tuned threshold and, when the dev-best
    epoch was kept, its (stage, epoch).

    Methods:
        - **add** (*record*): Appends a record.
        - **to_jsonl** (*path*): Writes one JSON object per line.
    '''

    def __init__(self):
        self.records = []
        self.threshold = None
        self.selected = None

    def add(self, record):
        self.records.append(dict(record))

    def stage(self, name):
        return [r for r in self.records if r["stage"] == name]

    def to_jsonl(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for record in self.records:
                f.write(json.dumps(record) + "\n")

    def __len__(self):
        return len(self.records)


def _gold_rows(p, X, Y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[0] != Y.shape[0] or Y.shape[1] != p.n_labels or X.shape[1] != p.input_dim:
        raise DimensionError("inputs and gold labels do not fit the model", X.shape, Y.shape,
                             (p.input_dim, p.n_labels))
    return X, Y


def _hinge(p, F_x, Y, cfg, icfg, Y_pred=None):
    if Y_pred is None:
        Y_pred = loss_augmented_predict(p, F_x, Y, cfg.surrogate, icfg)
    Y_pred = np.atleast_2d(Y_pred)
    delta = np.atleast_1d(surrogate_loss(cfg.surrogate, Y, Y_pred))
    gap = total_energy(p, F_x, Y_pred) - total_energy(p, F_x, Y)
    return np.maximum(0.0, delta - gap), delta, gap, Y_pred


def _hinge_grads(p, X, Y, Y_pred, violated):
    # dict of summed subgradients over the violating rows, keyed like SpenParams.named_tensors
    if not violated.any():
        return {name: np.zeros_like(value) for name, value in p.named_tensors().items()}
    at_gold = energy_grad_params(p, X[violated], Y[violated]).named_tensors()
    at_pred = energy_grad_params(p, X[violated], Y_pred[violated]).named_tensors()
    return {name: at_gold[name] - at_pred[name] for name in at_gold}


def ssvm_example_loss(p, ex, cfg, icfg, ybar_pred=None):
    '''
    SSVM hinge of one example.

    Args:
        - **p** (*SpenParams*)
        - **ex** (*LabeledExample*)
        - **cfg** (*TrainConfig*)
        - **icfg** (*InferenceConfig*): Settings of loss-augmented inference.
        - **ybar_pred** (*ndarray*): Pins the loss-augmented prediction instead of running inference.

    Returns:
        - **loss** (*SsvmExampleLoss*)
    '''
    X, Y = _gold_rows(p, ex.features, ex.labels)
    F_x = feature_forward(p.feat, X)
    violation, delta, gap, _ = _hinge(p, F_x, Y, cfg, icfg, ybar_pred)
    return SsvmExampleLoss(float(violation[0]), float(delta[0]), float(gap[0]))


def ssvm_subgradient(p, ex, cfg, icfg, ybar_pred=None):
    '''
    Subgradient of ``ssvm_example_loss`` with respect to every parameter, holding the loss-augmented prediction fixed.

    Args:
        - **p** (*SpenParams*)
        - **ex** (*LabeledExample*)
        - **cfg** (*TrainConfig*)
        - **icfg** (*InferenceConfig*)
        - **ybar_pred** (*ndarray*): Pins the loss-augmented prediction.

    Returns:
        - **gradient** (*SpenParams*): Zero when the margin is not violated.
    '''
    X, Y = _gold_rows(p, ex.features, ex.labels)
    F_x = feature_forward(p.feat, X)
    violation, _, _, Y_pred = _hinge(p, F_x, Y, cfg, icfg, ybar_pred)
    grads = _hinge_grads(p, X, Y, Y_pred, violation > 0)
    gradient = p.zeros_like()
    for name, value in gradient.named_tensors().items():
        value[...] = grads[name]
    return gradient


def local_logistic_loss(p, X, Y):
    """Mean over examples of the summed per-label logistic loss of sigmoid(-score) against the gold labels."""
    S = local_scores(p.local, feature_forward(p.feat, np.atleast_2d(X)))
    Y = np.atleast_2d(Y)
    return float(np.mean(np.sum(np.logaddexp(0.0, S) - (1.0 - Y) * S, axis=1)))


def _l2_weights(tensors, cfg):
    l2 = {}
    for name, value in tensors.items():
        weight = cfg.l2_global if name.startswith("global.") else cfg.l2_local
        if cfg.l2_biases:
            l2[name] = weight
        elif name.endswith("_bias") or name == "global.s":
            l2[name] = 0.0
        elif name == "local.B":
            mask = np.full(value.shape, weight)
            mask[:, -1] = 0.0
            l2[name] = mask
        else:
            l2[name] = weight
    return l2


def _check_finite(loss, tensors, stage, epoch):
    if not np.isfinite(loss):
        raise NumericError("training loss is not finite", stage=stage, epoch=epoch)
    for name, value in tensors.items():
        if not np.all(np.isfinite(value)):
            raise NumericError("parameter %s diverged" % name, stage=stage, epoch=epoch)


@contextmanager
def _located(stage, epoch):
    # failures inside inference know nothing of the training loop
    try:
        yield
    except NumericError as e:
        if e.stage is None:
            raise e.at(stage, epoch) from e
        raise


@dataclass
class _Best:
    dev_f1: float
    threshold: float
    stage: str
    epoch: int
    params: object


def _offer(best, record, p, stage, epoch):
    if "dev_f1" not in record or (best is not None and record["dev_f1"] <= best.dev_f1):
        return best
    return _Best(record["dev_f1"], record["threshold"], stage, epoch, p.copy())


def _dev_record(p, dev, icfg, workers):
    relaxed, _ = relaxed_predictions(p, dev.X, icfg, workers)
    threshold, f1 = tune_threshold(relaxed, dev.Y)
    rounded = relaxed >= threshold
    return {"dev_f1": f1, "dev_hamming": hamming_error(rounded, dev.Y), "threshold": threshold}


def _finish_stage(p, best, cfg, stage):
    if not cfg.select_best or best is None:
        return p
    if best.stage == stage:
        logger.info("%s: keeping epoch %d (dev F1 %.4f)", stage, best.epoch, best.dev_f1)
    else:
        logger.info("%s: no epoch beat %s epoch %d (dev F1 %.4f)", stage, best.stage, best.epoch, best.dev_f1)
    return best.params.copy()


def _pretrain(p, data, cfg, dev, report, icfg, show_progress):
    p = p.copy()
    tensors = {name: value for name, value in p.named_tensors().items() if not name.startswith("global.")}
    optimizer = MomentumSGD(tensors, cfg.lr, cfg.momentum, _l2_weights(tensors, cfg))
    rng = np.random.default_rng(cfg.seed)
    best = None
    for epoch in tqdm(range(cfg.epochs_pretrain), desc="pretrain", disable=not show_progress):
        with _located("pretrain", epoch):
            optimizer.lr = epoch_learning_rate(cfg.lr, cfg.lr_decay, epoch)
            total = 0.0
            for idx in iterate_minibatches(len(data), cfg.batch_size, rng):
                X, Y = data.X[idx], data.Y[idx]
                S = local_scores(p.local, feature_forward(p.feat, X))
                total += float(np.sum(np.logaddexp(0.0, S) - (1.0 - Y) * S))
                # d/dS of softplus(S) - (1 - y) S
                d_scores = (Y - expit(-S)) / len(idx)
                optimizer.step(scores_grad_params(p.feat, p.local, X, d_scores))
            mean_loss = total / len(data)
            _check_finite(mean_loss, tensors, "pretrain", epoch)
            record = {"stage": "pretrain", "epoch": epoch, "loss": mean_loss}
            if dev is not None and icfg is not None:
                record.update(_dev_record(p, dev, icfg, 1))
        best = _offer(best, record, p, "pretrain", epoch)
        logger.info("pretrain epoch %d: %s", epoch, record)
        if report is not None:
            report.add(record)
    return _finish_stage(p, best, cfg, "pretrain"), best


def pretrain_local(p, data, cfg, dev=None, report=None, icfg=None, show_progress=True):
    '''
    Trains the feature network and local energy on the per-label logistic loss of sigmoid(-b_i' [F(x); 1]); the global
    energy is left untouched.

    Args:
        - **p** (*SpenParams*)
        - **data** (*Dataset*)
        - **cfg** (*TrainConfig*): Runs ``cfg.epochs_pretrain`` epochs.
        - **dev** (*Dataset*): Optional development data scored after every epoch (needs *icfg*).
        - **report** (*TrainingReport*): Optional report receiving the epoch records.

    Returns:
        - **params** (*SpenParams*): The trained copy; the dev-best epoch under ``cfg.select_best``.
    '''
    p, _ = _pretrain(p, data, cfg, dev, report, icfg, show_progress)
    return p


def _ssvm_stage(p, data, cfg, icfg, stage, dev, report, workers, show_progress, best):
    clamped = stage == "global_only"
    tensors = {name: value for name, value in p.named_tensors().items()
               if not clamped or name.startswith("global.")}
    base_lr = cfg.lr if cfg.ssvm_lr is None else cfg.ssvm_lr
    lr = base_lr * (cfg.joint_lr_scale if stage == "joint" else 1.0)
    optimizer = MomentumSGD(tensors, lr, cfg.momentum, _l2_weights(tensors, cfg))
    rng = np.random.default_rng(cfg.seed + STAGES.index(stage))
    # features cannot change while clamped
    F_all = feature_forward(p.feat, data.X) if clamped else None
    for epoch in tqdm(range(cfg.epochs_per_stage[stage]), desc=stage, disable=not show_progress):
        with _located(stage, epoch):
            optimizer.lr = epoch_learning_rate(lr, cfg.lr_decay, epoch)
            total, violations = 0.0, 0
            for idx in iterate_minibatches(len(data), cfg.batch_size, rng):
                X, Y = data.X[idx], data.Y[idx]
                F_x = F_all[idx] if clamped else feature_forward(p.feat, X)
                violation, _, _, Y_pred = _hinge(p, F_x, Y, cfg, icfg)
                total += float(np.sum(violation))
                violations += int(np.sum(violation > 0))
                grads = _hinge_grads(p, X, Y, Y_pred, violation > 0)
                optimizer.step({name: grads[name] / len(idx) for name in tensors})
            mean_loss = total / len(data)
            _check_finite(mean_loss, tensors, stage, epoch)
            record = {"stage": stage, "epoch": epoch, "loss": mean_loss, "violations": violations}
            if dev is not None:
                record.update(_dev_record(p, dev, icfg, workers))
        best = _offer(best, record, p, stage, epoch)
        logger.info("%s epoch %d: %s", stage, epoch, record)
        if report is not None:
            report.add(record)
    return _finish_stage(p, best, cfg, stage), best


def train_spen(p, data, cfg, icfg, dev=None, workers=1, show_progress=True):
    '''
    Staged training: local pre-training, SSVM on the global energy with the rest clamped, then a joint SSVM pass at a
    smaller learning rate. A SPEN without a global energy only runs the pre-training stage. With dev data and
    ``cfg.select_best`` every stage ends on its dev-best epoch, so a later stage can only keep or improve the dev F1.

    Args:
        - **p** (*SpenParams*): Initial parameters.
        - **data** (*Dataset*): Training data, nonempty.
        - **cfg** (*TrainConfig*)
        - **icfg** (*InferenceConfig*): Settings of loss-augmented inference and dev prediction.
        - **dev** (*Dataset*): Optional development data; its F1, hamming error and tuned threshold are recorded.
        - **workers** (*int*): Threads used for dev prediction.

    Returns:
        - **params** (*SpenParams*)
        - **report** (*TrainingReport*)

    Raises:
        - **NumericError**: On divergence, carrying the stage and epoch.
    '''
    if len(data) == 0:
        raise ValueError("cannot train on an empty data set")
    if data.d != p.input_dim or data.L != p.n_labels:
        raise DimensionError("data does not fit the model", (data.d, data.L), (p.input_dim, p.n_labels))
    report = TrainingReport()
    logger.info("training on %s: epochs %s", data.summary(), cfg.epochs_per_stage)
    p, best = _pretrain(p, data, cfg, dev, report, icfg, show_progress)
    if p.global_kind is not GlobalKind.NONE:
        for stage in STAGES[1:]:
            p, best = _ssvm_stage(p, data, cfg, icfg, stage, dev, report, workers, show_progress, best)
    elif cfg.epochs_global_only or cfg.epochs_joint:
        logger.info("no global energy: skipping the SSVM stages")
    if cfg.select_best and best is not None:
        report.threshold = best.threshold
        report.selected = (best.stage, best.epoch)
    elif dev is not None:
        tuned = [r for r in report.records if "threshold" in r]
        report.threshold = tuned[-1]["threshold"] if tuned else None
    return p, report


def report_summary(report):
    """The last record of every stage that ran, plus the kept epoch."""
    summary = {}
    for stage in STAGES + ("dmf",):
        records = report.stage(stage)
        if records:
            summary[stage] = records[-1]
    if report.selected is not None:
        summary["selected"] = {"stage": report.selected[0], "epoch": report.selected[1]}
    return summary


def train_config_dict(cfg):
    values = asdict(cfg)
    values["surrogate"] = cfg.surrogate.value
    return values
