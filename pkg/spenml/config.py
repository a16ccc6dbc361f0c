# -*- coding: utf-8 -*-
"""
This module reads experiment configurations.

A configuration is a YAML mapping whose keys are dotted names grouped by section::

    name: bibtex-spen
    out_dir: runs/bibtex
    seed: 1
    model.kind: spen
    model.hidden_sizes: [150, 150]
    inference.max_iters: 60
    train.lr: 0.1
    data.train: data/bibtex/train.ml

Nested sections (``model: {kind: spen}``) are accepted as well. Unknown keys and ill-typed values raise
``ConfigError`` naming the field. Seeds left unset in a section (``model.init_seed``, ``train.seed``,
``data.split_seed``) take the top-level ``seed``.
"""

import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from typing import Optional, Tuple

import yaml

from .compute import Nonlinearity
from .energy import GlobalKind, init_spen_params
from .errors import ConfigError
from .inference import InferenceConfig, config_dict
from .learning import TrainConfig, train_config_dict

logger = logging.getLogger(__name__)

MODEL_KINDS = ("linear", "mlp", "spen", "dmf")
RESOLVED_CONFIG_NAME = "resolved_config.yaml"


@dataclass
class ModelConfig:
    '''
    Architecture.

    Args:
        - **kind** (*str*): ``linear`` (per-label logistic regression on the raw features), ``mlp`` (feature network and
          local energy), ``spen`` or ``dmf``.
        - **hidden_sizes** (*tuple of int*): Feature network layer widths (ignored by ``linear``).
        - **g_hidden**, **g_out** (*str*): Feature network non-linearities.
        - **global_kind** (*str*): ``label_only``, ``conditioned`` or ``crf`` (``spen`` only).
        - **n_measurements** (*int*): m.
        - **global_depth** (*int*): 1 or 2.
        - **global_hidden** (*int*): Width of the second global layer.
        - **g_global** (*str*): Global network non-linearity.
        - **dmf_iters** (*int*): Unrolled mean-field iterations.
        - **clamp_unaries** (*bool*): Keep the DMF unary scorer fixed.
        - **init_seed** (*int*): Seed of the random initialisation.
    '''
    kind: str = "spen"
    hidden_sizes: Tuple[int, ...] = (150, 150)
    g_hidden: str = "relu"
    g_out: str = "relu"
    global_kind: str = "label_only"
    n_measurements: int = 15
    global_depth: int = 1
    global_hidden: Optional[int] = None
    g_global: str = "softplus"
    dmf_iters: int = 5
    clamp_unaries: bool = True
    init_seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError("model.kind", "must be one of %s, got %r" % (", ".join(MODEL_KINDS), self.kind))
        if not isinstance(self.hidden_sizes, (list, tuple)) or len(self.hidden_sizes) > 2 \
                or not all(isinstance(h, int) and not isinstance(h, bool) and h > 0 for h in self.hidden_sizes):
            raise ConfigError("model.hidden_sizes", "must be a list of at most two positive integers")
        self.hidden_sizes = tuple(self.hidden_sizes)
        for name in ("g_hidden", "g_out", "g_global"):
            try:
                Nonlinearity.parse(getattr(self, name))
            except ValueError as e:
                raise ConfigError("model." + name, str(e)) from None
        try:
            kind = GlobalKind(self.global_kind)
        except ValueError:
            raise ConfigError("model.global_kind", "unknown global energy %r" % self.global_kind) from None
        if self.kind == "spen" and kind is GlobalKind.NONE:
            raise ConfigError("model.global_kind", "a spen needs a global energy; use kind mlp instead")
        if self.n_measurements < 1:
            raise ConfigError("model.n_measurements", "must be >= 1")
        if self.global_depth not in (1, 2):
            raise ConfigError("model.global_depth", "must be 1 or 2")
        if self.dmf_iters < 1:
            raise ConfigError("model.dmf_iters", "must be >= 1")

    def build(self, d, L):
        '''
        Randomly initialised parameters. For ``dmf`` this is the unary scorer, which is pretrained before the pairwise
        part is added.

        Args:
            - **d** (*int*): Number of features.
            - **L** (*int*): Number of labels.

        Returns:
            - **params** (*SpenParams*)
        '''
        hidden = () if self.kind == "linear" else self.hidden_sizes
        global_kind = self.global_kind if self.kind == "spen" else GlobalKind.NONE
        return init_spen_params(d, L, hidden, self.g_hidden, self.g_out, global_kind, self.n_measurements,
                                self.global_depth, self.global_hidden, self.g_global, self.init_seed or 0)


@dataclass
class DataConfig:
    '''
    Where the examples come from.

    Args:
        - **train**, **dev**, **test** (*str*): Data files in the canonical format ("" for none).
        - **train_indices**, **dev_indices**, **test_indices** (*str*): Optional split files selecting examples of
          *train* (published splits).
        - **dev_fraction**, **test_fraction** (*float*): Random split of the training file (or synthetic data) when no
          dev/test file is given.
        - **kfold** (*int*): Run k-fold cross validation on the training data instead (0 = off).
        - **synthetic** (*bool*): Generate block-exclusivity data instead of reading files.
        - **n_examples**, **d**, **n_labels**, **block_size** (*int*): Synthetic generator settings.
        - **split_seed** (*int*): Seed of random splits and of the synthetic generator.
    '''
    train: str = ""
    dev: str = ""
    test: str = ""
    train_indices: str = ""
    dev_indices: str = ""
    test_indices: str = ""
    dev_fraction: float = 0.0
    test_fraction: float = 0.0
    kfold: int = 0
    synthetic: bool = False
    n_examples: int = 1500
    d: int = 64
    n_labels: int = 16
    block_size: int = 4
    split_seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.dev_fraction < 1.0 or not 0.0 <= self.test_fraction < 1.0 \
                or self.dev_fraction + self.test_fraction >= 1.0:
            raise ConfigError("data.dev_fraction", "dev and test fractions must leave training examples")
        if self.kfold == 1 or self.kfold < 0:
            raise ConfigError("data.kfold", "must be 0 (off) or >= 2")

    def check_files(self):
        """Raises ``ConfigError`` for referenced files that do not exist."""
        for name in ("train", "dev", "test", "train_indices", "dev_indices", "test_indices"):
            path = getattr(self, name)
            if path and not os.path.exists(path):
                raise ConfigError("data." + name, "no such file: %s" % path)


@dataclass
class ExperimentConfig:
    '''
    A complete experiment.

    Args:
        - **name** (*str*)
        - **out_dir** (*str*): Where models, reports and resolved configurations go.
        - **seed** (*int*): Default of every unset seed.
        - **model** (*ModelConfig*)
        - **inference** (*InferenceConfig*)
        - **train** (*TrainConfig*)
        - **data** (*DataConfig*)
    '''
    name: str = "experiment"
    out_dir: str = "runs"
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def __post_init__(self):
        if self.model.init_seed is None:
            self.model = replace(self.model, init_seed=self.seed)
        if self.data.split_seed is None:
            self.data = replace(self.data, split_seed=self.seed)


SECTIONS = {"model": ModelConfig, "inference": InferenceConfig, "train": TrainConfig, "data": DataConfig}
TOP_LEVEL = {"name": str, "out_dir": str, "seed": int}


def _flatten(mapping, prefix=""):
    flat = {}
    for key, value in mapping.items():
        key = prefix + str(key)
        if isinstance(value, dict):
            flat.update(_flatten(value, key + "."))
        else:
            flat[key] = value
    return flat


def _coerce(name, expected, value):
    if expected is bool:
        ok = isinstance(value, bool)
    elif expected is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif expected is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif expected is str:
        ok = isinstance(value, str)
    elif isinstance(expected, type) and issubclass(expected, Enum):
        ok = isinstance(value, str)
    else:
        ok = True
    if not ok:
        raise ConfigError(name, "expected %s, got %r" % (getattr(expected, "__name__", expected), value))
    return value


def parse_config(mapping):
    '''
    Builds an ``ExperimentConfig`` from a (flat or nested) mapping.

    Args:
        - **mapping** (*dict*)

    Returns:
        - **config** (*ExperimentConfig*)
    '''
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ConfigError("<root>", "a configuration must be a mapping")
    top, sections = {}, {name: {} for name in SECTIONS}
    known = {name: {f.name: f.type for f in fields(cls)} for name, cls in SECTIONS.items()}
    for key, value in _flatten(mapping).items():
        if key in TOP_LEVEL:
            top[key] = _coerce(key, TOP_LEVEL[key], value)
            continue
        section, _, name = key.partition(".")
        if section not in SECTIONS or name not in known[section]:
            raise ConfigError(key, "unknown configuration key")
        sections[section][name] = _coerce(key, known[section][name], value)
    if "seed" in top and "seed" not in sections["train"]:
        sections["train"]["seed"] = top["seed"]
    built = {}
    for section, cls in SECTIONS.items():
        try:
            built[section] = cls(**sections[section])
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(section, str(e)) from None
    return ExperimentConfig(**top, **built)


def load_config(path):
    """Reads a YAML configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            mapping = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError("--config", "cannot read %s: %s" % (path, e)) from None
    except yaml.YAMLError as e:
        raise ConfigError("--config", "invalid YAML in %s: %s" % (path, e)) from None
    config = parse_config(mapping)
    logger.info("loaded configuration %s from %s", config.name, path)
    return config


def apply_seed(config, seed):
    """Overrides every seed of *config*."""
    return replace(config, seed=seed, model=replace(config.model, init_seed=seed),
                   train=replace(config.train, seed=seed), data=replace(config.data, split_seed=seed))


def resolved_dict(config):
    '''
    The fully defaulted configuration as a flat dotted mapping of plain values.

    Args:
        - **config** (*ExperimentConfig*)

    Returns:
        - **values** (*dict*)
    '''
    values = {"name": config.name, "out_dir": config.out_dir, "seed": config.seed}
    model = asdict(config.model)
    model["hidden_sizes"] = list(model["hidden_sizes"])
    sections = {"model": model, "inference": config_dict(config.inference),
                "train": train_config_dict(config.train), "data": asdict(config.data)}
    for section, entries in sections.items():
        for key, value in entries.items():
            values[section + "." + key] = value
    return values


def write_resolved_config(config, out_dir):
    '''
    Writes ``resolved_config.yaml`` into *out_dir* (created if needed).

    Returns:
        - **path** (*str*)
    '''
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, RESOLVED_CONFIG_NAME)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(resolved_dict(config), f, default_flow_style=False, sort_keys=True)
    return path
