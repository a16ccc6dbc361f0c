"""Expose most common parts of public API directly in `spenml.` namespace."""

from .config import ExperimentConfig, load_config
from .data import Dataset, LabeledExample, SynthConfig, generate_synthetic, load_multilabel, save_multilabel, split
from .energy import GlobalKind, SpenParams, energy_grad_params, energy_grad_y, init_spen_params, total_energy
from .inference import InferenceConfig, predict, predict_batch, relaxed_predictions, round_prediction
from .learning import TrainConfig, pretrain_local, ssvm_example_loss, ssvm_subgradient, train_spen
from .meanfield import DmfParams, dmf_forward, dmf_train, init_dmf_params
from .metrics import EvalReport, hamming_error, macro_f1, tune_threshold
from .serialization import load_model, save_model
