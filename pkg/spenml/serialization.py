"""
Model files.

A model file is a numpy ``.npz`` archive. Every parameter tensor is stored as a little-endian float64 row-major array
under its dotted name (``feat.A1``, ``local.B``, ``global.C1``, ``W`` ...), and the entry ``__meta__`` holds a JSON
record: the format version, the model kind (``spen`` or ``dmf``), the dimensions (d, h1, f, L, m and the global depth;
null where a part is absent), the non-linearity names, the global energy kind, the dev-tuned rounding threshold and the
model configuration the file was built from. Files are read with ``allow_pickle=False``.
"""

import json
import logging

import numpy as np

from .energy import (CondEnergyParams, CrfEnergyParams, FeatureNetParams, GlobalEnergyParams, GlobalKind,
                     LocalEnergyParams, SpenParams)
from .errors import DataFormatError
from .meanfield import DmfParams

logger = logging.getLogger(__name__)

FORMAT_VERSION = "spenml-model/1"
META_KEY = "__meta__"


def _spen_meta(p):
    meta = {"input_dim": p.input_dim, "n_labels": p.n_labels, "feature_layers": len(p.feat.weights),
            "hidden_dim": p.feat.A1.shape[0] if len(p.feat.weights) == 2 else None, "feature_dim": p.feat.output_dim,
            "n_measurements": None, "global_depth": None,
            "g_hidden": p.feat.g_hidden.value, "g_out": p.feat.g_out.value, "global_kind": p.global_kind.value}
    g = p.global_energy
    if isinstance(g, GlobalEnergyParams):
        meta.update(g_global=g.g_glob.value, n_measurements=g.C1.shape[0], global_depth=g.depth)
    elif isinstance(g, CondEnergyParams):
        meta.update(g_global=g.g_cond.value, n_measurements=g.D1.shape[0], global_depth=1)
    return meta


def save_model(path, params, threshold=None, model_config=None):
    '''
    Writes a SPEN or a DMF model.

    Args:
        - **path** (*str*): Output file; written as given, no suffix is added.
        - **params** (*SpenParams* or *DmfParams*)
        - **threshold** (*float*): Rounding threshold to store with the model.
        - **model_config** (*dict*): Plain configuration values, kept for provenance.
    '''
    if isinstance(params, DmfParams):
        meta = _spen_meta(params.unary)
        meta.update(kind="dmf", iters=params.iters, clamp_unaries=params.clamp_unaries)
    else:
        meta = _spen_meta(params)
        meta["kind"] = "spen"
    meta.update(format_version=FORMAT_VERSION, threshold=threshold, model_config=model_config or {})
    arrays = {name: np.ascontiguousarray(value, dtype="<f8") for name, value in params.named_tensors().items()}
    arrays[META_KEY] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as f:
        np.savez(f, **arrays)
    logger.info("saved %s model to %s", meta["kind"], path)


def _spen_from_arrays(arrays, meta, prefix=""):
    def get(name):
        key = prefix + name
        if key not in arrays:
            raise DataFormatError("model file lacks tensor %s" % key)
        return arrays[key]

    layers = meta["feature_layers"]
    feat = FeatureNetParams(meta["input_dim"], [get("feat.A%d" % k) for k in range(1, layers + 1)],
                            [get("feat.a%d_bias" % k) for k in range(1, layers + 1)], meta["g_hidden"], meta["g_out"])
    local = LocalEnergyParams(get("local.B"))
    kind = GlobalKind(meta["global_kind"])
    g = None
    if kind is GlobalKind.LABEL_ONLY:
        depth_two = (prefix + "global.C2") in arrays
        g = GlobalEnergyParams(get("global.C1"), get("global.c1_bias"), get("global.c2"), meta["g_global"],
                               get("global.C2") if depth_two else None, get("global.C2_bias") if depth_two else None)
    elif kind is GlobalKind.CONDITIONED:
        g = CondEnergyParams(get("global.D1"), get("global.d1_bias"), get("global.d2"), meta["n_labels"],
                             meta["g_global"])
    elif kind is GlobalKind.CRF:
        g = CrfEnergyParams(get("global.S1"), get("global.s"))
    return SpenParams(feat, local, g)


def load_model(path):
    '''
    Reads a model written by ``save_model``.

    Args:
        - **path** (*str*)

    Returns:
        - **params** (*SpenParams* or *DmfParams*)
        - **meta** (*dict*): The metadata record (``threshold``, ``model_config`` ...).
    '''
    try:
        with np.load(path, allow_pickle=False) as archive:
            arrays = {name: archive[name] for name in archive.files}
    except (OSError, ValueError) as e:
        raise DataFormatError("not a model file (%s)" % e, path) from e
    if META_KEY not in arrays:
        raise DataFormatError("model file has no metadata", path)
    meta = json.loads(str(arrays.pop(META_KEY)))
    if meta.get("format_version") != FORMAT_VERSION:
        raise DataFormatError("unsupported model format %r" % meta.get("format_version"), path)
    try:
        if meta["kind"] == "dmf":
            unary = _spen_from_arrays(arrays, meta, "unary.")
            params = DmfParams(unary, arrays["W"], arrays["C"], meta["iters"], meta["clamp_unaries"])
        else:
            params = _spen_from_arrays(arrays, meta)
    except KeyError as e:
        raise DataFormatError("model file lacks %s" % e, path) from e
    logger.info("loaded %s model from %s (d=%d, L=%d)", meta["kind"], path, meta["input_dim"], meta["n_labels"])
    return params, meta
