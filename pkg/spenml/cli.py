# -*- coding: utf-8 -*-
"""
Command line entry point.

Subcommands:
    - ``train``: trains the model a configuration describes and writes the model, the training report and, when there
      is test data, an evaluation report.
    - ``eval``: scores a model on a data file.
    - ``predict``: writes relaxed and rounded predictions.
    - ``synth``: writes a synthetic block-exclusivity data set.
    - ``inspect-measurements``: dumps the measurement matrix of a SPEN.
    - ``speed-analysis``: sweeps the prediction termination settings.
    - ``convert``: converts extreme classification repository files to the canonical format.

Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 numeric failure. Every output directory
receives ``resolved_config.yaml``.
"""

import argparse
import logging
import os
import sys

import numpy as np

from .analysis import (alignment_permutation_test, measurement_matrix, normalized_abs, speed_analysis,
                       write_histogram_csv, write_matrix_csv, write_rows_csv)
from .config import ExperimentConfig, apply_seed, load_config, resolved_dict, write_resolved_config
from .data import (Dataset, SynthConfig, convert_xc, generate_synthetic, kfold, load_multilabel, load_split_indices,
                   save_multilabel, split)
from .energy import SpenParams
from .errors import ConfigError, DataFormatError, DimensionError, NumericError, SpenError
from .inference import relaxed_predictions, write_traces
from .learning import report_summary, train_spen
from .meanfield import DmfParams, dmf_forward, dmf_train, init_dmf_params
from .metrics import count_search_errors, evaluate, tune_threshold
from .serialization import load_model, save_model

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _config(args):
    config = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        config = apply_seed(config, args.seed)
    return config


def _out_dir(args, config):
    out = getattr(args, "out", None) or os.path.join(config.out_dir, config.name)
    os.makedirs(out, exist_ok=True)
    return out


def _check_fits(params, data):
    if data.d != params.input_dim or data.L != params.n_labels:
        raise DimensionError("data does not fit the model", (data.d, data.L), (params.input_dim, params.n_labels))


def relaxed_output(params, X, icfg, workers=1):
    '''
    Relaxed predictions of either model kind.

    Returns:
        - **ybar** (*ndarray*): shape (n, L).
        - **traces** (*list of PredictionTrace*): Empty for models predicted in closed form.
    '''
    if isinstance(params, DmfParams):
        return dmf_forward(params, np.atleast_2d(X)), []
    return relaxed_predictions(params, X, icfg, workers)


def load_datasets(data_cfg):
    '''
    Loads (or generates) the train, dev and test sets a data configuration describes.

    Returns:
        - **train**, **dev**, **test** (*Dataset*): dev and test may be None.
    '''
    data_cfg.check_files()
    if data_cfg.synthetic:
        full = generate_synthetic(SynthConfig(data_cfg.n_examples, data_cfg.d, data_cfg.n_labels,
                                              data_cfg.block_size, data_cfg.split_seed))
        fractions = (1.0 - data_cfg.dev_fraction - data_cfg.test_fraction, data_cfg.dev_fraction,
                     data_cfg.test_fraction)
        return split(full, fractions, data_cfg.split_seed)
    if not data_cfg.train:
        raise ConfigError("data.train", "a training file is required unless data.synthetic is set")
    source = load_multilabel(data_cfg.train)
    train, dev, test = source, None, None
    if data_cfg.train_indices:
        train = source.subset(load_split_indices(data_cfg.train_indices), source.name + "/train")
    if data_cfg.dev_indices:
        dev = source.subset(load_split_indices(data_cfg.dev_indices), source.name + "/dev")
    if data_cfg.test_indices:
        test = source.subset(load_split_indices(data_cfg.test_indices), source.name + "/test")
    if data_cfg.dev:
        dev = load_multilabel(data_cfg.dev)
    if data_cfg.test:
        test = load_multilabel(data_cfg.test)
    dev_fraction = data_cfg.dev_fraction if dev is None else 0.0
    test_fraction = data_cfg.test_fraction if test is None else 0.0
    if dev_fraction or test_fraction:
        train, carved_dev, carved_test = split(train, (1.0 - dev_fraction - test_fraction, dev_fraction,
                                                       test_fraction), data_cfg.split_seed)
        dev = dev if dev is not None else carved_dev
        test = test if test is not None else carved_test
    for part in (dev, test):
        if part is not None and (part.d, part.L) != (train.d, train.L):
            raise DimensionError("all data sets must share d and L", (train.d, train.L), (part.d, part.L))
    return train, dev, test


def fit(config, train, dev=None, workers=1, show_progress=True):
    '''
    Trains the model kind of *config* on *train*.

    Returns:
        - **params** (*SpenParams* or *DmfParams*)
        - **report** (*TrainingReport*)
        - **threshold** (*float*): Tuned on *dev* when given, else 0.5.
    '''
    params = config.model.build(train.d, train.L)
    params, report = train_spen(params, train, config.train, config.inference, dev, workers, show_progress)
    threshold = report.threshold
    if config.model.kind == "dmf":
        params = init_dmf_params(params, config.model.dmf_iters, config.model.clamp_unaries)
        params = dmf_train(params, train, config.train, dev, report, show_progress)
        if dev is not None:
            threshold, _ = tune_threshold(dmf_forward(params, dev.X), dev.Y)
    report.threshold = 0.5 if threshold is None else threshold
    return params, report, report.threshold


def score(params, data, icfg, threshold, workers=1, search_errors=False):
    """Predicts *data* and returns its ``EvalReport``."""
    _check_fits(params, data)
    relaxed, _ = relaxed_output(params, data.X, icfg, workers)
    report = evaluate(relaxed, data.Y, threshold)
    if search_errors:
        if not isinstance(params, SpenParams):
            raise SpenError("search errors are defined for SPENs only")
        report.search_error_rate = count_search_errors(params, data.X, data.Y, relaxed)
    return report


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _train_once(config, train, dev, test, out, args):
    os.makedirs(out, exist_ok=True)
    params, report, threshold = fit(config, train, dev, args.workers, not args.quiet)
    logger.info("training summary: %s", report_summary(report))
    model_config = {k: v for k, v in resolved_dict(config).items() if k.startswith("model.")}
    save_model(os.path.join(out, "model.npz"), params, threshold, model_config)
    report.to_jsonl(os.path.join(out, "training_report.jsonl"))
    write_resolved_config(config, out)
    result = None
    if test is not None:
        result = score(params, test, config.inference, threshold, args.workers, args.search_errors)
        _write_text(os.path.join(out, "eval_report.txt"), result.to_text())
        logger.info("test %s", result)
    return result


def cmd_train(args):
    config = _config(args)
    out = _out_dir(args, config)
    train, dev, test = load_datasets(config.data)
    if config.data.kfold:
        results = []
        for i, (fold_train, fold_test) in enumerate(kfold(train, config.data.kfold, config.data.split_seed)):
            logger.info("fold %d of %d", i + 1, config.data.kfold)
            results.append(_train_once(config, fold_train, dev, fold_test, os.path.join(out, "fold%d" % i), args))
        f1 = np.array([r.macro_f1 for r in results])
        hamming = np.array([r.hamming_error for r in results])
        summary = {"folds": len(results), "macro_f1_mean": f1.mean(), "macro_f1_std": f1.std(),
                   "hamming_error_mean": hamming.mean(), "hamming_error_std": hamming.std()}
        _write_text(os.path.join(out, "cv_report.txt"), "".join("%s=%s\n" % kv for kv in summary.items()))
        write_resolved_config(config, out)
        print("".join("%s=%s\n" % kv for kv in summary.items()), end="")
        return EXIT_OK
    result = _train_once(config, train, dev, test, out, args)
    if result is not None:
        print(result.to_text(), end="")
    return EXIT_OK


def _threshold(args, params, meta, icfg, workers):
    if args.threshold is not None:
        return args.threshold
    if getattr(args, "dev", None):
        dev = load_multilabel(args.dev)
        _check_fits(params, dev)
        relaxed, _ = relaxed_output(params, dev.X, icfg, workers)
        threshold, _ = tune_threshold(relaxed, dev.Y)
        return threshold
    return meta.get("threshold") or 0.5


def cmd_eval(args):
    config = _config(args)
    params, meta = load_model(args.model)
    data = load_multilabel(args.data)
    threshold = _threshold(args, params, meta, config.inference, args.workers)
    report = score(params, data, config.inference, threshold, args.workers, args.search_errors)
    if args.out:
        out = _out_dir(args, config)
        _write_text(os.path.join(out, "eval_report.txt"), report.to_text())
        write_resolved_config(config, out)
    print(report.to_text(), end="")
    return EXIT_OK


def cmd_predict(args):
    config = _config(args)
    params, meta = load_model(args.model)
    data = load_multilabel(args.data)
    _check_fits(params, data)
    threshold = _threshold(args, params, meta, config.inference, args.workers)
    relaxed, traces = relaxed_output(params, data.X, config.inference, args.workers)
    out = _out_dir(args, config)
    np.savetxt(os.path.join(out, "relaxed.csv"), relaxed, delimiter=",", fmt="%.6f")
    predicted = Dataset(data.X, relaxed >= threshold, data.name + "/predicted")
    save_multilabel(predicted, os.path.join(out, "predictions.ml"))
    if traces:
        write_traces(os.path.join(out, "traces.jsonl"), traces)
    write_resolved_config(config, out)
    logger.info("wrote %d predictions (threshold %.2f) to %s", len(data), threshold, out)
    return EXIT_OK


def cmd_synth(args):
    config = _config(args)
    data_cfg = config.data
    n = args.n_examples or data_cfg.n_examples
    dataset = generate_synthetic(SynthConfig(n, data_cfg.d, data_cfg.n_labels, data_cfg.block_size,
                                             data_cfg.split_seed))
    out = _out_dir(args, config)
    save_multilabel(dataset, os.path.join(out, "synthetic.ml"))
    write_resolved_config(config, out)
    logger.info("wrote %s", dataset.summary())
    return EXIT_OK


def cmd_inspect_measurements(args):
    config = _config(args)
    params, _ = load_model(args.model)
    if isinstance(params, DmfParams):
        raise SpenError("a dmf model has no measurement matrix")
    M = measurement_matrix(params)
    out = _out_dir(args, config)
    write_matrix_csv(os.path.join(out, "measurements.csv"), M)
    write_matrix_csv(os.path.join(out, "measurements_normalized.csv"), normalized_abs(M))
    if args.block_size:
        test = alignment_permutation_test(M, args.block_size, args.permutations, config.seed)
        _write_text(os.path.join(out, "alignment.txt"),
                    "score=%s\nnull_q99=%s\np_value=%s\n" % (test.score, test.quantile(0.99), test.p_value))
    write_resolved_config(config, out)
    return EXIT_OK


def cmd_speed_analysis(args):
    config = _config(args)
    params, meta = load_model(args.model)
    if not isinstance(params, SpenParams):
        raise SpenError("speed analysis needs a SPEN")
    data = load_multilabel(args.data)
    _check_fits(params, data)
    threshold = _threshold(args, params, meta, config.inference, args.workers)
    report = speed_analysis(params, data, config.inference, threshold, args.fractions, args.tolerances,
                            args.workers, not args.quiet)
    out = _out_dir(args, config)
    write_rows_csv(os.path.join(out, "fraction_sweep.csv"), report.sweep("fraction"))
    write_rows_csv(os.path.join(out, "tolerance_sweep.csv"), report.sweep("tolerance"))
    if report.histogram is not None:
        write_histogram_csv(os.path.join(out, "convergence_histogram.csv"), report.histogram)
    write_resolved_config(config, out)
    return EXIT_OK


def cmd_convert(args):
    config = _config(args)
    dataset = convert_xc(args.data, args.out)
    write_resolved_config(config, os.path.dirname(os.path.abspath(args.out)))
    logger.info("converted %s to %s", dataset.summary(), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="overrides every seed of the configuration")
    common.add_argument("--workers", type=int, default=1, help="threads used for prediction")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    common.add_argument("--quiet", action="store_true", help="no progress bars")

    parser = _Parser(prog="spenml", description="Structured prediction energy networks for multi-label data.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("train", parents=[common], help="train a model")
    p.add_argument("--search-errors", action="store_true", help="count search errors on the test set")
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("eval", cmd_eval, "evaluate a model"), ("predict", cmd_predict, "predict labels")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--dev", help="tune the threshold on this file")
        p.add_argument("--threshold", type=float, help="rounding threshold, bypasses tuning")
        if name == "eval":
            p.add_argument("--search-errors", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("synth", parents=[common], help="write synthetic data")
    p.add_argument("--n-examples", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("inspect-measurements", parents=[common], help="dump the measurement matrix")
    p.add_argument("--model", required=True)
    p.add_argument("--block-size", type=int, help="also test the alignment with blocks of this size")
    p.add_argument("--permutations", type=int, default=1000)
    p.set_defaults(func=cmd_inspect_measurements)

    p = sub.add_parser("speed-analysis", parents=[common], help="sweep the prediction termination settings")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--dev")
    p.add_argument("--threshold", type=float)
    p.add_argument("--fractions", type=float, nargs="+", default=[0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    p.add_argument("--tolerances", type=float, nargs="+", default=[1.0, 10.0, 100.0, 1000.0])
    p.set_defaults(func=cmd_speed_analysis)

    p = sub.add_parser("convert", parents=[common], help="convert an extreme classification repository file")
    p.add_argument("--data", required=True, help="source file")
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None):
    '''
    Runs one command.

    Args:
        - **argv** (*list of str*): Defaults to ``sys.argv[1:]``.

    Returns:
        - **status** (*int*): The exit code.
    '''
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s - %(levelname)s - %(message)s")
    if getattr(args, "threshold", None) is not None and not 0.0 < args.threshold < 1.0:
        logger.error("--threshold must be in (0, 1)")
        return EXIT_USAGE
    if args.command == "convert" and not args.out:
        logger.error("convert needs --out")
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        return EXIT_USAGE
    except (DataFormatError, DimensionError, FileNotFoundError) as e:
        logger.error("data error: %s", e)
        return EXIT_DATA
    except NumericError as e:
        logger.error("numeric failure: %s", e)
        return EXIT_NUMERIC
    except SpenError as e:
        logger.error("%s", e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
