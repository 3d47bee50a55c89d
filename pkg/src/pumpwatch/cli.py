"""Command-line interface.

Subcommands:
    generate   write a synthetic dataset file
    run        end to end: fit, evaluate, report
    train      fit detectors and write artifacts only
    evaluate   score a dataset against previously trained artifacts
    report     render the tables from a saved report.json

Experiment subcommands read a JSON config file (--config); every flag
mirrors a config key and overrides it.  Exit code 0 on success, 2 on any
toolkit error (a diagnostic goes to stderr).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .dataset import GeneratorConfig, generate_synthetic, save_dataset
from .errors import ConfigError, PumpwatchError
from .harness import (ExperimentConfig, config_from_dict, evaluate_experiment,
                      load_report, parse_detector, parse_feature_sets,
                      render_tables, run_experiment, train_experiment)


def _add_generator_flags(p):
    p.add_argument("--n-samples-per-condition", type=int)
    p.add_argument("--anomaly-fraction", type=float)
    p.add_argument("--base-amplitude", type=float)
    p.add_argument("--harmonic-count", type=int)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--anomaly-harmonic-gain", type=float)
    p.add_argument("--anomaly-noise-gain", type=float)
    p.add_argument("--seed", type=int)


def _add_experiment_flags(p):
    p.add_argument("--config", help="experiment config JSON file")
    p.add_argument("--dataset", help="dataset file to load (overrides config)")
    p.add_argument("--output-dir")
    p.add_argument("--feature-sets",
                   help="comma-separated feature set names, or 'all'")
    p.add_argument("--detectors",
                   help="comma-separated detector names (DNN,LSTM,CNN,BM_PCA,BM_IQR)")
    p.add_argument("--split-seed", type=int)
    p.add_argument("--train-frac", type=float)
    p.add_argument("--threshold-frac", type=float)
    p.add_argument("--eval-frac", type=float)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--early-stop-patience", type=int)
    p.add_argument("--train-seed", type=int)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pumpwatch",
        description="Autoencoder anomaly detection for pump sensor recordings")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset file")
    g.add_argument("--out", required=True, help="output dataset path")
    g.add_argument("--gen-config", help="generator config JSON file")
    _add_generator_flags(g)

    for name, help_text in (("run", "fit, evaluate and report"),
                            ("train", "fit detectors and write artifacts"),
                            ("evaluate", "score against existing artifacts")):
        p = sub.add_parser(name, help=help_text)
        _add_experiment_flags(p)

    r = sub.add_parser("report", help="render tables from a saved report")
    r.add_argument("--report", help="path to report.json")
    r.add_argument("--output-dir", help="experiment directory holding report.json")
    return parser


def _generator_config(args) -> GeneratorConfig:
    doc = {}
    if args.gen_config:
        with open(args.gen_config) as f:
            doc = json.load(f)
    cfg = GeneratorConfig(**doc)
    for flag in ("n_samples_per_condition", "anomaly_fraction", "base_amplitude",
                 "harmonic_count", "noise_std", "anomaly_harmonic_gain",
                 "anomaly_noise_gain", "seed"):
        value = getattr(args, flag)
        if value is not None:
            setattr(cfg, flag, value)
    return cfg


def _experiment_config(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        with open(args.config) as f:
            doc = json.load(f)
    cfg = config_from_dict(doc)
    if args.dataset is not None:
        cfg.load = args.dataset
        cfg.generate = None
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    if args.feature_sets is not None:
        cfg.feature_sets = parse_feature_sets(args.feature_sets)
    if args.detectors is not None:
        cfg.detectors = [parse_detector(d.strip())
                         for d in args.detectors.split(",") if d.strip()]
    if args.split_seed is not None:
        cfg.split_seed = args.split_seed
    for frac in ("train_frac", "threshold_frac", "eval_frac"):
        value = getattr(args, frac)
        if value is not None:
            cfg.split = dataclasses.replace(cfg.split, **{frac: value})
    overrides = {}
    for src, dst in (("learning_rate", "learning_rate"), ("batch_size", "batch_size"),
                     ("max_epochs", "max_epochs"),
                     ("early_stop_patience", "early_stop_patience"),
                     ("train_seed", "seed")):
        value = getattr(args, src)
        if value is not None:
            overrides[dst] = value
    if overrides:
        cfg.train = dataclasses.replace(cfg.train, **overrides)
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            ds = generate_synthetic(_generator_config(args))
            save_dataset(ds, args.out)
            print(f"wrote {len(ds)} samples to {args.out}")
        elif args.command == "run":
            report = run_experiment(_experiment_config(args))
            print(render_tables(report)[0])
        elif args.command == "train":
            cfg = _experiment_config(args)
            train_experiment(cfg)
            print(f"artifacts written to {Path(cfg.output_dir) / 'artifacts'}")
        elif args.command == "evaluate":
            report = evaluate_experiment(_experiment_config(args))
            print(render_tables(report)[0])
        elif args.command == "report":
            if not args.report and not args.output_dir:
                raise ConfigError("report needs --report or --output-dir")
            path = args.report or str(Path(args.output_dir) / "report.json")
            print(render_tables(load_report(path))[0])
    except PumpwatchError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
