"""Command-line experiment runner.

Verbs: toy-compare, cv, cross-corpus, low-resource, generate, metrics.
Exit codes: 0 success, 2 config error, 3 data error, 4 training divergence.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__, data, metrics as metrics_mod, models
from .config import load_config
from .errors import (
    ConfigError,
    ContractViolationError,
    DegenerateDataError,
    DivergenceError,
    EmoganError,
    NumericalDomainError,
    ParseError,
    ShapeError,
    UnsupportedOperationError,
)
from .experiments import RUNNERS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4

_DATA_ERRORS = (
    ParseError,
    DegenerateDataError,
    ShapeError,
    ContractViolationError,
    NumericalDomainError,
    UnsupportedOperationError,
)


def _add_common(parser):
    parser.add_argument("--config", help="YAML experiment config file")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument(
        "--model",
        action="append",
        choices=("m1", "m2", "m3"),
        default=None,
        help="model kind (repeatable)",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="emogan",
        description="GAN-based synthetic feature generation and evaluation "
        "for 4-class emotion corpora",
    )
    parser.add_argument("--version", action="version", version=f"emogan {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("toy-compare", help="2-D vanilla-vs-conditional GAN study")
    _add_common(p)

    p = sub.add_parser("cv", help="in-domain leave-one-session-out study")
    _add_common(p)
    p.add_argument("--corpus", default=None, help="feature CSV (default: toy corpus)")
    p.add_argument("--save-models", action="store_true", default=None)

    p = sub.add_parser("cross-corpus", help="train on source, evaluate against target")
    _add_common(p)
    p.add_argument("--source", default=None, help="source feature CSV")
    p.add_argument("--target", default=None, help="target feature CSV")
    p.add_argument("--save-models", action="store_true", default=None)

    p = sub.add_parser("low-resource", help="accuracy-vs-P augmentation curves")
    _add_common(p)
    p.add_argument("--source", default=None)
    p.add_argument("--target", default=None)

    p = sub.add_parser("generate", help="dump a synthetic batch to CSV")
    p.add_argument("--bundle", required=True, help="trained model bundle (.zip)")
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--class-id", type=int, default=None, help="fix the class (0..3)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-csv", required=True, help="destination CSV")

    p = sub.add_parser("metrics", help="compute metrics between two feature CSVs")
    p.add_argument("--real", required=True, help="real corpus CSV")
    p.add_argument("--synth", required=True, help="synthetic corpus CSV")
    p.add_argument("--label-column", default="label")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="optional directory for a CSV report")
    return parser


def _experiment_config(args, kind):
    overrides = {"kind": kind}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.model:
        overrides["models"] = tuple(args.model)
    for attr in ("corpus", "source", "target"):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[attr] = value
    if getattr(args, "save_models", None):
        overrides["save_models"] = True
    return load_config(args.config, overrides)


def _run_generate(args):
    model = models.load_bundle(args.bundle)
    batch = models.generate(model, args.n, class_id=args.class_id, seed=args.seed)
    corpus = data.Corpus(features=batch.features, labels=batch.labels, name="synthetic")
    data.save_csv(corpus, args.out_csv)
    print(f"wrote {args.n} samples to {args.out_csv}")
    return EXIT_OK


def _load_labeled_csv(path, label_column):
    # a "session" column is metadata, not a feature; honor it when present
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as f:
        header = next(_csv.reader(f), [])
    session = "session" if "session" in header else None
    return data.load_csv(path, label_column=label_column, session_column=session)


def _run_metrics(args):
    real = _load_labeled_csv(args.real, args.label_column)
    synth = _load_labeled_csv(args.synth, args.label_column)
    if real.feature_dim != synth.feature_dim:
        raise DegenerateDataError("real and synthetic corpora must share the feature dim")
    std_real = data.Standardizer.fit(real.features)
    m1 = metrics_mod.metric1(
        std_real.transform(real.features), real.labels,
        std_real.transform(synth.features), synth.labels, seed=args.seed,
    )
    std_syn = data.Standardizer.fit(synth.features)
    m2 = metrics_mod.metric2(
        std_syn.transform(synth.features), synth.labels,
        std_syn.transform(real.features), real.labels, seed=args.seed,
    )
    evaluator = metrics_mod.evaluator_train(
        std_real.transform(real.features), real.labels, seed=args.seed
    )
    fid_val = metrics_mod.fid_pipeline(
        evaluator,
        std_real.transform(real.features),
        std_real.transform(synth.features),
    )
    print(f"metric1_uwa {m1:.4f}")
    print(f"metric2_uwa {m2:.4f}")
    print(f"fid {fid_val:.4f}")
    if args.out:
        from pathlib import Path

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(
            "metric,value\n"
            f"metric1_uwa,{m1!r}\nmetric2_uwa,{m2!r}\nfid,{fid_val!r}\n",
            encoding="utf-8",
        )
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "generate":
            return _run_generate(args)
        if args.verb == "metrics":
            return _run_metrics(args)
        cfg = _experiment_config(args, args.verb)
        result = RUNNERS[args.verb](cfg)
        _print_summary(args.verb, result)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        where = f" (epoch {exc.epoch}, {exc.step})" if exc.epoch is not None else ""
        print(f"training diverged: {exc}{where}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EmoganError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def _print_summary(verb, result):
    print(f"outputs written to {result['out_dir']}")
    if verb == "toy-compare":
        print(
            f"infogan purity {result['purity']:.3f} "
            f"(bijective={result['bijective']}), vanilla coverage {result['coverage']}/4"
        )
    elif verb in ("cv", "cross-corpus"):
        report = result["report"]
        for model in report.models():
            keys = [k for k in report.rows[0] if k not in ("model", "fold")]
            summary = " ".join(f"{k}={report.mean(model, k):.4f}" for k in keys)
            print(f"{model}: {summary}")
    elif verb == "low-resource":
        rows = result["rows"]
        print(f"{len(rows)} grid cells evaluated")


if __name__ == "__main__":
    sys.exit(main())
