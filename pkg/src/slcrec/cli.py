"""Command-line entry point.

Subcommands cover the whole pipeline, each driven by one JSON config:

  synth          generate a synthetic dataset (CSV + schema file)
  train-encoder  fit the context encoder on the training split
  extract        emit per-interaction latent context vectors as CSV
  train-rec      fit the recommender (training encoders first if needed)
  eval           error metrics and hit@k on the test split
  sweep          retrain the sequential pipeline across window lengths
  predict        score a CSV of (user_id, item_id, context columns)

Exit codes: 0 success, 2 config error, 3 training divergence, 4 data error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import load_config
from .errors import (
    DegenerateSplitError,
    DivergedTrainingError,
    EmptyCorpusError,
    EmptyDatasetError,
    InvalidConfigError,
    InvalidSpecError,
    ParseError,
    RaggedSequencesError,
    SchemaError,
    SchemaMismatchError,
    UnknownCategoryError,
)
from . import pipeline

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_DATA = 4

_CONFIG_ERRORS = (InvalidConfigError, SchemaError, InvalidSpecError)
_DATA_ERRORS = (
    FileNotFoundError,
    ParseError,
    SchemaMismatchError,
    UnknownCategoryError,
    EmptyDatasetError,
    DegenerateSplitError,
    EmptyCorpusError,
    RaggedSequencesError,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slcrec", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--verbose", "-v", action="store_true", help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = ("synth", "train-encoder", "extract", "train-rec", "eval", "sweep", "predict")
    for name in commands:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to the run config JSON")
        cmd.add_argument("--seed", type=int, default=None, help="override the config's master seed")
        cmd.add_argument("--out", default=None, help="override the output directory")
        if name == "predict":
            cmd.add_argument("--in", dest="in_csv", required=True, help="CSV of rows to score")
    return parser


def _resolve_out(args) -> str | None:
    # Flag wins over the environment; the environment wins over the config.
    if args.out is not None:
        return args.out
    return os.environ.get("SLCREC_OUT")


def _run(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed, out_override=_resolve_out(args))
    out = cfg.out_dir
    pipeline.prepare_out(cfg, out)
    if args.command == "synth":
        pipeline.run_synth(cfg, out)
        return EXIT_OK
    ds = pipeline.load_dataset(cfg)
    if args.command == "train-encoder":
        from .data import time_split

        train_ds, _ = time_split(ds, cfg.train_fraction)
        _, path = pipeline.ensure_encoder(cfg, train_ds, out)
        logger.info("encoder written to %s", path)
    elif args.command == "extract":
        pipeline.run_extract(cfg, ds, out)
    elif args.command == "train-rec":
        _, _, path = pipeline.ensure_recommender(cfg, ds, out)
        logger.info("recommender written to %s", path)
    elif args.command == "eval":
        pipeline.run_eval(cfg, ds, out)
    elif args.command == "sweep":
        pipeline.run_sweep(cfg, ds, out)
    elif args.command == "predict":
        pipeline.run_predict(cfg, ds, Path(args.in_csv), out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _run(args)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergedTrainingError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
