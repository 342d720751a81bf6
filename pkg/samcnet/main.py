"""
Entry point for the SAMCNet toolkit.

Usage:
  python -m samcnet.main generate --spec spec.json --out data/
  python -m samcnet.main train --config run.json
  python -m samcnet.main eval --checkpoint runs/default/model.samcnet --data data/
  python -m samcnet.main baseline --measure pi --classifier dt --data data/ --out runs/pi-dt
  python -m samcnet.main ablate --config run.json
  python -m samcnet.main sweep --config run.json --param k --values 4,6,8
  python -m samcnet.main interpret --checkpoint runs/default/model.samcnet --data data/
  python -m samcnet.main bench --checkpoint runs/default/model.samcnet --data data/ --num-points 256
  python -m samcnet.main --help     # Show all options

SAMCNET_SEED overrides the seed of train/ablate/sweep configs and of generate.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from samcnet import experiments
from samcnet.colocation.classifiers import CLASSIFIERS
from samcnet.colocation.measures import MEASURES
from samcnet.config import load_run_config
from samcnet.errors import SamcnetError
from samcnet.interpret.importance import NORMS
from samcnet.interpret.relationships import GRAPH_SOURCES

logger = logging.getLogger("samcnet")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="samcnet",
        description="Spatial-configuration classification of multi-category point patterns",
    )
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default="INFO",
        help="Logging level (default: INFO)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="Write a synthetic planted-pattern corpus")
    p.add_argument("--spec", required=True, help="Synthetic spec JSON")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--seed", type=int, default=None, help="Override the seed in the corpus JSON")

    p = sub.add_parser("train", help="Train SAMCNet from a run config")
    p.add_argument("--config", required=True, help="Run config JSON")
    p.add_argument("--out", default=None, help="Output directory (default: config output.directory)")

    p = sub.add_parser("eval", help="Evaluate a checkpoint on a dataset directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="Directory with points.csv and labels.csv")
    p.add_argument("--out", default=None, help="Output directory (default: next to the checkpoint)")

    p = sub.add_parser("baseline", help="Co-location feature baseline")
    p.add_argument("--measure", choices=MEASURES, required=True)
    p.add_argument("--classifier", choices=CLASSIFIERS, required=True)
    p.add_argument("--data", required=True, help="Directory with points.csv and labels.csv")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--thresholds", type=_float_list, default=[50.0],
                   help="Comma-separated distance thresholds in px (default: 50)")
    p.add_argument("--seed", type=int, default=0, help="Split and classifier seed (default: 0)")

    p = sub.add_parser("ablate", help="Train and compare the seven ablation configurations")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("sweep", help="Sensitivity sweep over one key parameter")
    p.add_argument("--config", required=True)
    p.add_argument("--param", choices=experiments.SWEEP_PARAMS, required=True)
    p.add_argument("--values", type=_int_list, required=True, help="Comma-separated integer values")
    p.add_argument("--out", default=None)

    p = sub.add_parser("interpret", help="Pair importance and N-way relationship ranking")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--norm", choices=NORMS, default="l2")
    p.add_argument("--graph-source", choices=GRAPH_SOURCES, default="feature")
    p.add_argument("--top", type=int, default=experiments.RELATIONSHIPS_TOP)

    p = sub.add_parser("bench", help="Per-sample inference timing")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--num-points", type=int, default=None,
                   help="Points per sample (default: the model's num_points)")
    return parser


def run(args: argparse.Namespace) -> None:
    if args.command == "generate":
        experiments.run_generate(args.spec, args.out, args.seed)
    elif args.command == "train":
        result = experiments.run_train(load_run_config(args.config), args.out)
        logger.info("Test accuracy %.4f, checkpoint %s", result.metrics.accuracy, result.checkpoint)
    elif args.command == "eval":
        metrics = experiments.run_eval(args.checkpoint, args.data, args.out)
        logger.info("Accuracy %.4f", metrics.accuracy)
    elif args.command == "baseline":
        experiments.run_baseline(args.measure, args.classifier, args.data, args.out, args.thresholds, args.seed)
    elif args.command == "ablate":
        experiments.run_ablate(load_run_config(args.config), args.out)
    elif args.command == "sweep":
        experiments.run_sweep(load_run_config(args.config), args.param, args.values, args.out)
    elif args.command == "interpret":
        experiments.run_interpret(
            args.checkpoint, args.data, args.out,
            seed=args.seed, norm=args.norm, graph_source=args.graph_source, top=args.top,
        )
    elif args.command == "bench":
        experiments.run_bench(args.checkpoint, args.data, args.out, args.num_points)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%H:%M:%S",
    )

    try:
        run(args)
    except (SamcnetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
