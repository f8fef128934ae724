"""Command line entry point ``qsum``.

    qsum run --config experiment.json
    qsum compare --config experiment.json
    qsum generate --type mcdpe --m 10 --n 100 --s 100 --seed 0 --out inst.json

Exit status is 0 on success and 2 on a configuration or usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .bench import ExperimentConfig, compare_algorithms, run_experiment
from .errors import QsumError
from .problems import generate_mcdpe


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsum", description="Incremental quasi-subgradient experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", required=True, type=Path)

    cmp_ = sub.add_parser("compare", help="paired comparison of the configured solvers")
    cmp_.add_argument("--config", required=True, type=Path)

    gen = sub.add_parser("generate", help="write a random problem instance as JSON")
    gen.add_argument("--type", required=True, choices=["mcdpe"])
    gen.add_argument("--m", required=True, type=_positive_int)
    gen.add_argument("--n", required=True, type=_positive_int)
    gen.add_argument("--s", required=True, type=_positive_int)
    gen.add_argument("--seed", required=True, type=int)
    gen.add_argument("--out", required=True, type=Path)
    return parser


def _load(path: Path) -> ExperimentConfig:
    try:
        return ExperimentConfig.load(path)
    except OSError as exc:
        raise QsumError(f"cannot read config {path}: {exc.strerror}") from None


def cmd_run(args) -> int:
    config = _load(args.config)
    report = run_experiment(config)
    for name, block in report.summary["algorithms"].items():
        f = block["f_opt"]
        mean = "n/a" if f is None else f"{f['mean']:.6g}"
        print(f"{name}: trials={block['count']} failed={block['failed']} mean f_opt={mean}")
    print(f"wrote {report.directory / 'trials.csv'}")
    return 0


def cmd_compare(args) -> int:
    config = _load(args.config)
    comparison = compare_algorithms(config)
    print(comparison.table())
    return 0


def cmd_generate(args) -> int:
    inst = generate_mcdpe(args.m, args.n, args.s, args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(inst.to_json() + "\n", encoding="utf-8")
    print(f"wrote {args.out}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "compare": cmd_compare, "generate": cmd_generate}
    try:
        return handlers[args.command](args)
    except QsumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
