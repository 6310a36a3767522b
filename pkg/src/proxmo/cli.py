"""Command-line entry point.

Every command prints its effective config (YAML, defaults filled in) on stdout
before running and writes artifacts only under ``--out-dir``. Progress and
diagnostics go to stderr.

Exit codes: 0 success, 2 config error, 3 numerical divergence, 4 at least one
grid cell failed (partial results are still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Sequence

from . import analysis
from .config import dump_config, load_config
from .errors import InvalidConfig, NumericalDivergence
from .policy import Policy
from .trainer import SUMMARY_COLUMNS, TrainConfig, eval_pool, evaluate, train

log = logging.getLogger("proxmo")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_CELL_FAILED = 4


def _seed_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _grid(text: str) -> list[float]:
    try:
        return analysis.parse_grid(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("config", help="YAML run config")
        p.add_argument("--seed", type=int, help="override trainer.seed")
    p.add_argument("--out-dir", default="out", help="directory for all artifacts (default: ./out)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker count (default: logical cores)")
    p.add_argument("--json", action="store_true", help="write tables as JSON Lines instead of CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proxmo", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one policy; writes run.jsonl, summary.csv, policy.ckpt")
    _common(p)

    p = sub.add_parser("evaluate", help="greedy evaluation of a checkpoint on the held-out pool")
    _common(p)
    p.add_argument("--checkpoint", required=True, help="policy.ckpt written by train")
    p.add_argument("--episodes", type=int, help="override trainer.eval_episodes")

    p = sub.add_parser("sweep", help="final success over one hyperparameter axis x seeds")
    _common(p)
    p.add_argument("--axis", required=True, choices=analysis.SWEEP_AXES)
    p.add_argument("--values", required=True, type=_grid, help="comma list or start:stop:step")
    p.add_argument("--seeds", type=_seed_list, help="override trainer.seeds")

    p = sub.add_parser("ablate", help="all five estimators x seeds")
    _common(p)
    p.add_argument("--seeds", type=_seed_list, help="override trainer.seeds")

    p = sub.add_parser("analyze", help="diagnostic tables")
    asub = p.add_subparsers(dest="analysis", required=True)
    z = asub.add_parser("zscore", help="binary-outcome z-score asymmetry table")
    _common(z, config=False)
    z.add_argument("--grid", type=_grid, default=analysis.parse_grid("0.05:0.95:0.05"))
    s = asub.add_parser("singletons", help="exact-match group-size fractions per iteration")
    _common(s)
    s.add_argument("--checkpoints", type=_seed_list, help="iterations to report (default: all)")
    s.add_argument("--first-step", action="store_true", help="bin only each group's initial observation")
    return parser


def _table(rows, columns, out_dir: Path, stem: str, as_json: bool) -> Path:
    path = out_dir / (f"{stem}.jsonl" if as_json else f"{stem}.csv")
    if as_json:
        analysis.write_jsonl(rows, path)
    else:
        analysis.write_csv(rows, columns, path)
    return path


def _load(args) -> TrainConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def _echo(config: TrainConfig, out_dir: Path) -> None:
    text = dump_config(config)
    sys.stdout.write(text)
    sys.stdout.flush()
    (out_dir / "effective-config.yaml").write_text(text, encoding="utf-8")


def cmd_train(args) -> int:
    config = _load(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _echo(config, out)

    def progress(rec):
        log.info("iter %d success %.3f objective %.4f", rec["iteration"], rec["success_rate"], rec["objective"])

    report = train(config, threads=max(args.threads, 1), on_iteration=progress)
    (out / "run.jsonl").write_text("".join(line + "\n" for line in report.jsonl_lines()), encoding="utf-8")
    _table(report.summary_rows(), SUMMARY_COLUMNS, out, "summary", args.json)
    report.policy.save(out / "policy.ckpt")
    evals = {"initial": asdict(report.initial_eval), "final": asdict(report.final_eval)}
    (out / "eval.json").write_text(json.dumps(evals, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    print(f"final success {report.final_success:.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _load(args)
    if args.episodes is not None:
        config = replace(config, eval_episodes=args.episodes)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _echo(config, out)
    try:
        policy = Policy.load(args.checkpoint)
    except (OSError, ValueError, KeyError) as exc:
        raise InvalidConfig(f"cannot load checkpoint {args.checkpoint!r}: {exc}") from exc
    result = evaluate(policy, eval_pool(config), config.eval_episodes, seed=config.seed)
    (out / "eval.json").write_text(json.dumps(asdict(result), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    print(f"success {result.success_rate:.3f} {result.by_level}", file=sys.stderr)
    return EXIT_OK


def _grid_exit(cells) -> int:
    failed = [c for c in cells if c["error"]]
    for c in failed:
        print(f"cell failed: {c['estimator']} value={c['value']} seed={c['seed']}: {c['error']}", file=sys.stderr)
    return EXIT_CELL_FAILED if failed else EXIT_OK


def cmd_sweep(args) -> int:
    config = _load(args)
    if args.seeds:
        config = replace(config, seeds=tuple(args.seeds))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _echo(config, out)
    cells = analysis.sweep(args.axis, args.values, config, workers=args.threads)
    _table(cells, analysis.CELL_COLUMNS, out, f"sweep_{args.axis}", args.json)
    summary = analysis.summarize_cells(cells, key="value")
    _table(summary, ("value", *analysis.ABLATION_SUMMARY_COLUMNS[1:]), out, f"sweep_{args.axis}_summary", args.json)
    return _grid_exit(cells)


def cmd_ablate(args) -> int:
    config = _load(args)
    if args.seeds:
        config = replace(config, seeds=tuple(args.seeds))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _echo(config, out)
    cells = analysis.ablation_grid(config, workers=args.threads)
    _table(cells, analysis.CELL_COLUMNS, out, "ablation", args.json)
    _table(analysis.summarize_cells(cells), analysis.ABLATION_SUMMARY_COLUMNS, out, "ablation_summary", args.json)
    return _grid_exit(cells)


def cmd_analyze(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.analysis == "zscore":
        rows = analysis.zscore_asymmetry_table(args.grid)
        _table(rows, analysis.ASYMMETRY_COLUMNS, out, "zscore_asymmetry", args.json)
        return EXIT_OK
    config = _load(args)
    _echo(config, out)
    rows = analysis.singleton_tracking(config, args.checkpoints, first_step_only=args.first_step)
    _table(rows, analysis.SINGLETON_COLUMNS, out, "singletons", args.json)
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "ablate": cmd_ablate,
    "analyze": cmd_analyze,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalDivergence as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
