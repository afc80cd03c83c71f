"""Command line harness: run scenarios, check traces, play games, poke labels.

Environment overrides: STABREG_SEED replaces the scenario seed, STABREG_OUT
replaces the output directory.  Exit codes: 0 success, 1 check/lemma
failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .checker import TraceError, find_stabilization, parse_trace
from .game import GameError, STRATEGIES, make_hider, play
from .labels import LabelError, LabelParams, format_label, next_label, parse_label, precedes_b
from .sim import ScenarioError, parse_scenario, run_scenario


def _out_dir(args) -> Path:
    out = os.environ.get("STABREG_OUT") or args.out or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_run(args) -> int:
    try:
        config = parse_scenario(Path(args.config).read_text())
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ScenarioError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return 2
    seed_env = os.environ.get("STABREG_SEED")
    if args.seed is not None:
        config.seed = args.seed
    elif seed_env is not None:
        config.seed = int(seed_env)
    out = _out_dir(args)
    trace_path = Path(args.trace) if args.trace else out / f"trace-{config.seed}.jsonl"
    metrics_path = (
        Path(args.metrics) if args.metrics else out / f"metrics-{config.seed}.json"
    )
    lines, metrics = run_scenario(config, audit=args.audit)
    trace_path.write_text("\n".join(lines) + "\n")
    metrics_path.write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n")
    print(f"trace: {trace_path}")
    print(f"metrics: {metrics_path}")
    return 0


def cmd_check(args) -> int:
    try:
        lines = Path(args.trace).read_text().splitlines()
    except OSError as exc:
        print(f"error: cannot read trace: {exc}", file=sys.stderr)
        return 2
    metrics = None
    if args.metrics:
        try:
            metrics = json.loads(Path(args.metrics).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read metrics: {exc}", file=sys.stderr)
            return 2
    try:
        trace = parse_trace(lines)
    except TraceError as exc:
        print(f"error: malformed trace: {exc}", file=sys.stderr)
        return 2
    verdict = find_stabilization(trace, metrics)
    print(json.dumps(verdict.to_dict(), sort_keys=True, indent=2))
    return 0 if verdict.atomic_from is not None else 1


def cmd_game(args) -> int:
    if args.m < 1:
        print("error: m must be >= 1", file=sys.stderr)
        return 2
    if args.strategy not in STRATEGIES:
        known = ", ".join(sorted(STRATEGIES))
        print(f"error: unknown strategy {args.strategy!r} (known: {known})",
              file=sys.stderr)
        return 2
    params = LabelParams(2 * args.m)
    max_round = 0
    failures = 0
    for seed in range(args.seed_start, args.seed_start + args.seeds):
        import random as _random

        hider = make_hider(args.strategy, args.m, _random.Random(seed ^ 0x5EED), params)
        result = play(
            hider,
            args.m,
            seed=seed,
            params=params,
            queue_capacity=args.queue_capacity,
        )
        if args.transcript:
            for record in result.transcript:
                print(json.dumps({
                    "seed": seed,
                    "round": record.round,
                    "finder": format_label(record.finder_label),
                    "response": (
                        format_label(record.response) if record.response else None
                    ),
                }))
        if not result.won or result.winning_round > args.m + 1:
            failures += 1
        if result.won:
            max_round = max(max_round, result.winning_round)
    print(f"games: {args.seeds}  max winning round: {max_round}  "
          f"bound m+1: {args.m + 1}  failures: {failures}")
    return 1 if failures else 0


def cmd_labels(args) -> int:
    params = LabelParams(args.k)
    try:
        labels = [parse_label(text) for text in args.labels]
        for label in labels:
            label.validate(params)
        if args.op == "compare":
            if len(labels) != 2:
                print("error: compare takes exactly two labels", file=sys.stderr)
                return 2
            a, b = labels
            print(json.dumps({
                "a_precedes_b": precedes_b(a, b),
                "b_precedes_a": precedes_b(b, a),
            }))
        else:  # next
            result = next_label(labels, params)
            print(format_label(result))
    except LabelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stabreg",
        description="Crash-tolerant self-stabilizing shared register simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario, write trace and metrics")
    p_run.add_argument("--config", required=True, help="flat key = value scenario file")
    p_run.add_argument("--seed", type=int, help="override the scenario seed")
    p_run.add_argument("--out", help="output directory (default: cwd)")
    p_run.add_argument("--trace", help="explicit trace output path")
    p_run.add_argument("--metrics", help="explicit metrics output path")
    p_run.add_argument("--audit", action="store_true",
                       help="verify link capacity / provenance invariants per step")
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="check a trace for atomicity")
    p_check.add_argument("trace", help="JSONL trace file")
    p_check.add_argument("--metrics", help="metrics file to fold into the verdict")
    p_check.set_defaults(func=cmd_check)

    p_game = sub.add_parser("game", help="play finder/hider guessing games")
    p_game.add_argument("--m", type=int, required=True, help="hidden set bound")
    p_game.add_argument("--strategy", default="static",
                        help="hider strategy (%s)" % ", ".join(sorted(STRATEGIES)))
    p_game.add_argument("--seeds", type=int, default=100, help="number of games")
    p_game.add_argument("--seed-start", type=int, default=0)
    p_game.add_argument("--queue-capacity", type=int,
                        help="finder queue capacity override (default 2m)")
    p_game.add_argument("--transcript", action="store_true",
                        help="emit per-round JSON lines")
    p_game.set_defaults(func=cmd_game)

    p_labels = sub.add_parser("labels", help="evaluate label operators on literals")
    p_labels.add_argument("--k", type=int, required=True)
    p_labels.add_argument("op", choices=("compare", "next"))
    p_labels.add_argument("labels", nargs="+",
                          help="label literals like '(2|4,5)'")
    p_labels.set_defaults(func=cmd_labels)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
