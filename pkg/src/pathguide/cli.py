"""Command-line entry point: ``pathguide bench | replan-one | map-gen``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .benchmark import (
    dump_artifacts,
    format_summary,
    generate_map,
    run_benchmark,
    run_task,
    summarize,
    task_seed,
    verify_dump,
    write_benchmark,
)
from .config import TIERS, ScenarioConfig, load_config
from .exceptions import RejectedInput
from .voxel_map import save_map

log = logging.getLogger("pathguide")


def _base_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    return cfg.updated(
        seed=args.seed,
        test_mode=True if args.test_mode else None,
        workers=getattr(args, "workers", None),
    )


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="scenario file (key = value lines)")
    p.add_argument("--seed", type=int, help="base random seed")
    p.add_argument("--test-mode", action="store_true", help="iteration caps only, no wall-clock budgets")


def _single(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tier", choices=TIERS, default="medium")
    p.add_argument("--task-id", type=int, default=0)


def cmd_bench(args) -> int:
    cfg = _base_config(args).updated(tasks=args.tasks, tier=args.tier)

    def progress(result):
        log.info("%s task %d: guided=%s unguided=%s", result.task.tier, result.task.task_id,
                 result.records[0].success, result.records[1].success)

    results = run_benchmark(cfg, on_result=progress)
    paths = write_benchmark(results, cfg, args.out)
    sys.stdout.write(format_summary(summarize([r for res in results for r in res.records])))
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return 0


def _task(args, cfg: ScenarioConfig):
    return generate_map(args.tier, task_seed(cfg.seed, args.tier, args.task_id), cfg, args.task_id)


def cmd_replan_one(args) -> int:
    cfg = _base_config(args)
    result = run_task(_task(args, cfg), cfg)
    out = dump_artifacts(result, cfg, args.dump)
    guided, unguided = result.records
    print(f"guided success={guided.success} candidates={guided.candidates} smoothness={guided.smoothness}")
    print(f"unguided success={unguided.success} smoothness={unguided.smoothness}")
    print(f"recomputed from dump: {verify_dump(out)}")
    return 0


def cmd_map_gen(args) -> int:
    cfg = _base_config(args)
    task = _task(args, cfg)
    save_map(args.out, task.field.occupancy, task.field.spec)
    print(f"start {' '.join(map(repr, task.start.tolist()))}")
    print(f"goal {' '.join(map(repr, task.goal.tolist()))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathguide", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run the random-map benchmark")
    _common(bench)
    bench.add_argument("--tasks", type=int, help="tasks per tier")
    bench.add_argument("--tier", choices=(*TIERS, "all"))
    bench.add_argument("--out", type=Path, default=Path("bench_out"))
    bench.add_argument("--workers", type=int, help="parallel tasks")
    bench.set_defaults(func=cmd_bench)

    one = sub.add_parser("replan-one", help="run one task and dump plot-ready artifacts")
    _common(one)
    _single(one)
    one.add_argument("--dump", type=Path, required=True)
    one.set_defaults(func=cmd_replan_one)

    gen = sub.add_parser("map-gen", help="write one generated map")
    _common(gen)
    _single(gen)
    gen.add_argument("--out", type=Path, required=True)
    gen.set_defaults(func=cmd_map_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (RejectedInput, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
