"""Command-line entry point.

Subcommands: gen-maze, run, score, filter-rrs, advantages, eval. All
artifacts are JSONL and PNG files; every subcommand is deterministic given
identical inputs and seeds. Exit codes: 0 success, 1 runtime failure,
2 usage error. Configuration precedence: flags > config file > defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .episode import EpisodeConfig, ScriptedPolicy, Termination, run_episode
from .evaluation import JoinError, evaluate
from .grpo import group_advantages
from .maze import emit_dataset
from .reflect import rrs_filter
from .remote import RemoteConfig, RemotePolicy
from .reward import total_reward
from .tasks import TaskLoadError, load_tasks
from .traces import read_records_jsonl, record_to_trace, write_traces_jsonl


@dataclass(frozen=True)
class RunConfig:
    endpoint: str | None = None
    timeout: float = 60.0
    max_attempts: int = 3
    backoff_base: float = 0.5
    max_inflight: int = 8
    alpha: int = 42
    max_steps: int = 10
    frame_budget: int = 16
    beta: float = 0.0
    epsilon: float = 0.2
    numeric_threshold: float = 0.5
    parallel: int = 1
    seed: int = 0


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def load_run_config(path: str | None, overrides: dict) -> RunConfig:
    """Defaults, overlaid by a flat JSON config file, overlaid by set flags."""
    values: dict = {}
    if path is not None:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError(f"config file must hold a JSON object, got {type(data).__name__}")
        unknown = sorted(set(data) - _CONFIG_FIELDS)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        values.update(data)
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    return RunConfig(**values)


def _parse_int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_gen_maze(args) -> int:
    sizes = _parse_int_list(args.sizes)
    counts = _parse_int_list(args.counts)
    if len(counts) == 1:
        counts = counts * len(sizes)
    if len(counts) != len(sizes):
        raise ValueError(f"--counts needs 1 or {len(sizes)} values, got {len(counts)}")
    manifest = emit_dataset(dict(zip(sizes, counts)), args.seed, args.out,
                            parallel=args.parallel)
    print(f"wrote {manifest['count']} tasks to {manifest['path']} "
          f"(per size: {manifest['per_size']})")
    return 0


def cmd_run(args) -> int:
    cfg = load_run_config(args.config, {
        "endpoint": args.endpoint,
        "alpha": args.alpha,
        "max_steps": args.max_steps,
        "frame_budget": args.frame_budget,
        "parallel": args.parallel,
    })
    tasks = load_tasks(args.tasks)

    if args.policy == "remote":
        if cfg.endpoint is None:
            raise ValueError("remote policy needs --endpoint or an endpoint config entry")
        shared = RemotePolicy(RemoteConfig(
            url=cfg.endpoint, timeout=cfg.timeout, max_attempts=cfg.max_attempts,
            backoff_base=cfg.backoff_base, max_inflight=cfg.max_inflight,
        ))

        def runner(task):
            ecfg = EpisodeConfig(alpha=cfg.alpha, max_steps=cfg.max_steps,
                                 frame_budget=cfg.frame_budget)
            return run_episode(shared, task, ecfg)
    else:  # oracle replay from the dataset's embedded traces
        missing = [t.id for t in tasks if "oracle_trace" not in t.meta]
        if missing:
            raise ValueError(
                f"{len(missing)} task(s) carry no oracle_trace (first: {missing[0]}); "
                "the oracle policy replays traces embedded by gen-maze"
            )

        def runner(task):
            script = task.meta["oracle_trace"]
            ecfg = EpisodeConfig(
                alpha=cfg.alpha,
                max_steps=max(cfg.max_steps, len(script) + 1),
                frame_budget=cfg.frame_budget,
            )
            return run_episode(ScriptedPolicy(script), task, ecfg)

    if cfg.parallel > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallel) as pool:
            traces = list(pool.map(runner, tasks))
    else:
        traces = [runner(t) for t in tasks]

    write_traces_jsonl(traces, args.out, image_dir=args.image_dir)
    by_cause = Counter(tr.termination.value for tr in traces)
    summary = ", ".join(f"{k}={v}" for k, v in sorted(by_cause.items()))
    print(f"wrote {len(traces)} traces to {args.out} ({summary})")
    return 1 if by_cause.get(Termination.POLICY_ERROR.value) else 0


def _join_records(tasks_path, traces_path):
    tasks = {t.id: t for t in load_tasks(tasks_path, load_images=False)}
    pairs = []
    for record in read_records_jsonl(traces_path):
        task = tasks.get(record["task_id"])
        if task is None:
            raise JoinError(f"trace {record['task_id']!r} has no matching task")
        pairs.append((record, record_to_trace(record), task))
    return pairs


def cmd_score(args) -> int:
    cfg = load_run_config(args.config, {"beta": args.beta})
    pairs = _join_records(args.tasks, args.traces)
    totals = []
    with open(args.out, "w", encoding="utf-8") as fh:
        for record, trace, task in pairs:
            breakdown = total_reward(trace, task.answer, cfg.beta)
            out = dict(record)
            out["gt"] = task.answer
            out["reward"] = breakdown.to_json_obj()
            fh.write(json.dumps(out, sort_keys=True) + "\n")
            totals.append(breakdown.total)
    mean = sum(totals) / len(totals) if totals else 0.0
    print(f"scored {len(totals)} traces to {args.out} (mean total {mean:.4f})")
    return 0


def cmd_filter_rrs(args) -> int:
    cfg = load_run_config(args.config, {
        "beta": args.beta, "numeric_threshold": args.numeric_threshold,
    })
    pairs = _join_records(args.tasks, args.traces)
    accepted = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for record, trace, task in pairs:
            if rrs_filter(trace, task.answer, cfg.beta, cfg.numeric_threshold):
                fh.write(json.dumps(record, sort_keys=True) + "\n")
                accepted += 1
    total = len(pairs)
    rate = accepted / total if total else 0.0
    report = {"total": total, "accepted": accepted, "acceptance_rate": rate}
    if args.report is not None:
        Path(args.report).write_text(json.dumps(report, sort_keys=True, indent=2) + "\n",
                                     encoding="utf-8")
    print(f"accepted {accepted}/{total} traces ({rate:.1%}) -> {args.out}")
    return 0


def cmd_advantages(args) -> int:
    records = read_records_jsonl(args.groups)
    with open(args.out, "w", encoding="utf-8") as fh:
        for i, rec in enumerate(records, start=1):
            scores = rec.get("scores")
            if not isinstance(scores, list):
                raise ValueError(f"group record {i} has no 'scores' list")
            out = dict(rec)
            out["advantages"] = group_advantages(scores)
            fh.write(json.dumps(out, sort_keys=True) + "\n")
    print(f"wrote advantages for {len(records)} groups to {args.out}")
    return 0


def cmd_eval(args) -> int:
    tasks = load_tasks(args.tasks, load_images=False)
    traces = [record_to_trace(r) for r in read_records_jsonl(args.traces)]
    report = evaluate(traces, tasks)
    if args.out is not None:
        Path(args.out).write_text(
            json.dumps(report.to_json_obj(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8")
    print(report.format_table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drawspace",
        description="Drawing-based spatial reasoning environment and data tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-maze", help="generate a maze QA dataset with oracle traces")
    p.add_argument("--sizes", default="3,4,5,6", help="comma-separated grid sizes")
    p.add_argument("--counts", default="10", help="tasks per size (one value broadcasts)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_gen_maze)

    p = sub.add_parser("run", help="run episodes over a task file")
    p.add_argument("--tasks", required=True)
    p.add_argument("--policy", choices=("oracle", "remote"), default="oracle")
    p.add_argument("--endpoint", default=None, help="remote policy URL")
    p.add_argument("--out", required=True, help="output traces JSONL")
    p.add_argument("--image-dir", default=None, help="also dump registry PNGs here")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--alpha", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--frame-budget", type=int, default=None)
    p.add_argument("--parallel", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", help="score traces against task ground truth")
    p.add_argument("--tasks", required=True)
    p.add_argument("--traces", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("filter-rrs", help="keep correct, format-clean, reflective traces")
    p.add_argument("--tasks", required=True)
    p.add_argument("--traces", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--numeric-threshold", type=float, default=None)
    p.add_argument("--report", default=None, help="write summary JSON here")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_filter_rrs)

    p = sub.add_parser("advantages", help="group-normalized advantages from grouped scores")
    p.add_argument("--groups", required=True, help="JSONL with a 'scores' list per record")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_advantages)

    p = sub.add_parser("eval", help="aggregate metrics over traces")
    p.add_argument("--tasks", required=True)
    p.add_argument("--traces", required=True)
    p.add_argument("--out", default=None, help="write report JSON here")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, TaskLoadError, JoinError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
