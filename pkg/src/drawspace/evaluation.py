"""Metric aggregation: accuracy/MRA per subtask, behavioral statistics, pass@k."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .episode import EpisodeTrace, iter_trace_ops
from .reflect import detect_reflection
from .reward import score_correct
from .tasks import Task


class JoinError(Exception):
    """Traces and tasks do not line up one-to-one."""


@dataclass(frozen=True)
class EvalReport:
    overall: float
    per_subtask: dict  # subtask -> mean score
    counts: dict       # subtask -> item count
    n: int
    reflection_ratio: float
    mean_steps: float
    mean_box_ops: float
    mean_line_ops: float

    def to_json_obj(self) -> dict:
        return {
            "overall": self.overall,
            "per_subtask": dict(self.per_subtask),
            "counts": dict(self.counts),
            "n": self.n,
            "behavior": {
                "reflection_ratio": self.reflection_ratio,
                "mean_steps": self.mean_steps,
                "mean_box_ops": self.mean_box_ops,
                "mean_line_ops": self.mean_line_ops,
            },
        }

    def format_table(self) -> str:
        rows = [("subtask", "score", "n")]
        for name in sorted(self.per_subtask):
            rows.append((name, f"{self.per_subtask[name]:.4f}", str(self.counts[name])))
        rows.append(("overall", f"{self.overall:.4f}", str(self.n)))
        w0 = max(len(r[0]) for r in rows)
        w1 = max(len(r[1]) for r in rows)
        lines = [f"{r[0]:<{w0}}  {r[1]:>{w1}}  {r[2]:>5}" for r in rows]
        lines.insert(1, "-" * len(lines[0]))
        lines.append("")
        lines.append(f"reflection ratio  {self.reflection_ratio:.4f}")
        lines.append(f"mean steps        {self.mean_steps:.4f}")
        lines.append(f"mean box ops      {self.mean_box_ops:.4f}")
        lines.append(f"mean line ops     {self.mean_line_ops:.4f}")
        return "\n".join(lines)


def _join(traces: Sequence[EpisodeTrace], tasks: Sequence[Task]):
    by_id = {t.id: t for t in tasks}
    joined = []
    seen = set()
    for trace in traces:
        task = by_id.get(trace.task_id)
        if task is None:
            raise JoinError(f"trace {trace.task_id!r} has no matching task")
        if trace.task_id in seen:
            raise JoinError(f"task {trace.task_id!r} has multiple traces; "
                            "evaluate expects one attempt per task")
        seen.add(trace.task_id)
        joined.append((trace, task))
    return joined


def evaluate(traces: Sequence[EpisodeTrace], tasks: Sequence[Task]) -> EvalReport:
    """Mean exact-match (choice) / MRA (numeric) per subtask, unweighted
    overall mean across subtasks, plus trace-level behavioral statistics."""
    joined = _join(traces, tasks)
    if not joined:
        raise ValueError("nothing to evaluate: no traces given")

    groups: dict[str, list[float]] = {}
    for trace, task in joined:
        key = task.subtask if task.subtask is not None else "all"
        groups.setdefault(key, []).append(score_correct(trace, task.answer))
    per_subtask = {k: sum(v) / len(v) for k, v in groups.items()}
    counts = {k: len(v) for k, v in groups.items()}
    overall = sum(per_subtask.values()) / len(per_subtask)

    n = len(joined)
    n_reflective = sum(1 for tr, _ in joined if detect_reflection(tr) is not None)
    steps = [len(tr.steps) for tr, _ in joined]
    box_counts = []
    line_counts = []
    for tr, _ in joined:
        ops = [op for _, _, op in iter_trace_ops(tr)]
        box_counts.append(sum(1 for op in ops if op.kind == "box"))
        line_counts.append(sum(1 for op in ops if op.kind == "line"))

    return EvalReport(
        overall=overall,
        per_subtask=per_subtask,
        counts=counts,
        n=n,
        reflection_ratio=n_reflective / n,
        mean_steps=sum(steps) / n,
        mean_box_ops=sum(box_counts) / n,
        mean_line_ops=sum(line_counts) / n,
    )


def attempt_correct(trace: EpisodeTrace, task: Task,
                    numeric_threshold: float = 0.5) -> bool:
    """Binary correctness for consolidation metrics: exact match for choice,
    MRA at or above the threshold for numeric."""
    s = score_correct(trace, task.answer)
    if task.qtype == "choice":
        return s == 1.0
    return s >= numeric_threshold


def pass_at_k(attempts: Sequence[Sequence[bool]], k: int) -> float:
    """Fraction of tasks with at least one hit among their first k attempts."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not attempts:
        raise ValueError("no attempt rows given")
    for i, row in enumerate(attempts):
        if len(row) < k:
            raise ValueError(f"task row {i} has {len(row)} attempts, need >= {k}")
    return sum(1 for row in attempts if any(row[:k])) / len(attempts)
