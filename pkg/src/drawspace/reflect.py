"""Reflection and duplicate detection over episode traces, and the
reflective-rejection-sampling filter built on them.

Reflection: the trace revisits a label, drawing a DIFFERENT operation for a
normalized label it already used. Duplication: the trace repeats the SAME
operation (canonical equality). A single pair of operations can witness one
or the other, never both.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dsl import DrawOperation, normalize_label
from .episode import EpisodeTrace, iter_trace_ops
from .reward import DEFAULT_BETA, total_reward


@dataclass(frozen=True)
class ReflectionWitness:
    """Two distinct ops sharing a normalized label but not a canonical form.

    (t1, u) and (t2, v) are 1-based (step, op-within-step) coordinates in
    path order, with (t1, u) strictly before (t2, v).
    """

    t1: int
    u: int
    t2: int
    v: int
    label: str
    op1: DrawOperation
    op2: DrawOperation


@dataclass(frozen=True)
class DuplicateWitness:
    """Two ops with equal canonical form at distinct path positions."""

    t1: int
    u: int
    t2: int
    v: int
    op: DrawOperation


def detect_reflection(trace: EpisodeTrace) -> ReflectionWitness | None:
    """First pair (lexicographic in (t1, u, t2, v)) with equal normalized
    labels and unequal canonical tuples, or None."""
    ops = iter_trace_ops(trace)
    for i in range(len(ops)):
        t1, u, op1 = ops[i]
        key1 = op1.canonical()
        label1 = normalize_label(op1.l)
        for j in range(i + 1, len(ops)):
            t2, v, op2 = ops[j]
            if normalize_label(op2.l) == label1 and op2.canonical() != key1:
                return ReflectionWitness(t1=t1, u=u, t2=t2, v=v, label=label1,
                                         op1=op1, op2=op2)
    return None


def detect_duplicate(trace: EpisodeTrace) -> DuplicateWitness | None:
    """First pair (same order) with equal canonical tuples, or None."""
    ops = iter_trace_ops(trace)
    for i in range(len(ops)):
        t1, u, op1 = ops[i]
        key1 = op1.canonical()
        for j in range(i + 1, len(ops)):
            t2, v, op2 = ops[j]
            if op2.canonical() == key1:
                return DuplicateWitness(t1=t1, u=u, t2=t2, v=v, op=op1)
    return None


def rrs_filter(trace: EpisodeTrace, gt: str | float, beta: float = DEFAULT_BETA,
               numeric_threshold: float = 0.5) -> bool:
    """Accept a trace for the reflective dataset.

    Requires a correct answer (exact for choice; mean relative accuracy at or
    above `numeric_threshold` for numeric), a clean format score, a reflection
    witness, and a positive gated reward.
    """
    breakdown = total_reward(trace, gt, beta)
    if breakdown.s_format != 1 or breakdown.total <= 0.0:
        return False
    if trace.qtype == "choice":
        if breakdown.s_correct != 1.0:
            return False
    else:
        if breakdown.s_correct < numeric_threshold:
            return False
    return detect_reflection(trace) is not None
