"""Rule-based episode reward: correctness, format adherence, and the gated total.

total = gate * (s_correct + s_format), where the gate opens only when
s_correct exceeds the threshold beta (strict) and the episode did not end in
a fault that forces the reward to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dsl import FinalAnswer, UnparseableAnswerError, extract_answer
from .episode import EpisodeTrace, Termination

# Confidence thresholds for mean relative accuracy: 0.50 to 0.95 in steps
# of 0.05, ten values. round() keeps each value the exact decimal literal.
CONFIDENCE_LADDER: tuple[float, ...] = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))

# Terminations that force the total reward to zero regardless of scores.
ZERO_REWARD_TERMINATIONS = frozenset({
    Termination.NO_OP_FAULT,
    Termination.IMAGE_CAP,
    Termination.DUPLICATE_OP,
    Termination.POLICY_ERROR,
})

DEFAULT_BETA = 0.0


@dataclass(frozen=True)
class RewardBreakdown:
    s_correct: float
    s_format: int
    gate: int
    total: float

    def to_json_obj(self) -> dict:
        return {
            "s_correct": self.s_correct,
            "s_format": self.s_format,
            "gate": self.gate,
            "total": self.total,
        }


def score_choice(gt: str, pred: FinalAnswer | None) -> int:
    """1 iff the predicted option letter matches ground truth; unparseable -> 0."""
    if pred is None:
        return 0
    return int(str(pred.value).strip().upper() == gt.strip().upper())


def score_numeric_mra(gt: float, pred: FinalAnswer | None,
                      ladder: tuple[float, ...] = CONFIDENCE_LADDER) -> float:
    """Mean relative accuracy over the confidence ladder.

    Fraction of thresholds theta for which |gt - pred| / |gt| < 1 - theta.
    A ground truth of exactly zero has no relative scale, so it falls back to
    an exact-match indicator. Unparseable or non-finite predictions score 0.
    """
    if not math.isfinite(gt):
        raise ValueError(f"ground truth must be finite, got {gt!r}")
    if pred is None:
        return 0.0
    value = float(pred.value)
    if not math.isfinite(value):
        return 0.0
    if gt == 0.0:
        return 1.0 if value == 0.0 else 0.0
    rel_err = abs(gt - value) / abs(gt)
    thresholds = np.asarray(ladder, dtype=np.float64)
    passed = rel_err < (1.0 - thresholds)
    return float(np.count_nonzero(passed)) / len(ladder)


def answered_value(trace: EpisodeTrace) -> FinalAnswer | None:
    """Extract the trace's final answer, or None when absent/unparseable."""
    if trace.final_answer is None:
        return None
    try:
        return extract_answer(trace.final_answer, trace.qtype)
    except UnparseableAnswerError:
        return None


def score_format(trace: EpisodeTrace) -> int:
    """1 iff every operation in the trace executed cleanly and the final answer parsed.

    Any step-level parse failure or per-op execution error zeroes the score.
    A trace with zero operations is vacuously all-executable.
    """
    for step in trace.steps:
        if step.parse_error is not None:
            return 0
        for op in step.executed:
            if op.error is not None:
                return 0
    return int(answered_value(trace) is not None)


def score_correct(trace: EpisodeTrace, gt: str | float) -> float:
    pred = answered_value(trace)
    if trace.qtype == "choice":
        if not isinstance(gt, str):
            raise ValueError(f"choice task needs a letter ground truth, got {gt!r}")
        return float(score_choice(gt, pred))
    if trace.qtype == "numeric":
        return score_numeric_mra(float(gt), pred)
    raise ValueError(f"unknown question type {trace.qtype!r}")


def combine_reward(s_correct: float, s_format: int, termination: Termination,
                   beta: float = DEFAULT_BETA) -> RewardBreakdown:
    """Gate arithmetic shared by total_reward and tests.

    The gate opens only when s_correct strictly exceeds beta AND the episode
    did not terminate in a zero-forcing fault.
    """
    gate = int(termination not in ZERO_REWARD_TERMINATIONS and s_correct > beta)
    return RewardBreakdown(
        s_correct=s_correct,
        s_format=s_format,
        gate=gate,
        total=gate * (s_correct + s_format),
    )


def total_reward(trace: EpisodeTrace, gt: str | float,
                 beta: float = DEFAULT_BETA) -> RewardBreakdown:
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must be in [0, 1), got {beta}")
    return combine_reward(score_correct(trace, gt), score_format(trace),
                          trace.termination, beta)
