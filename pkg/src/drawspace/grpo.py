"""Group-relative advantage and clipped-surrogate arithmetic.

Pure numeric functions over caller-supplied scores, per-token log
probabilities, and masks. No model, no gradients: this is the math a
trainer plugs its tensors into.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEGENERATE_STD = 1e-8
DEFAULT_CLIP_EPSILON = 0.2


class GroupTooSmallError(ValueError):
    """Advantage normalization needs at least two rollouts."""


class ShapeError(ValueError):
    """Sequence lengths disagree."""


class AlignmentError(ValueError):
    """Token segments do not line up with the trace's turns."""


def group_advantages(scores) -> list[float]:
    """Normalize a group of rollout scores to zero mean and unit spread.

    Uses the population standard deviation. A group whose spread is at or
    below 1e-8 carries no ranking signal and maps to all zeros.
    """
    s = np.asarray(list(scores), dtype=np.float64)
    if s.ndim != 1 or s.size < 2:
        raise GroupTooSmallError(f"need a flat group of >= 2 scores, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    std = float(s.std())  # population estimator (ddof=0)
    if std <= DEGENERATE_STD:
        return [0.0] * s.size
    return list((s - s.mean()) / std)


@dataclass(frozen=True)
class SurrogateResult:
    terms: np.ndarray        # per-token surrogate values, 0 where masked out
    masked_mean: float       # sum(terms) / n_tokens
    n_tokens: int            # unmasked token count N


def clipped_surrogate(logp_new, logp_old, advantage: float,
                      epsilon: float = DEFAULT_CLIP_EPSILON,
                      mask=None) -> SurrogateResult:
    """Per-token min(ratio * A, clip(ratio, 1-eps, 1+eps) * A) and its masked mean.

    ratio = exp(logp_new - logp_old) elementwise. Masked-out tokens contribute
    zero and are excluded from the normalization count.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    new = np.asarray(logp_new, dtype=np.float64)
    old = np.asarray(logp_old, dtype=np.float64)
    if new.shape != old.shape or new.ndim != 1:
        raise ShapeError(f"log-prob shapes disagree: {new.shape} vs {old.shape}")
    if mask is None:
        m = np.ones(new.shape, dtype=bool)
    else:
        m = np.asarray(mask, dtype=bool)
        if m.shape != new.shape:
            raise ShapeError(f"mask shape {m.shape} does not match tokens {new.shape}")

    ratio = np.exp(new - old)
    a = float(advantage)
    terms = np.minimum(ratio * a, np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * a)
    terms = np.where(m, terms, 0.0)
    n = int(m.sum())
    if n == 0:
        raise ShapeError("mask excludes every token; nothing to normalize")
    return SurrogateResult(terms=terms, masked_mean=float(terms.sum() / n), n_tokens=n)


@dataclass(frozen=True)
class TokenSegment:
    """One contiguous span of the tokenized conversation.

    kind: 'prompt' (injected system/user text), 'response' (the policy's own
    thought and operation tokens), or 'observation' (tool output shown back).
    """

    kind: str
    length: int

    def __post_init__(self):
        if self.kind not in ("prompt", "response", "observation"):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.length < 0:
            raise ValueError(f"segment length must be >= 0, got {self.length}")


def token_mask(trace, segments: list[TokenSegment]) -> np.ndarray:
    """Boolean mask over the concatenated segments: True exactly on response tokens.

    The trace must align: one response segment per reasoning step. Raises
    AlignmentError otherwise.
    """
    n_responses = sum(1 for seg in segments if seg.kind == "response")
    if n_responses != len(trace.steps):
        raise AlignmentError(
            f"trace has {len(trace.steps)} steps but segments carry "
            f"{n_responses} response spans"
        )
    parts = [np.full(seg.length, seg.kind == "response", dtype=bool) for seg in segments]
    if not parts:
        return np.zeros(0, dtype=bool)
    return np.concatenate(parts)


@dataclass(frozen=True)
class RolloutGroup:
    """G rollouts of one task: scores plus per-trace token tensors."""

    scores: tuple[float, ...]
    logp_new: tuple  # one 1-D array-like per trace
    logp_old: tuple
    masks: tuple

    def __post_init__(self):
        n = len(self.scores)
        if not len(self.logp_new) == len(self.logp_old) == len(self.masks) == n:
            raise ShapeError("per-trace fields must all have G entries")


def group_objective(group: RolloutGroup,
                    epsilon: float = DEFAULT_CLIP_EPSILON) -> tuple[float, list[SurrogateResult]]:
    """Group-mean of per-trace masked surrogate means, with per-trace details."""
    advantages = group_advantages(group.scores)
    results = []
    for a, new, old, m in zip(advantages, group.logp_new, group.logp_old, group.masks):
        results.append(clipped_surrogate(new, old, a, epsilon, m))
    objective = float(np.mean([r.masked_mean for r in results]))
    return objective, results
