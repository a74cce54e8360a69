"""Rollout state machine: think -> draw -> observe loops against a policy.

An episode owns an append-only image registry seeded with the task's input
images. Each step the policy sees the full conversation so far (question,
all images, every prior turn), replies in the response grammar, and either
draws (outputs are executed and appended to the registry, then shown back)
or answers. Episodes end with exactly one termination cause:

  answered       final answer given (possibly on the forced final turn)
  no-op-fault    a turn carried neither operations nor an answer
  image-cap      a turn's operations would push the registry past alpha
  duplicate-op   an operation repeats an already-executed one
  step-cap       the forced final turn still produced no answer
  policy-error   the policy transport failed

When the step budget or the image cap is reached before an answer, a final
prompt demanding only an answer is issued once; operations in that reply
are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol, Sequence

import numpy as np

from .canvas import DrawingError, RasterImage, draw_bbox, draw_polyline
from .dsl import (
    DrawOperation,
    DslError,
    PolicyResponse,
    parse_final_response,
    parse_response,
)


class Termination(Enum):
    ANSWERED = "answered"
    NO_OP_FAULT = "no-op-fault"
    IMAGE_CAP = "image-cap"
    DUPLICATE_OP = "duplicate-op"
    STEP_CAP = "step-cap"
    POLICY_ERROR = "policy-error"


class PolicyError(Exception):
    """Transport or protocol failure talking to a policy."""


class RegistryIndexError(Exception):
    """Image index outside the registry's current range."""


class ImageRegistry:
    """Ordered, append-only store of images addressed by stable 1-based index."""

    def __init__(self):
        self._images: list[RasterImage] = []
        self._provenance: list[tuple] = []
        self._n_inputs = 0

    def add_input(self, image: RasterImage) -> int:
        if self._n_inputs != len(self._images):
            raise ValueError("inputs must be added before any operation outputs")
        self._images.append(image)
        self._provenance.append(("input", len(self._images)))
        self._n_inputs += 1
        return len(self._images)

    def add_output(self, image: RasterImage, step: int, op_index: int) -> int:
        self._images.append(image)
        self._provenance.append(("op", step, op_index))
        return len(self._images)

    def get(self, k: int) -> RasterImage:
        if not 1 <= k <= len(self._images):
            raise RegistryIndexError(
                f"image index {k} out of range 1..{len(self._images)}"
            )
        return self._images[k - 1]

    def __len__(self) -> int:
        return len(self._images)

    @property
    def n_inputs(self) -> int:
        return self._n_inputs

    @property
    def provenance(self) -> tuple[tuple, ...]:
        return tuple(self._provenance)

    def images(self) -> tuple[RasterImage, ...]:
        return tuple(self._images)


@dataclass(frozen=True)
class EpisodeConfig:
    alpha: int = 42           # max cumulative images, inputs included
    max_steps: int = 10       # reasoning steps, the forced final turn included
    frame_budget: int = 16    # uniform sample size for video inputs
    qtype: str | None = None  # override the task's question type when set

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.alpha < 1:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if self.frame_budget < 1:
            raise ValueError(f"frame_budget must be >= 1, got {self.frame_budget}")


@dataclass(frozen=True)
class ExecutedOp:
    op: DrawOperation
    output_index: int | None  # registry index of the observation, None on failure
    error: str | None

    def __post_init__(self):
        if (self.output_index is None) == (self.error is None):
            raise ValueError("exactly one of output_index/error must be set")


@dataclass(frozen=True)
class ReasoningStep:
    t: int
    thought: str
    executed: tuple[ExecutedOp, ...]
    answer: str | None
    parse_error: str | None = None
    forced: bool = False

    @property
    def observation_indices(self) -> tuple[int, ...]:
        return tuple(e.output_index for e in self.executed if e.output_index is not None)


@dataclass(frozen=True)
class EpisodeTrace:
    task_id: str
    qtype: str
    steps: tuple[ReasoningStep, ...]
    termination: Termination
    final_answer: str | None
    registry: ImageRegistry


def iter_trace_ops(trace: EpisodeTrace) -> list[tuple[int, int, DrawOperation]]:
    """All operations in path order as (step t, op index u, op), both 1-based.

    Includes operations that failed to execute; they are part of the path.
    """
    out = []
    for step_rec in trace.steps:
        for u, ex in enumerate(step_rec.executed, start=1):
            out.append((step_rec.t, u, ex.op))
    return out


# Conversation passed to policies: ordered messages of text and image parts.
# ImagePart carries the live image; transports encode PNG at the wire only.

@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    index: int
    image: RasterImage


@dataclass(frozen=True)
class Message:
    role: str  # system | user | assistant
    parts: tuple


class PolicyPort(Protocol):
    """A policy maps the conversation so far to one raw response text.

    Implementations must either be deterministic given an explicit seed or
    document themselves as stochastic.
    """

    def next(self, conversation: list[Message]) -> str: ...


SYSTEM_PROMPT = """\
You are a visual reasoning assistant. You may draw on the provided images to \
work through spatial questions step by step.

Reply format, every turn:
- Reason in plain text.
- To draw, emit a fenced block: a line containing exactly ```draw, then one \
JSON object per line, then a line containing exactly ```. Records look like
  {"kind": "box", "k": 1, "p": [x1, y1, x2, y2], "l": "label"}
  {"kind": "line", "k": 1, "p": [[x1, y1], [x2, y2]], "l": "label"}
  where k is the 1-based index of the image to annotate.
- Each executed operation appends its annotated output image to the sequence; \
you will be shown the new images and their indices.
- To finish, emit a line starting with ANSWER: followed by your answer, and \
no drawing operations in that reply.
- Never put drawing operations and an ANSWER line in the same reply."""

FOLLOWUP_PROMPT = "Continue. Draw further operations or give the final answer."

FINAL_ANSWER_PROMPT = (
    "Stop drawing. You must answer now. "
    "Reply with a single line: ANSWER: <your answer>."
)


class ScriptedPolicy:
    """Deterministic PolicyPort that replays a fixed list of responses.

    The reply for turn t is scripts[t-1]; past the end, the last entry
    repeats. Conversation content is ignored.
    """

    def __init__(self, scripts: Sequence[str]):
        if not scripts:
            raise ValueError("need at least one scripted response")
        self._scripts = list(scripts)

    def next(self, conversation: list[Message]) -> str:
        turn = sum(1 for m in conversation if m.role == "assistant")
        return self._scripts[min(turn, len(self._scripts) - 1)]


def sample_frames(frames: Sequence[RasterImage], budget: int) -> list[RasterImage]:
    """Uniformly sample at most `budget` frames, keeping temporal order."""
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if len(frames) <= budget:
        return list(frames)
    idx = np.linspace(0, len(frames) - 1, num=budget).round().astype(int)
    return [frames[i] for i in idx]


def initial_messages(question: str, registry: ImageRegistry) -> list[Message]:
    parts: list = [TextPart(f"Question: {question}")]
    for n in range(1, registry.n_inputs + 1):
        parts.append(TextPart(f"Image {n}:"))
        parts.append(ImagePart(n, registry.get(n)))
    return [
        Message(role="system", parts=(TextPart(SYSTEM_PROMPT),)),
        Message(role="user", parts=tuple(parts)),
    ]


def observation_message(step: ReasoningStep, registry: ImageRegistry) -> Message:
    parts: list = []
    for j, ex in enumerate(step.executed, start=1):
        if ex.output_index is not None:
            parts.append(TextPart(f"Operation {j} executed; result is image {ex.output_index}:"))
            parts.append(ImagePart(ex.output_index, registry.get(ex.output_index)))
        else:
            parts.append(TextPart(f"Operation {j} failed: {ex.error}"))
    parts.append(TextPart(FOLLOWUP_PROMPT))
    return Message(role="user", parts=tuple(parts))


@dataclass
class EpisodeState:
    """Mutable in-flight episode; owned by exactly one run_episode call."""

    config: EpisodeConfig
    registry: ImageRegistry
    steps: list[ReasoningStep] = field(default_factory=list)
    executed_canonicals: set = field(default_factory=set)

    @property
    def next_t(self) -> int:
        return len(self.steps) + 1


def check_termination(state: EpisodeState, resp: PolicyResponse) -> Termination | None:
    """Pure pre-step check of the early-termination rules, in fixed order.

    1. A turn with neither operations nor an answer is a no-op fault.
    2. Operations that would push the registry past alpha hit the image cap.
    3. An operation matching an already-executed one (or another operation in
       the same turn) under canonical equality is a duplicate.
    """
    if not resp.ops and resp.final_answer is None:
        return Termination.NO_OP_FAULT
    if len(state.registry) + len(resp.ops) > state.config.alpha:
        return Termination.IMAGE_CAP
    seen = set()
    for op in resp.ops:
        key = op.canonical()
        if key in state.executed_canonicals or key in seen:
            return Termination.DUPLICATE_OP
        seen.add(key)
    return None


def execute_op(registry: ImageRegistry, op: DrawOperation, step_t: int,
               op_index: int) -> ExecutedOp:
    """Run one operation against the registry; failures never raise."""
    try:
        target = registry.get(op.k)
    except RegistryIndexError as exc:
        return ExecutedOp(op=op, output_index=None, error=str(exc))
    try:
        if op.kind == "box":
            out = draw_bbox(target, op.p, op.l)
        else:
            out = draw_polyline(target, op.p, op.l)
    except DrawingError as exc:
        return ExecutedOp(op=op, output_index=None, error=f"{type(exc).__name__}: {exc}")
    index = registry.add_output(out, step_t, op_index)
    return ExecutedOp(op=op, output_index=index, error=None)


def step(state: EpisodeState, resp: PolicyResponse) -> ReasoningStep:
    """Execute one non-terminating draw turn and append it to the trace.

    Operations run in order; an operation may target any image already in the
    registry, including outputs of earlier operations in the same turn. A
    failed operation is recorded and execution continues with the rest.
    """
    t = state.next_t
    executed = []
    for j, op in enumerate(resp.ops, start=1):
        ex = execute_op(state.registry, op, t, j)
        if ex.output_index is not None:
            state.executed_canonicals.add(op.canonical())
        executed.append(ex)
    rec = ReasoningStep(t=t, thought=resp.thought, executed=tuple(executed),
                        answer=resp.final_answer)
    state.steps.append(rec)
    return rec


def run_episode(policy: PolicyPort, task, cfg: EpisodeConfig = EpisodeConfig()) -> EpisodeTrace:
    """Drive a policy through one full episode over `task`.

    `task` needs: id, question, images (non-empty), qtype, and a video flag.
    Video inputs are uniformly pre-sampled down to the frame budget.
    """
    images = list(task.images)
    if not images:
        raise ValueError(f"task {task.id} has no input images")
    if getattr(task, "video", False):
        images = sample_frames(images, cfg.frame_budget)
    if len(images) > cfg.alpha:
        raise ValueError(
            f"task {task.id} has {len(images)} inputs, over the image cap {cfg.alpha}"
        )
    qtype = cfg.qtype or task.qtype

    registry = ImageRegistry()
    for img in images:
        registry.add_input(img)
    state = EpisodeState(config=cfg, registry=registry)
    conversation = initial_messages(task.question, registry)

    termination: Termination | None = None
    final_answer: str | None = None

    while termination is None:
        t = state.next_t
        forced = t >= cfg.max_steps or len(registry) >= cfg.alpha
        if forced:
            conversation.append(Message(role="user", parts=(TextPart(FINAL_ANSWER_PROMPT),)))
        try:
            raw = policy.next(conversation)
        except PolicyError:
            termination = Termination.POLICY_ERROR
            break
        conversation.append(Message(role="assistant", parts=(TextPart(raw),)))

        if forced:
            # Drawing is over; only an answer counts, operations are ignored.
            thought = ""
            try:
                parsed = parse_response(raw)
                answer = parsed.final_answer
                thought = parsed.thought
            except DslError:
                answer = parse_final_response(raw)
            state.steps.append(ReasoningStep(
                t=t, thought=thought, executed=(), answer=answer, forced=True,
            ))
            final_answer = answer
            termination = Termination.ANSWERED if answer is not None else Termination.STEP_CAP
            break

        try:
            resp = parse_response(raw)
        except DslError as exc:
            # Unusable turn: no operations, no answer. Terminates as a no-op fault.
            state.steps.append(ReasoningStep(
                t=t, thought="", executed=(), answer=None, parse_error=str(exc),
            ))
            termination = Termination.NO_OP_FAULT
            break

        cause = check_termination(state, resp)
        if cause is not None:
            state.steps.append(ReasoningStep(
                t=t, thought=resp.thought, executed=(), answer=resp.final_answer,
            ))
            termination = cause
            break

        if resp.final_answer is not None:
            state.steps.append(ReasoningStep(
                t=t, thought=resp.thought, executed=(), answer=resp.final_answer,
            ))
            final_answer = resp.final_answer
            termination = Termination.ANSWERED
            break

        rec = step(state, resp)
        conversation.append(observation_message(rec, registry))

    return EpisodeTrace(
        task_id=task.id,
        qtype=qtype,
        steps=tuple(state.steps),
        termination=termination,
        final_answer=final_answer,
        registry=registry,
    )
