"""Shared builders for synthetic traces, tasks, and policy responses."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from drawspace.canvas import BBoxGeometry, PolylineGeometry, RasterImage, new_canvas
from drawspace.dsl import DrawOperation
from drawspace.episode import (
    EpisodeTrace,
    ExecutedOp,
    ImageRegistry,
    ReasoningStep,
    Termination,
)


def make_op(kind="box", k=1, coords=(1.0, 2.0, 11.0, 12.0), label="thing") -> DrawOperation:
    if kind == "box":
        p = BBoxGeometry(*coords)
    else:
        p = PolylineGeometry(tuple(tuple(pt) for pt in coords))
    return DrawOperation(kind=kind, k=k, p=p, l=label)


def make_step(t, ops=(), answer=None, parse_error=None, errors=None, forced=False) -> ReasoningStep:
    executed = []
    for j, op in enumerate(ops):
        err = None if errors is None else errors.get(j)
        executed.append(ExecutedOp(
            op=op,
            output_index=None if err else 100 + 10 * t + j,
            error=err,
        ))
    return ReasoningStep(t=t, thought=f"thinking at step {t}", executed=tuple(executed),
                         answer=answer, parse_error=parse_error, forced=forced)


def make_trace(steps, termination=Termination.ANSWERED, final_answer="A",
               qtype="choice", task_id="t-0") -> EpisodeTrace:
    return EpisodeTrace(
        task_id=task_id,
        qtype=qtype,
        steps=tuple(steps),
        termination=termination,
        final_answer=final_answer,
        registry=ImageRegistry(),
    )


def answered_trace(answer="A", qtype="choice", n_draw_steps=1) -> EpisodeTrace:
    steps = [make_step(t, ops=(make_op(k=t, coords=(t, t, t + 10, t + 10), label=f"obj {t}"),))
             for t in range(1, n_draw_steps + 1)]
    steps.append(make_step(n_draw_steps + 1, answer=answer))
    return make_trace(steps, final_answer=answer, qtype=qtype)


@dataclass(frozen=True)
class TinyTask:
    """Minimal episode-task: one or more small blank canvases."""

    id: str = "tiny-0"
    question: str = "Which option is marked?"
    qtype: str = "choice"
    answer: str = "A"
    n_images: int = 1
    video: bool = False
    width: int = 96
    height: int = 72

    @property
    def images(self) -> tuple[RasterImage, ...]:
        return tuple(new_canvas(self.width, self.height) for _ in range(self.n_images))


def op_record(kind="box", k=1, p=(5, 5, 40, 40), label="target") -> str:
    if kind == "box":
        pj = list(p)
    else:
        pj = [list(pt) for pt in p]
    return json.dumps({"kind": kind, "k": k, "p": pj, "l": label})


def draw_block(*records: str) -> str:
    return "```draw\n" + "\n".join(records) + "\n```"
