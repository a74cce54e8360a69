"""Response grammar: thought text, drawing-operation records, final answers.

The wire format a policy must emit:

  * Drawing operations live in a fenced block opened by a line reading
    exactly ```draw and closed by a line reading ```. Each non-blank line
    in between is one JSON object with exactly the keys kind/k/p/l:

        {"kind": "box",  "k": 1, "p": [x1, y1, x2, y2], "l": "label"}
        {"kind": "line", "k": 2, "p": [[x, y], [x, y], ...], "l": "label"}

    k is a 1-based image index. Box coordinates are [x1, y1, x2, y2];
    polylines are a list of two or more [x, y] points.

  * A final answer is a line whose first non-blank content is `ANSWER:`
    (case-insensitive); the rest of the line is the answer text.

  * Everything else is the thought.

A response may carry operations or a final answer, never both. The parser
is total: every byte sequence yields a PolicyResponse or a structured
DslError, nothing else.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

from .canvas import BBoxGeometry, PolylineGeometry

FENCE_OPEN = "```draw"
FENCE_CLOSE = "```"

_ANSWER_RE = re.compile(r"^\s*answer\s*:\s*(.*?)\s*$", re.IGNORECASE)
_NUMBER_RE = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")
_UPPER_LETTER_RE = re.compile(r"\b([A-Z])\b")
_ANY_LETTER_RE = re.compile(r"\b([A-Za-z])\b")


class DslError(Exception):
    """Base class for grammar failures."""


class OpParseError(DslError):
    """A draw-block record is malformed. Carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class AmbiguousResponseError(DslError):
    """Response carries both drawing operations and a final answer."""


class UnparseableAnswerError(DslError):
    """Final answer text contains no extractable value."""


def normalize_label(label: str) -> str:
    """Canonical label form for equality checks: trim, collapse whitespace, lowercase."""
    return " ".join(label.split()).lower()


@dataclass(frozen=True)
class DrawOperation:
    """One drawing call: kind, target image index k, geometry p, label l."""

    kind: str
    k: int
    p: BBoxGeometry | PolylineGeometry
    l: str

    def __post_init__(self):
        if self.kind == "box":
            if not isinstance(self.p, BBoxGeometry):
                raise ValueError("box op requires BBoxGeometry")
        elif self.kind == "line":
            if not isinstance(self.p, PolylineGeometry):
                raise ValueError("line op requires PolylineGeometry")
        else:
            raise ValueError(f"unknown op kind {self.kind!r}")
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 1:
            raise ValueError(f"image index k must be an integer >= 1, got {self.k!r}")
        if not self.l.strip():
            raise ValueError("label must be non-empty after trimming")

    def canonical(self) -> tuple:
        """Equality key: (kind, k, exact coordinates, normalized label)."""
        if isinstance(self.p, BBoxGeometry):
            coords = (self.p.x1, self.p.y1, self.p.x2, self.p.y2)
        else:
            coords = tuple((x, y) for x, y in self.p.points)
        return (self.kind, self.k, coords, normalize_label(self.l))

    def to_json_obj(self) -> dict:
        if isinstance(self.p, BBoxGeometry):
            p = [self.p.x1, self.p.y1, self.p.x2, self.p.y2]
        else:
            p = [[x, y] for x, y in self.p.points]
        return {"kind": self.kind, "k": self.k, "p": p, "l": self.l}


@dataclass(frozen=True)
class PolicyResponse:
    """One policy turn: thought text, operations, optional final answer.

    Operations and a final answer are mutually exclusive; both may be absent
    (that combination terminates an episode as a fault, but is representable).
    """

    thought: str
    ops: tuple[DrawOperation, ...]
    final_answer: str | None

    def __post_init__(self):
        if self.ops and self.final_answer is not None:
            raise ValueError("a response cannot carry both operations and a final answer")


@dataclass(frozen=True)
class FinalAnswer:
    raw: str
    value: str | float
    qtype: str  # "choice" | "numeric"


def _reject_constant(name: str):
    raise ValueError(f"non-finite constant {name} not allowed")


def _as_finite_number(v, what: str, line: int) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise OpParseError(f"{what} must be a number, got {v!r}", line)
    f = float(v)
    if not math.isfinite(f):
        raise OpParseError(f"{what} must be finite, got {v!r}", line)
    return f


def _parse_op_record(text: str, line: int) -> DrawOperation:
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except (ValueError, RecursionError) as exc:
        raise OpParseError(f"record is not valid JSON ({exc})", line) from None
    if not isinstance(obj, dict):
        raise OpParseError(f"record must be a JSON object, got {type(obj).__name__}", line)
    if set(obj) != {"kind", "k", "p", "l"}:
        raise OpParseError(
            f"record must have exactly the keys kind/k/p/l, got {sorted(obj)}", line
        )

    kind = obj["kind"]
    if kind not in ("box", "line"):
        raise OpParseError(f"kind must be 'box' or 'line', got {kind!r}", line)
    k = obj["k"]
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise OpParseError(f"k must be an integer >= 1, got {k!r}", line)
    label = obj["l"]
    if not isinstance(label, str) or not label.strip():
        raise OpParseError(f"l must be a non-empty string, got {label!r}", line)

    p = obj["p"]
    if kind == "box":
        if not isinstance(p, list) or len(p) != 4:
            raise OpParseError(f"box p must be [x1, y1, x2, y2], got {p!r}", line)
        x1, y1, x2, y2 = (_as_finite_number(v, "box coordinate", line) for v in p)
        geom: BBoxGeometry | PolylineGeometry = BBoxGeometry(x1, y1, x2, y2)
    else:
        if not isinstance(p, list) or len(p) < 2:
            raise OpParseError(f"line p must be a list of >= 2 points, got {p!r}", line)
        points = []
        for pt in p:
            if not isinstance(pt, list) or len(pt) != 2:
                raise OpParseError(f"line point must be [x, y], got {pt!r}", line)
            points.append((
                _as_finite_number(pt[0], "point x", line),
                _as_finite_number(pt[1], "point y", line),
            ))
        geom = PolylineGeometry(tuple(points))
    return DrawOperation(kind=kind, k=k, p=geom, l=label)


def parse_response(text: str) -> PolicyResponse:
    """Parse a raw policy turn.

    Raises OpParseError for malformed records or an unterminated draw block,
    AmbiguousResponseError when both operations and an answer are present.
    """
    ops: list[DrawOperation] = []
    thought_lines: list[str] = []
    answer: str | None = None
    in_block = False
    open_line = 0

    for lineno, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if in_block:
            if stripped == FENCE_CLOSE:
                in_block = False
            elif stripped:
                ops.append(_parse_op_record(stripped, lineno))
        elif stripped == FENCE_OPEN:
            in_block = True
            open_line = lineno
        else:
            m = _ANSWER_RE.match(line)
            if m and answer is None:
                answer = m.group(1)
            else:
                # Later answer-looking lines stay in the thought (first match wins).
                thought_lines.append(line)

    if in_block:
        raise OpParseError("draw block opened here is never closed", open_line)
    if ops and answer is not None:
        raise AmbiguousResponseError(
            f"response has {len(ops)} operation(s) and a final answer; emit one or the other"
        )
    return PolicyResponse(
        thought="\n".join(thought_lines).strip(),
        ops=tuple(ops),
        final_answer=answer,
    )


def parse_final_response(text: str) -> str | None:
    """Lenient scan for a forced final turn: first answer line outside draw blocks.

    Operation records are skipped without validation; never raises.
    """
    in_block = False
    for line in text.split("\n"):
        stripped = line.strip()
        if in_block:
            if stripped == FENCE_CLOSE:
                in_block = False
        elif stripped == FENCE_OPEN:
            in_block = True
        else:
            m = _ANSWER_RE.match(line)
            if m:
                return m.group(1)
    return None


def _check_serializable_thought(thought: str) -> None:
    if thought != thought.strip():
        raise ValueError("thought must have no leading/trailing whitespace")
    for line in thought.split("\n"):
        if line.strip().startswith(FENCE_CLOSE):
            raise ValueError(f"thought line {line!r} would open or close a draw block")
        if _ANSWER_RE.match(line):
            raise ValueError(f"thought line {line!r} would parse as a final answer")


def serialize_response(resp: PolicyResponse) -> str:
    """Render a PolicyResponse in the wire grammar.

    Requires a response the grammar can carry verbatim: thought is stripped and
    contains no fence or answer-marker lines; the answer is single-line. With
    that pre-condition, parse_response(serialize_response(r)) == r.
    """
    _check_serializable_thought(resp.thought)
    parts = []
    if resp.thought:
        parts.append(resp.thought)
    if resp.ops:
        lines = [FENCE_OPEN]
        lines.extend(json.dumps(op.to_json_obj()) for op in resp.ops)
        lines.append(FENCE_CLOSE)
        parts.append("\n".join(lines))
    if resp.final_answer is not None:
        if "\n" in resp.final_answer or resp.final_answer != resp.final_answer.strip():
            raise ValueError("final answer must be single-line stripped text")
        parts.append(f"ANSWER: {resp.final_answer}")
    return "\n".join(parts)


def extract_answer(final_text: str, qtype: str) -> FinalAnswer:
    """Rule-based answer extraction from final answer text.

    choice: the first standalone letter, preferring uppercase matches so that
    lowercase articles do not shadow an explicit option; result is uppercased.
    numeric: the first substring that parses as a finite real number.
    Raises UnparseableAnswerError when nothing matches.
    """
    if qtype == "choice":
        m = _UPPER_LETTER_RE.search(final_text)
        if m is None:
            m = _ANY_LETTER_RE.search(final_text)
        if m is None:
            raise UnparseableAnswerError(f"no option letter in {final_text!r}")
        return FinalAnswer(raw=final_text, value=m.group(1).upper(), qtype=qtype)
    if qtype == "numeric":
        for m in _NUMBER_RE.finditer(final_text):
            value = float(m.group(0))
            if math.isfinite(value):
                return FinalAnswer(raw=final_text, value=value, qtype=qtype)
        raise UnparseableAnswerError(f"no finite number in {final_text!r}")
    raise ValueError(f"unknown question type {qtype!r}")
