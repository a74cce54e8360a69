"""Benchmark task records: schema validation and JSONL loading.

A task row is a JSON object with:
  id        unique string
  question  prompt text
  type      "choice" or "numeric"
  answer    option letter (choice) or finite number (numeric)
  images    list of image paths, or image_path: a single path
  options?  list of option letters, or a map letter -> anything
  subtask?  grouping key for per-subtask metrics
  video?    true when images are frames to subsample

Paths are resolved relative to the JSONL file. Unknown keys survive in
task.meta, so richer datasets (like the maze generator's) load unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .canvas import DecodeError, RasterImage, decode_png


class TaskLoadError(Exception):
    """One or more rows failed validation; carries (line, message) pairs."""

    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = problems
        lines = "; ".join(f"line {ln}: {msg}" for ln, msg in problems)
        super().__init__(f"{len(problems)} bad row(s): {lines}")


@dataclass(frozen=True)
class Task:
    id: str
    qtype: str
    question: str
    images: tuple[RasterImage, ...]
    answer: str | float | None
    options: tuple[str, ...] = ()
    subtask: str | None = None
    video: bool = False
    meta: dict = field(default_factory=dict)


_KNOWN_KEYS = {"id", "question", "type", "answer", "images", "image_path",
               "options", "subtask", "video"}


def _row_to_task(row: dict, base: Path, load_images: bool) -> Task:
    if not isinstance(row, dict):
        raise ValueError(f"row must be a JSON object, got {type(row).__name__}")
    bad = []

    task_id = row.get("id")
    if not isinstance(task_id, str) or not task_id:
        bad.append("id: missing or not a non-empty string")
    question = row.get("question")
    if not isinstance(question, str) or not question:
        bad.append("question: missing or not a non-empty string")
    qtype = row.get("type")
    if qtype not in ("choice", "numeric"):
        bad.append(f"type: must be 'choice' or 'numeric', got {qtype!r}")

    answer = row.get("answer")
    if answer is None:
        bad.append("answer: missing")
    elif qtype == "choice":
        if not (isinstance(answer, str) and len(answer.strip()) == 1
                and answer.strip().isalpha()):
            bad.append(f"answer: choice answer must be a single letter, got {answer!r}")
        else:
            answer = answer.strip().upper()
    elif qtype == "numeric":
        if isinstance(answer, bool) or not isinstance(answer, (int, float)) \
                or not math.isfinite(float(answer)):
            bad.append(f"answer: numeric answer must be a finite number, got {answer!r}")
        else:
            answer = float(answer)

    if "images" in row:
        paths = row["images"]
        if not isinstance(paths, list) or not paths \
                or not all(isinstance(p, str) for p in paths):
            bad.append("images: must be a non-empty list of paths")
            paths = []
    elif "image_path" in row:
        if not isinstance(row["image_path"], str):
            bad.append(f"image_path: must be a string, got {row['image_path']!r}")
            paths = []
        else:
            paths = [row["image_path"]]
    else:
        bad.append("images: missing (need 'images' or 'image_path')")
        paths = []

    options_raw = row.get("options", [])
    if isinstance(options_raw, dict):
        options = tuple(sorted(options_raw))
    elif isinstance(options_raw, list) and all(isinstance(o, str) for o in options_raw):
        options = tuple(options_raw)
    else:
        bad.append(f"options: must be a list of strings or a map, got {options_raw!r}")
        options = ()

    subtask = row.get("subtask")
    if subtask is not None and not isinstance(subtask, str):
        bad.append(f"subtask: must be a string, got {subtask!r}")
    video = row.get("video", False)
    if not isinstance(video, bool):
        bad.append(f"video: must be a boolean, got {video!r}")
        video = False

    images: list[RasterImage] = []
    image_paths = []
    for p in paths:
        full = base / p
        image_paths.append(str(full))
        if not load_images:
            continue
        try:
            images.append(decode_png(full.read_bytes()))
        except FileNotFoundError:
            bad.append(f"images: file not found: {full}")
        except DecodeError as exc:
            bad.append(f"images: {exc}")

    if bad:
        raise ValueError("; ".join(bad))

    meta = {k: v for k, v in row.items() if k not in _KNOWN_KEYS}
    meta["image_paths"] = image_paths
    return Task(
        id=task_id,
        qtype=qtype,
        question=question,
        images=tuple(images),
        answer=answer,
        options=options,
        subtask=subtask,
        video=video,
        meta=meta,
    )


def load_tasks(path, load_images: bool = True) -> list[Task]:
    """Load and validate a JSONL task file.

    Raises TaskLoadError naming every offending line; duplicate ids count
    as errors. With load_images=False the pixel data stays on disk (enough
    for scoring and aggregation flows).
    """
    p = Path(path)
    base = p.parent
    tasks: list[Task] = []
    problems: list[tuple[int, str]] = []
    seen_ids: set[str] = set()
    with open(p, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append((lineno, f"not valid JSON: {exc}"))
                continue
            try:
                task = _row_to_task(row, base, load_images)
            except ValueError as exc:
                problems.append((lineno, str(exc)))
                continue
            if task.id in seen_ids:
                problems.append((lineno, f"duplicate id {task.id!r}"))
                continue
            seen_ids.add(task.id)
            tasks.append(task)
    if problems:
        raise TaskLoadError(problems)
    return tasks
