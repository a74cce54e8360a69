"""Episode trace persistence: JSONL records plus optional PNG image dumps.

A record keeps everything scoring, filtering, and evaluation need (steps,
operations, execution results, termination, final answer). Pixel data is
optional: pass an image directory to dump the registry as PNG files and
get it back with load_images=True.
"""

from __future__ import annotations

import json
from pathlib import Path

from .canvas import BBoxGeometry, PolylineGeometry, decode_png, encode_png
from .dsl import DrawOperation
from .episode import (
    EpisodeTrace,
    ExecutedOp,
    ImageRegistry,
    ReasoningStep,
    Termination,
)


def _op_to_json(ex: ExecutedOp) -> dict:
    obj = ex.op.to_json_obj()
    obj["output_index"] = ex.output_index
    obj["error"] = ex.error
    return obj


def _op_from_json(obj: dict) -> ExecutedOp:
    if obj["kind"] == "box":
        p: BBoxGeometry | PolylineGeometry = BBoxGeometry(*(float(v) for v in obj["p"]))
    else:
        p = PolylineGeometry(tuple((float(x), float(y)) for x, y in obj["p"]))
    op = DrawOperation(kind=obj["kind"], k=obj["k"], p=p, l=obj["l"])
    return ExecutedOp(op=op, output_index=obj["output_index"], error=obj["error"])


def trace_to_record(trace: EpisodeTrace, image_paths: list[str] | None = None) -> dict:
    record = {
        "task_id": trace.task_id,
        "qtype": trace.qtype,
        "termination": trace.termination.value,
        "final_answer": trace.final_answer,
        "steps": [
            {
                "t": s.t,
                "thought": s.thought,
                "ops": [_op_to_json(ex) for ex in s.executed],
                "answer": s.answer,
                "parse_error": s.parse_error,
                "forced": s.forced,
            }
            for s in trace.steps
        ],
        "provenance": [list(p) for p in trace.registry.provenance],
    }
    if image_paths is not None:
        record["images"] = image_paths
    return record


def record_to_trace(record: dict, base_dir=None, load_images: bool = False) -> EpisodeTrace:
    """Rebuild a trace from its record.

    Without load_images the registry comes back empty (enough for scoring,
    reflection checks, and aggregation); with it, every PNG is reloaded and
    re-registered under its original provenance.
    """
    registry = ImageRegistry()
    if load_images:
        paths = record.get("images")
        if paths is None:
            raise ValueError(f"record {record.get('task_id')!r} carries no image paths")
        base = Path(base_dir) if base_dir is not None else Path(".")
        for path, prov in zip(paths, record["provenance"]):
            img = decode_png((base / path).read_bytes())
            if prov[0] == "input":
                registry.add_input(img)
            else:
                registry.add_output(img, prov[1], prov[2])
    steps = tuple(
        ReasoningStep(
            t=s["t"],
            thought=s["thought"],
            executed=tuple(_op_from_json(o) for o in s["ops"]),
            answer=s["answer"],
            parse_error=s["parse_error"],
            forced=s["forced"],
        )
        for s in record["steps"]
    )
    return EpisodeTrace(
        task_id=record["task_id"],
        qtype=record["qtype"],
        steps=steps,
        termination=Termination(record["termination"]),
        final_answer=record["final_answer"],
        registry=registry,
    )


def save_trace_images(trace: EpisodeTrace, image_dir, rel_to) -> list[str]:
    """Dump the registry as PNGs under image_dir/<task_id>/; returns paths
    relative to rel_to (the trace file's directory)."""
    out = Path(image_dir) / trace.task_id
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, img in enumerate(trace.registry.images(), start=1):
        p = out / f"img-{i:03d}.png"
        p.write_bytes(encode_png(img))
        paths.append(str(p.relative_to(rel_to)))
    return paths


def write_traces_jsonl(traces, path, image_dir=None) -> None:
    """One record per trace, in order. image_dir additionally dumps PNGs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            image_paths = None
            if image_dir is not None:
                image_paths = save_trace_images(trace, image_dir, path.parent)
            record = trace_to_record(trace, image_paths)
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_traces_jsonl(path, load_images: bool = False) -> list[EpisodeTrace]:
    path = Path(path)
    traces = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                traces.append(record_to_trace(json.loads(line), path.parent, load_images))
    return traces


def read_records_jsonl(path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
