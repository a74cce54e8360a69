import json

import pytest

from conftest import TinyTask, draw_block, make_step, make_trace, op_record
from drawspace.episode import (
    EpisodeConfig,
    ScriptedPolicy,
    Termination,
    run_episode,
)
from drawspace.traces import (
    read_records_jsonl,
    read_traces_jsonl,
    record_to_trace,
    trace_to_record,
    write_traces_jsonl,
)


def real_trace(task_id="tiny-0"):
    script = [
        "first I mark it.\n" + draw_block(op_record(label="target"),
                                          op_record(k=9, label="off the end")),
        draw_block(op_record(kind="line", p=((1, 1), (30, 20)), label="path")),
        "done.\nANSWER: A",
    ]
    return run_episode(ScriptedPolicy(script), TinyTask(id=task_id), EpisodeConfig())


class TestRecordRoundTrip:
    def test_fields_survive(self):
        trace = real_trace()
        back = record_to_trace(trace_to_record(trace))
        assert back.task_id == trace.task_id
        assert back.qtype == trace.qtype
        assert back.termination is trace.termination
        assert back.final_answer == trace.final_answer
        assert back.steps == trace.steps

    def test_executed_op_details_survive(self):
        trace = real_trace()
        back = record_to_trace(trace_to_record(trace))
        ex = back.steps[0].executed
        assert ex[0].output_index == 2 and ex[0].error is None
        assert ex[1].output_index is None and "out of range" in ex[1].error
        assert back.steps[1].executed[0].op.p.points == ((1.0, 1.0), (30.0, 20.0))

    def test_fault_trace_round_trip(self):
        trace = make_trace([make_step(1, parse_error="bad line 2")],
                           Termination.NO_OP_FAULT, None)
        back = record_to_trace(trace_to_record(trace))
        assert back.termination is Termination.NO_OP_FAULT
        assert back.steps[0].parse_error == "bad line 2"

    def test_record_is_json_serializable_and_stable(self):
        record = trace_to_record(real_trace())
        text = json.dumps(record, sort_keys=True)
        assert json.loads(text) == record

    def test_images_refused_without_paths(self):
        record = trace_to_record(real_trace())
        with pytest.raises(ValueError):
            record_to_trace(record, load_images=True)


class TestJsonlIO:
    def test_write_read_without_images(self, tmp_path):
        traces = [real_trace("a"), real_trace("b")]
        path = tmp_path / "traces.jsonl"
        write_traces_jsonl(traces, path)
        back = read_traces_jsonl(path)
        assert [t.task_id for t in back] == ["a", "b"]
        assert all(len(t.registry) == 0 for t in back)
        assert back[0].steps == traces[0].steps

    def test_write_read_with_images(self, tmp_path):
        trace = real_trace("imgcase")
        path = tmp_path / "traces.jsonl"
        write_traces_jsonl([trace], path, image_dir=tmp_path / "imgs")
        back = read_traces_jsonl(path, load_images=True)[0]
        assert len(back.registry) == len(trace.registry)
        assert back.registry.provenance == trace.registry.provenance
        for i in range(1, len(trace.registry) + 1):
            assert back.registry.get(i).pixel_hash() == trace.registry.get(i).pixel_hash()

    def test_image_paths_are_relative(self, tmp_path):
        write_traces_jsonl([real_trace("rel")], tmp_path / "traces.jsonl",
                           image_dir=tmp_path / "imgs")
        record = read_records_jsonl(tmp_path / "traces.jsonl")[0]
        assert record["images"][0] == "imgs/rel/img-001.png"
        assert (tmp_path / record["images"][0]).exists()

    def test_read_records_plain_dicts(self, tmp_path):
        write_traces_jsonl([real_trace("x")], tmp_path / "t.jsonl")
        records = read_records_jsonl(tmp_path / "t.jsonl")
        assert records[0]["task_id"] == "x"
        assert records[0]["termination"] == "answered"

    def test_deterministic_bytes(self, tmp_path):
        write_traces_jsonl([real_trace("same")], tmp_path / "a.jsonl")
        write_traces_jsonl([real_trace("same")], tmp_path / "b.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
