import json

import pytest

from drawspace.canvas import encode_png, new_canvas
from drawspace.cli import main
from drawspace.traces import read_records_jsonl


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli-data")
    assert main(["gen-maze", "--sizes", "3,4", "--counts", "3,2",
                 "--seed", "5", "--out", str(root)]) == 0
    return root


@pytest.fixture(scope="module")
def run_traces(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli-run") / "traces.jsonl"
    assert main(["run", "--tasks", str(dataset / "tasks.jsonl"),
                 "--out", str(out)]) == 0
    return out


class TestGenMaze:
    def test_dataset_written(self, dataset, capsys):
        records = read_records_jsonl(dataset / "tasks.jsonl")
        assert len(records) == 5
        assert sorted({r["grid_size"] for r in records}) == [3, 4]
        for r in records:
            assert (dataset / r["image_path"]).exists()

    def test_single_count_broadcasts(self, tmp_path):
        assert main(["gen-maze", "--sizes", "3,4", "--counts", "1",
                     "--seed", "1", "--out", str(tmp_path)]) == 0
        assert len(read_records_jsonl(tmp_path / "tasks.jsonl")) == 2

    def test_count_arity_mismatch(self, tmp_path, capsys):
        assert main(["gen-maze", "--sizes", "3,4,5", "--counts", "1,2",
                     "--seed", "1", "--out", str(tmp_path)]) == 1
        assert "error:" in capsys.readouterr().err


class TestRun:
    def test_oracle_replay(self, dataset, run_traces, capsys):
        records = read_records_jsonl(run_traces)
        assert len(records) == 5
        assert all(r["termination"] == "answered" for r in records)
        task_rows = read_records_jsonl(dataset / "tasks.jsonl")
        answers = {r["id"]: r["answer"] for r in task_rows}
        for r in records:
            assert r["final_answer"] == answers[r["task_id"]]

    def test_image_dir_dumps_registry(self, dataset, tmp_path):
        out = tmp_path / "traces.jsonl"
        assert main(["run", "--tasks", str(dataset / "tasks.jsonl"),
                     "--out", str(out), "--image-dir", str(tmp_path / "imgs")]) == 0
        record = read_records_jsonl(out)[0]
        assert record["images"]
        for rel in record["images"]:
            assert (tmp_path / rel).exists()

    def test_oracle_needs_embedded_traces(self, tmp_path, capsys):
        png = tmp_path / "img.png"
        png.write_bytes(encode_png(new_canvas(8, 8)))
        row = {"id": "x", "question": "q", "type": "choice", "answer": "A",
               "images": ["img.png"]}
        (tmp_path / "tasks.jsonl").write_text(json.dumps(row) + "\n")
        assert main(["run", "--tasks", str(tmp_path / "tasks.jsonl"),
                     "--out", str(tmp_path / "t.jsonl")]) == 1
        assert "oracle_trace" in capsys.readouterr().err

    def test_remote_policy_failure_exit_code(self, dataset, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"backoff_base": 0.0, "max_attempts": 2}))
        out = tmp_path / "traces.jsonl"
        code = main(["run", "--tasks", str(dataset / "tasks.jsonl"),
                     "--policy", "remote", "--endpoint", "http://127.0.0.1:1/chat",
                     "--config", str(cfg), "--out", str(out)])
        assert code == 1
        records = read_records_jsonl(out)
        assert all(r["termination"] == "policy-error" for r in records)

    def test_remote_without_endpoint(self, dataset, tmp_path, capsys):
        assert main(["run", "--tasks", str(dataset / "tasks.jsonl"),
                     "--policy", "remote", "--out", str(tmp_path / "t.jsonl")]) == 1
        assert "endpoint" in capsys.readouterr().err

    def test_parallel_matches_serial(self, dataset, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert main(["run", "--tasks", str(dataset / "tasks.jsonl"), "--out", str(a)]) == 0
        assert main(["run", "--tasks", str(dataset / "tasks.jsonl"), "--out", str(b),
                     "--parallel", "4"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_config_precedence_flag_over_file(self, dataset, tmp_path, capsys):
        # alpha=2 from the file forces early answer turns; the flag restores it.
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"alpha": 2}))
        out = tmp_path / "t.jsonl"
        assert main(["run", "--tasks", str(dataset / "tasks.jsonl"),
                     "--config", str(cfg), "--out", str(out)]) == 0
        capped = read_records_jsonl(out)
        assert any(r["termination"] != "answered" or r["steps"][-1]["forced"]
                   for r in capped)
        assert main(["run", "--tasks", str(dataset / "tasks.jsonl"),
                     "--config", str(cfg), "--alpha", "42", "--out", str(out)]) == 0
        full = read_records_jsonl(out)
        assert all(r["termination"] == "answered" and not r["steps"][-1]["forced"]
                   for r in full)

    def test_unknown_config_key(self, dataset, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"alhpa": 2}))
        assert main(["run", "--tasks", str(dataset / "tasks.jsonl"),
                     "--config", str(cfg), "--out", str(tmp_path / "t.jsonl")]) == 1
        assert "alhpa" in capsys.readouterr().err


class TestScore:
    def test_oracle_traces_score_two(self, dataset, run_traces, tmp_path, capsys):
        out = tmp_path / "scored.jsonl"
        assert main(["score", "--tasks", str(dataset / "tasks.jsonl"),
                     "--traces", str(run_traces), "--out", str(out)]) == 0
        assert "mean total 2.0000" in capsys.readouterr().out
        for record in read_records_jsonl(out):
            assert record["reward"]["total"] == 2.0
            assert record["reward"]["gate"] == 1
            assert record["gt"] == record["final_answer"]

    def test_missing_task_join_error(self, run_traces, tmp_path, capsys):
        png = tmp_path / "img.png"
        png.write_bytes(encode_png(new_canvas(8, 8)))
        row = {"id": "unrelated", "question": "q", "type": "choice",
               "answer": "A", "images": ["img.png"]}
        (tmp_path / "tasks.jsonl").write_text(json.dumps(row) + "\n")
        assert main(["score", "--tasks", str(tmp_path / "tasks.jsonl"),
                     "--traces", str(run_traces), "--out", str(tmp_path / "o.jsonl")]) == 1


class TestFilterRrs:
    def test_oracle_traces_are_not_reflective(self, dataset, run_traces, tmp_path, capsys):
        out = tmp_path / "kept.jsonl"
        report = tmp_path / "report.json"
        assert main(["filter-rrs", "--tasks", str(dataset / "tasks.jsonl"),
                     "--traces", str(run_traces), "--out", str(out),
                     "--report", str(report)]) == 0
        assert out.read_text() == ""
        summary = json.loads(report.read_text())
        assert summary == {"total": 5, "accepted": 0, "acceptance_rate": 0.0}
        assert "0/5" in capsys.readouterr().out

    def test_reflective_trace_accepted(self, dataset, tmp_path):
        # Splice a revisited label into an otherwise clean oracle trace.
        run_out = tmp_path / "traces.jsonl"
        assert main(["run", "--tasks", str(dataset / "tasks.jsonl"),
                     "--out", str(run_out)]) == 0
        rows = [json.loads(line) for line in run_out.read_text().splitlines()]
        for row in rows:
            first_ops = row["steps"][0]["ops"]
            patched = dict(first_ops[0])
            patched["p"] = [[1.0, 1.0], [2.0, 2.0]]
            patched["output_index"] = 99
            row["steps"][0]["ops"] = first_ops + [patched]
        with open(run_out, "w") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
        out = tmp_path / "kept.jsonl"
        assert main(["filter-rrs", "--tasks", str(dataset / "tasks.jsonl"),
                     "--traces", str(run_out), "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 5


class TestAdvantages:
    def test_worked_groups(self, tmp_path, capsys):
        groups = tmp_path / "groups.jsonl"
        with open(groups, "w") as fh:
            fh.write(json.dumps({"group_id": 0, "scores": [2.0, 0.0]}) + "\n")
            fh.write(json.dumps({"group_id": 1, "scores": [1.0, 1.0, 1.0]}) + "\n")
        out = tmp_path / "adv.jsonl"
        assert main(["advantages", "--groups", str(groups), "--out", str(out)]) == 0
        recs = read_records_jsonl(out)
        assert recs[0]["advantages"] == [1.0, -1.0]
        assert recs[1]["advantages"] == [0.0, 0.0, 0.0]

    def test_missing_scores_field(self, tmp_path, capsys):
        groups = tmp_path / "groups.jsonl"
        groups.write_text(json.dumps({"group_id": 0}) + "\n")
        assert main(["advantages", "--groups", str(groups),
                     "--out", str(tmp_path / "o.jsonl")]) == 1
        assert "scores" in capsys.readouterr().err

    def test_single_member_group_rejected(self, tmp_path, capsys):
        groups = tmp_path / "groups.jsonl"
        groups.write_text(json.dumps({"scores": [1.0]}) + "\n")
        assert main(["advantages", "--groups", str(groups),
                     "--out", str(tmp_path / "o.jsonl")]) == 1


class TestEval:
    def test_report_file_and_table(self, dataset, run_traces, tmp_path, capsys):
        report = tmp_path / "report.json"
        assert main(["eval", "--tasks", str(dataset / "tasks.jsonl"),
                     "--traces", str(run_traces), "--out", str(report)]) == 0
        stdout = capsys.readouterr().out
        assert "overall" in stdout and "reflection ratio" in stdout
        obj = json.loads(report.read_text())
        assert obj["overall"] == 1.0
        assert obj["per_subtask"] == {"all": 1.0}
        assert obj["n"] == 5
        assert obj["behavior"]["reflection_ratio"] == 0.0
        assert obj["behavior"]["mean_line_ops"] >= 2.0


class TestUsageErrors:
    def test_no_command_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_command_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_required_flag_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["gen-maze"])  # --out is required
        assert exc.value.code == 2

    def test_missing_input_file_exits_one(self, tmp_path, capsys):
        assert main(["eval", "--tasks", str(tmp_path / "nope.jsonl"),
                     "--traces", str(tmp_path / "also-nope.jsonl")]) == 1
        assert "error:" in capsys.readouterr().err
