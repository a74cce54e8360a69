"""
==========
Evaluation
==========

Score a batch of traces against their tasks: per-subtask accuracy, an
unweighted overall mean, behavioral statistics, and pass@k over repeated
attempts. Traces come from replaying the oracle demonstrations embedded in
a generated dataset, with a few deliberately ruined to keep the numbers
interesting.
"""
import tempfile
from pathlib import Path

import numpy as np

from drawspace import (
    EpisodeConfig,
    ScriptedPolicy,
    attempt_correct,
    emit_dataset,
    evaluate,
    load_tasks,
    pass_at_k,
    run_episode,
)

workdir = Path(tempfile.mkdtemp(prefix="drawspace-eval-"))
emit_dataset({3: 4, 4: 4}, seed=77, out_dir=workdir)
tasks = load_tasks(workdir / "tasks.jsonl")
print(f"loaded {len(tasks)} tasks from {workdir}")


def replay(task, script):
    cfg = EpisodeConfig(max_steps=len(script) + 1)
    return run_episode(ScriptedPolicy(script), task, cfg)


# Replay the embedded oracle script for most tasks; sabotage every fourth
# one with a wrong letter so the report has something to count against.
traces = []
for i, task in enumerate(tasks):
    script = list(task.meta["oracle_trace"])
    if i % 4 == 3:
        wrong = next(c for c in "ABCD" if c != task.answer)
        script[-1] = f"ANSWER: {wrong}"
    traces.append(replay(task, script))

report = evaluate(traces, tasks)
print()
print(report.format_table())

# The same report serializes for downstream tooling.
print()
print("as json:", report.to_json_obj()["per_subtask"])

# pass@k treats each task as a row of repeated attempts. Simulate eight
# attempts per task where each attempt succeeds 40% of the time.
rng = np.random.default_rng(5)
attempts = [[bool(rng.random() < 0.4) for _ in range(8)] for _ in tasks]
for k in (1, 2, 4, 8):
    print(f"pass@{k} = {pass_at_k(attempts, k):.3f}")

# attempt_correct is the per-attempt predicate behind those rows.
hits = [attempt_correct(tr, task) for tr, task in zip(traces, tasks)]
print(f"replayed attempts correct: {sum(hits)}/{len(hits)}")
