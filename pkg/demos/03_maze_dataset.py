"""
====================
Maze Dataset Factory
====================

Generate perfect-maze navigation questions with embedded oracle traces.
Generation is seed-deterministic down to the PNG bytes, so a dataset is
fully described by (sizes, counts, seed).
"""
import json
from pathlib import Path

from drawspace import emit_dataset, gen_maze, gen_task, load_tasks
from drawspace.maze import walk_cells

out_dir = Path("demo-output/maze-data")

manifest = emit_dataset({3: 2, 4: 2, 5: 1}, seed=2024, out_dir=out_dir)
print(f"wrote {manifest['count']} tasks ({manifest['per_size']}) "
      f"to {manifest['path']}")

# Inspect one record: options map letters to (row, col) cells and the
# oracle trace replays one line-draw per move.
record = json.loads(Path(manifest["path"]).read_text().splitlines()[0])
print(f"\n{record['id']}: {record['question'][:72]}...")
print(f"answer {record['answer']}, options {record['options']}")
print(f"oracle trace holds {len(record['oracle_trace'])} scripted replies")

# The records load straight back as episode-ready tasks.
tasks = load_tasks(out_dir / "tasks.jsonl")
print(f"\nreloaded {len(tasks)} tasks; first has "
      f"{len(tasks[0].images)} input image(s)")

# Build a single task in memory when no files are wanted.
maze = gen_maze(4, seed=99)
task = gen_task(maze, seed=100)
print(f"\nad-hoc task {task.id}: start {task.spec.start}, "
      f"walk {task.actions} visits {walk_cells(task)}")
