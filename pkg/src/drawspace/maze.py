"""Procedural maze QA tasks with oracle demonstration traces.

A task is a perfect maze (spanning tree over a g x g grid, carved by
randomized depth-first search), a green-marked start cell, four candidate
destination cells labeled A-D, and an action sequence. The question asks
which candidate the sequence reaches. The oracle policy solves it the way
the environment intends: one center-to-center line per move drawn on the
latest image, then the ground-truth letter.

All randomness flows through per-task RNG streams derived by hashing the
master seed, so generation is reproducible and order-independent.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._font import draw_text, text_size
from .canvas import PolylineGeometry, RasterImage, encode_png
from .dsl import DrawOperation, PolicyResponse, serialize_response
from .episode import FINAL_ANSWER_PROMPT, EpisodeConfig, Message, TextPart

CELL_PX = 64
WALL_PX = 4

BLACK = (0, 0, 0, 255)
WHITE = (255, 255, 255, 255)
START_GREEN = (34, 177, 76, 255)

LETTERS = ("A", "B", "C", "D")

# Fixed move order matters: generation draws uniformly over this list.
MOVES = (("up", (-1, 0)), ("down", (1, 0)), ("left", (0, -1)), ("right", (0, 1)))
MOVE_DELTA = dict(MOVES)


class InvalidSizeError(ValueError):
    """Grid size outside the supported 3..6 range."""


def derive_seed(master: int, *parts) -> int:
    """Stable per-task RNG seed from a master seed and identifying parts."""
    payload = json.dumps([master, *parts]).encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def edge_key(a: tuple[int, int], b: tuple[int, int]) -> tuple:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class MazeSpec:
    g: int
    passages: frozenset  # edge_key pairs forming a spanning tree
    start: tuple[int, int]  # (row, col)
    candidates: tuple  # ((letter, (row, col)), ...) sorted by letter; empty pre-task
    seed: int

    def candidate_map(self) -> dict[str, tuple[int, int]]:
        return dict(self.candidates)


@dataclass(frozen=True)
class MazeTask:
    id: str
    spec: MazeSpec
    actions: tuple[str, ...]
    image: RasterImage
    question: str
    answer: str  # ground-truth letter

    # Episode-task protocol.
    @property
    def images(self) -> tuple[RasterImage, ...]:
        return (self.image,)

    @property
    def qtype(self) -> str:
        return "choice"

    @property
    def video(self) -> bool:
        return False


def grid_neighbors(g: int, cell: tuple[int, int]) -> list[tuple[int, int]]:
    r, c = cell
    out = []
    for _, (dr, dc) in MOVES:
        nr, nc = r + dr, c + dc
        if 0 <= nr < g and 0 <= nc < g:
            out.append((nr, nc))
    return out


def gen_maze(g: int, seed: int) -> MazeSpec:
    """Carve a perfect maze with randomized iterative depth-first search."""
    if not 3 <= g <= 6:
        raise InvalidSizeError(f"grid size must be in 3..6, got {g}")
    rng = np.random.default_rng(seed)
    origin = (int(rng.integers(g)), int(rng.integers(g)))
    visited = {origin}
    stack = [origin]
    passages = set()
    while stack:
        cur = stack[-1]
        nbrs = [n for n in grid_neighbors(g, cur) if n not in visited]
        if not nbrs:
            stack.pop()
            continue
        nxt = nbrs[int(rng.integers(len(nbrs)))]
        passages.add(edge_key(cur, nxt))
        visited.add(nxt)
        stack.append(nxt)
    start = (int(rng.integers(g)), int(rng.integers(g)))
    return MazeSpec(g=g, passages=frozenset(passages), start=start,
                    candidates=(), seed=seed)


def legal_moves(spec: MazeSpec, cell: tuple[int, int]) -> list[str]:
    r, c = cell
    out = []
    for name, (dr, dc) in MOVES:
        nxt = (r + dr, c + dc)
        if 0 <= nxt[0] < spec.g and 0 <= nxt[1] < spec.g \
                and edge_key(cell, nxt) in spec.passages:
            out.append(name)
    return out


def _question_text(actions: tuple[str, ...]) -> str:
    seq = " ".join(f"Go {a}." for a in actions)
    return (
        "The image shows a maze. You start at the green dot. "
        f"Follow this action sequence: {seq} "
        "Which lettered cell do you end at? Options: A, B, C, D. "
        "Answer with a single letter."
    )


def gen_task(maze: MazeSpec, seed: int, task_id: str | None = None) -> MazeTask:
    """Attach an action sequence and candidate cells to a maze.

    Walk length is uniform on [2, 2g]; the walk is resampled until it ends
    away from the start. The ground-truth letter is uniform over A-D and the
    three distractors land on distinct cells different from start and endpoint.
    """
    rng = np.random.default_rng(seed)
    g = maze.g
    for _ in range(1000):
        length = int(rng.integers(2, 2 * g + 1))
        cur = maze.start
        actions = []
        for _ in range(length):
            moves = legal_moves(maze, cur)
            name = moves[int(rng.integers(len(moves)))]
            actions.append(name)
            dr, dc = MOVE_DELTA[name]
            cur = (cur[0] + dr, cur[1] + dc)
        if cur != maze.start:
            break
    else:
        raise RuntimeError("could not sample a walk ending away from start")
    endpoint = cur

    gt_letter = LETTERS[int(rng.integers(4))]
    all_cells = [(r, c) for r in range(g) for c in range(g)]
    pool = sorted(set(all_cells) - {maze.start, endpoint})
    picks = rng.choice(len(pool), size=3, replace=False)
    mapping = {gt_letter: endpoint}
    for letter, pi in zip([l for l in LETTERS if l != gt_letter], picks):
        mapping[letter] = pool[int(pi)]
    spec = dataclasses.replace(maze, candidates=tuple(sorted(mapping.items())))

    if task_id is None:
        task_id = f"maze-{g}x{g}-{seed & 0xFFFFFFFF:08x}"
    actions_t = tuple(actions)
    return MazeTask(
        id=task_id,
        spec=spec,
        actions=actions_t,
        image=render_maze(spec),
        question=_question_text(actions_t),
        answer=gt_letter,
    )


def cell_center(cell: tuple[int, int]) -> tuple[float, float]:
    """Pixel center (x, y) of a cell under the fixed cell/wall geometry."""
    r, c = cell
    x = WALL_PX + c * (CELL_PX + WALL_PX) + CELL_PX / 2
    y = WALL_PX + r * (CELL_PX + WALL_PX) + CELL_PX / 2
    return (x, y)


def render_maze(spec: MazeSpec) -> RasterImage:
    """Deterministic raster: black walls, white cells, green start disc,
    candidate letters at cell centers."""
    g = spec.g
    side = g * CELL_PX + (g + 1) * WALL_PX
    buf = np.empty((side, side, 4), dtype=np.uint8)
    buf[:, :] = BLACK

    def cell_origin(cell):
        r, c = cell
        return (WALL_PX + r * (CELL_PX + WALL_PX), WALL_PX + c * (CELL_PX + WALL_PX))

    for r in range(g):
        for c in range(g):
            y0, x0 = cell_origin((r, c))
            buf[y0:y0 + CELL_PX, x0:x0 + CELL_PX] = WHITE
    for a, b in sorted(spec.passages):
        ya, xa = cell_origin(a)
        if a[0] == b[0]:  # horizontal neighbors: open the vertical wall slot
            buf[ya:ya + CELL_PX, xa + CELL_PX:xa + CELL_PX + WALL_PX] = WHITE
        else:  # vertical neighbors: open the horizontal wall slot
            buf[ya + CELL_PX:ya + CELL_PX + WALL_PX, xa:xa + CELL_PX] = WHITE

    cx, cy = cell_center(spec.start)
    radius = CELL_PX // 5
    yy, xx = np.ogrid[:side, :side]
    disc = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2
    buf[disc] = START_GREEN

    for letter, cell in spec.candidates:
        lx, ly = cell_center(cell)
        tw, th = text_size(letter, scale=4)
        draw_text(buf, int(lx - tw / 2), int(ly - th / 2), letter, BLACK, scale=4)

    return RasterImage(buf)


def walk_cells(task: MazeTask) -> list[tuple[int, int]]:
    """Cells visited by the action sequence, start included; validates legality."""
    cells = [task.spec.start]
    for i, name in enumerate(task.actions, start=1):
        cur = cells[-1]
        if name not in legal_moves(task.spec, cur):
            raise ValueError(f"move {i} ({name}) from {cur} is not wall-legal")
        dr, dc = MOVE_DELTA[name]
        cells.append((cur[0] + dr, cur[1] + dc))
    return cells


def oracle_responses(task: MazeTask) -> list[str]:
    """The scripted ground-truth episode: one line op per move, then the answer."""
    cells = walk_cells(task)
    n = len(task.actions)
    texts = []
    for i in range(n):
        a, b = cells[i], cells[i + 1]
        op = DrawOperation(
            kind="line",
            k=i + 1,  # latest image: 1 input + i prior outputs
            p=PolylineGeometry((cell_center(a), cell_center(b))),
            l=f"move {i + 1} {task.actions[i]}",
        )
        thought = (
            f"Move {i + 1} of {n}: go {task.actions[i]}, cell {a} to cell {b}. "
            f"I trace the segment on image {i + 1}."
        )
        texts.append(serialize_response(PolicyResponse(thought, (op,), None)))
    final = (
        f"All {n} moves are traced. The walk ends on the cell marked {task.answer}."
    )
    texts.append(serialize_response(PolicyResponse(final, (), task.answer)))
    return texts


class OraclePolicy:
    """Deterministic PolicyPort that replays the oracle script for one task.

    Answers the ground truth immediately if the episode forces an early final
    turn, so it stays correct under any step budget.
    """

    def __init__(self, task: MazeTask):
        self._responses = oracle_responses(task)
        self._answer = task.answer

    def next(self, conversation: list[Message]) -> str:
        last = conversation[-1]
        if last.role == "user" and any(
            isinstance(p, TextPart) and p.text == FINAL_ANSWER_PROMPT for p in last.parts
        ):
            return f"ANSWER: {self._answer}"
        turn = sum(1 for m in conversation if m.role == "assistant")
        return self._responses[min(turn, len(self._responses) - 1)]


def oracle_policy(task: MazeTask) -> OraclePolicy:
    return OraclePolicy(task)


def episode_config_for(task: MazeTask, alpha: int = 42) -> EpisodeConfig:
    """Step budget that lets the full oracle script play out."""
    return EpisodeConfig(alpha=alpha, max_steps=len(task.actions) + 2)


def _build_record(master_seed: int, index: int, g: int) -> tuple[dict, bytes]:
    task_seed = derive_seed(master_seed, index)
    maze = gen_maze(g, derive_seed(task_seed, "maze"))
    task = gen_task(maze, derive_seed(task_seed, "walk"),
                    task_id=f"maze-{g}x{g}-{index:04d}")
    record = {
        "id": task.id,
        "grid_size": g,
        "seed": task_seed,
        "image_path": f"images/{task.id}.png",
        "question": task.question,
        "type": "choice",
        "options": {letter: list(cell) for letter, cell in task.spec.candidates},
        "answer": task.answer,
        "actions": list(task.actions),
        "oracle_trace": oracle_responses(task),
    }
    return record, encode_png(task.image)


def regenerate_task(record: dict) -> MazeTask:
    """Rebuild the exact MazeTask a dataset record was generated from."""
    task_seed = record["seed"]
    maze = gen_maze(record["grid_size"], derive_seed(task_seed, "maze"))
    return gen_task(maze, derive_seed(task_seed, "walk"), task_id=record["id"])


def emit_dataset(counts: dict[int, int], seed: int, out_dir,
                 parallel: int = 1) -> dict:
    """Write tasks.jsonl plus PNGs under out_dir; byte-identical per seed.

    counts maps grid size to task count. Records are built (possibly in
    parallel) then written strictly in index order by a single writer.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    jobs = []
    index = 0
    for g in sorted(counts):
        for _ in range(counts[g]):
            jobs.append((index, g))
            index += 1

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            built = list(pool.map(lambda j: _build_record(seed, j[0], j[1]), jobs))
    else:
        built = [_build_record(seed, i, g) for i, g in jobs]

    manifest_path = out / "tasks.jsonl"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for record, png in built:
            (out / record["image_path"]).write_bytes(png)
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return {
        "path": str(manifest_path),
        "count": len(built),
        "per_size": {g: counts[g] for g in sorted(counts)},
    }
