"""
=====================
Scoring and Filtering
=====================

Gated rewards and the reflective trace filter. The reward is
gate * (s_correct + s_format): the gate closes on fault terminations and on
answers at or below the correctness floor, so sloppy-but-lucky traces score
zero. The filter then keeps only clean, correct traces that contain a
reflection, meaning the policy revisited a label with a different drawing.
"""
from drawspace import (
    ScriptedPolicy,
    detect_duplicate,
    detect_reflection,
    extract_answer,
    gen_maze,
    gen_task,
    rrs_filter,
    run_episode,
    score_numeric_mra,
    total_reward,
)
from drawspace.maze import OraclePolicy, episode_config_for

task = gen_task(gen_maze(4, seed=7), seed=8)
config = episode_config_for(task)

# A flawless oracle run earns the full 2.0: correct plus clean format.
good = run_episode(OraclePolicy(task), task, config)
breakdown = total_reward(good, task.answer)
print(f"oracle: correct={breakdown.s_correct} format={breakdown.s_format} "
      f"gate={breakdown.gate} total={breakdown.total}")

# A wrong letter closes the gate; the format point is forfeited with it.
wrong_letter = next(c for c in "ABCD" if c != task.answer)
bad = run_episode(ScriptedPolicy([f"ANSWER: {wrong_letter}"]), task, config)
breakdown = total_reward(bad, task.answer)
print(f"wrong answer: gate={breakdown.gate} total={breakdown.total}")

# Numeric answers earn partial credit on a relative-accuracy ladder.
for guess in ["10", "9.6", "9", "5"]:
    pred = extract_answer(guess, "numeric")
    print(f"ground truth 10, predicted {guess}: "
          f"mra={score_numeric_mra(10.0, pred):.2f}")

# The oracle never second-guesses itself, so it carries no reflection and
# the filter rejects it.
print(f"\noracle reflective? {rrs_filter(good, task.answer)}")

# A policy that marks a spot, reconsiders, and re-marks the same label
# somewhere else produces a reflection witness.
reviser = ScriptedPolicy([
    'Marking my first guess at the endpoint.\n```draw\n'
    '{"kind": "box", "k": 1, "p": [10, 10, 60, 60], "l": "endpoint"}\n```',
    'No, the walk ends further down. Moving the mark.\n```draw\n'
    '{"kind": "box", "k": 2, "p": [80, 90, 150, 160], "l": "endpoint"}\n```',
    f"ANSWER: {task.answer}",
])
revised = run_episode(reviser, task, config)
witness = detect_reflection(revised)
print(f"revised trace reflective? {rrs_filter(revised, task.answer)}")
print(f"witness: step {witness.t1} op {witness.u} vs step {witness.t2} "
      f"op {witness.v}, label {witness.label!r}")
print(f"duplicate witness: {detect_duplicate(revised)}")
