"""
===============
Episode Rollout
===============

Drive a policy through the full think/draw/observe loop. The episode owns
an append-only image registry; every executed operation appends its output
image and the policy sees it on the next turn. Episodes end with exactly
one termination cause.
"""
from drawspace import EpisodeConfig, ScriptedPolicy, Termination, gen_maze, gen_task, run_episode
from drawspace.maze import OraclePolicy, episode_config_for

task = gen_task(gen_maze(4, seed=7), seed=8)
print(f"task {task.id}: {len(task.actions)} moves, answer {task.answer}")

# The oracle policy draws one center-to-center line per move, then answers.
trace = run_episode(OraclePolicy(task), task, episode_config_for(task))
print(f"\ntermination: {trace.termination.value}")
print(f"final answer: {trace.final_answer!r}")
print(f"registry: {len(trace.registry)} images "
      f"({trace.registry.n_inputs} input + {len(trace.registry) - 1} drawn)")
for step in trace.steps:
    ops = ", ".join(f"{ex.op.kind} '{ex.op.l}'" for ex in step.executed) or "answer"
    print(f"  step {step.t}: {ops}")

# Misbehaving policies terminate with the mapped fault, reward zero.
rambler = ScriptedPolicy(["let me think about this some more..."])
fault = run_episode(rambler, task, EpisodeConfig())
assert fault.termination is Termination.NO_OP_FAULT
print(f"\nrambling policy -> {fault.termination.value}")

# A hard step cap forces one final answer-only turn.
tight = run_episode(OraclePolicy(task), task, EpisodeConfig(max_steps=2))
print(f"two-step budget -> {tight.termination.value} "
      f"(forced={tight.steps[-1].forced}), answer {tight.final_answer!r}")
