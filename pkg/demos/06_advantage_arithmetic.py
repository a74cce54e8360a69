"""
====================
Advantage Arithmetic
====================

The numeric half of training: normalize a group of rollout scores into
advantages, mask the conversation down to the policy's own tokens, and fold
per-token probability ratios through the clipped surrogate. Everything here
is plain numpy over caller-supplied numbers; no model in sight.
"""
import numpy as np

from drawspace import (
    RolloutGroup,
    TokenSegment,
    clipped_surrogate,
    gen_maze,
    gen_task,
    group_advantages,
    group_objective,
    run_episode,
    token_mask,
)
from drawspace.maze import OraclePolicy, episode_config_for

# Scores are compared within their group, not against a learned baseline.
scores = [2.0, 2.0, 0.0, 1.8]
advantages = group_advantages(scores)
print("scores    ", scores)
print("advantages", [round(float(a), 4) for a in advantages])

# No spread, no signal: a flat group maps to all-zero advantages.
print("flat group", group_advantages([1.5, 1.5, 1.5]))

# The surrogate is pessimistic: the unclipped and clipped terms are both
# computed and the smaller one wins, per token.
for logp_new, logp_old, a in [(0.0, 0.0, 0.5), (0.4, 0.0, 1.0), (-0.7, 0.0, -1.0)]:
    r = clipped_surrogate([logp_new], [logp_old], a)
    ratio = np.exp(logp_new - logp_old)
    print(f"ratio={ratio:.3f} advantage={a:+.1f} -> term={r.masked_mean:+.4f}")

# Only response tokens train. Prompt and observation spans are masked out
# and excluded from the per-trace normalizer.
task = gen_task(gen_maze(3, seed=3), seed=4)
trace = run_episode(OraclePolicy(task), task, episode_config_for(task))
segments = []
segments.append(TokenSegment("prompt", 12))
for _ in trace.steps:
    segments.append(TokenSegment("response", 5))
    segments.append(TokenSegment("observation", 7))
mask = token_mask(trace, segments)
print(f"\n{len(trace.steps)} steps, {mask.size} tokens, {int(mask.sum())} trainable")

# One task, G rollouts, one scalar objective.
rng = np.random.default_rng(11)
n = mask.size
group = RolloutGroup(
    scores=(2.0, 0.0, 1.8, 2.0),
    logp_new=tuple(rng.normal(-1.0, 0.3, n) for _ in range(4)),
    logp_old=tuple(rng.normal(-1.0, 0.3, n) for _ in range(4)),
    masks=(mask,) * 4,
)
objective, per_trace = group_objective(group)
print(f"group objective: {objective:+.4f}")
for i, r in enumerate(per_trace):
    print(f"  rollout {i}: masked mean {r.masked_mean:+.4f} over {r.n_tokens} tokens")
