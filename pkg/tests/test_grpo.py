import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import make_step, make_trace
from drawspace.episode import Termination
from drawspace.grpo import (
    AlignmentError,
    GroupTooSmallError,
    RolloutGroup,
    ShapeError,
    TokenSegment,
    clipped_surrogate,
    group_advantages,
    group_objective,
    token_mask,
)


class TestGroupAdvantages:
    def test_two_zero(self):
        assert group_advantages([2.0, 0.0]) == [1.0, -1.0]

    def test_all_equal_degenerate(self):
        assert group_advantages([1.5, 1.5, 1.5, 1.5]) == [0.0, 0.0, 0.0, 0.0]

    def test_near_equal_degenerate(self):
        assert group_advantages([1.0, 1.0 + 5e-9]) == [0.0, 0.0]

    def test_mean_zero_std_one(self):
        adv = np.array(group_advantages([0.0, 1.0, 1.8, 2.0, 0.0, 1.0, 0.3, 1.9]))
        assert abs(adv.mean()) < 1e-12
        assert abs(adv.std() - 1.0) < 1e-12

    def test_population_std_not_sample(self):
        # With ddof=1 the result would be [0.707..., -0.707...].
        adv = group_advantages([1.0, 0.0])
        assert adv == [1.0, -1.0]

    def test_order_preserved_and_monotone(self):
        adv = group_advantages([0.3, 1.9, 1.1])
        assert adv[1] > adv[2] > adv[0]

    def test_too_small_or_misshapen(self):
        with pytest.raises(GroupTooSmallError):
            group_advantages([1.0])
        with pytest.raises(GroupTooSmallError):
            group_advantages([])

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            group_advantages([1.0, math.nan])
        with pytest.raises(ValueError):
            group_advantages([1.0, math.inf])

    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=16),
           st.floats(-50, 50), st.floats(0.1, 10))
    @settings(max_examples=200, deadline=None)
    def test_shift_invariant_scale_equivariant(self, scores, shift, scale):
        # Stay clear of the 1e-8 degeneracy cutoff, where zeros are intended.
        assume(float(np.asarray(scores).std()) > 1e-4)
        base = group_advantages(scores)
        shifted = group_advantages([s + shift for s in scores])
        scaled = group_advantages([s * scale for s in scores])
        assert np.allclose(base, shifted, atol=1e-9)
        assert np.allclose(base, scaled, atol=1e-9)

    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=16))
    @settings(max_examples=200, deadline=None)
    def test_mean_zero_property(self, scores):
        adv = np.array(group_advantages(scores))
        assert abs(adv.mean()) < 1e-9
        spread = adv.std()
        assert spread == 0.0 or abs(spread - 1.0) < 1e-9


class TestClippedSurrogate:
    def test_ratio_above_clip_positive_advantage(self):
        # ratio 1.5, eps 0.2, A=+1: min(1.5, 1.2) = 1.2.
        res = clipped_surrogate([math.log(1.5)], [0.0], 1.0)
        assert abs(res.terms[0] - 1.2) < 1e-12
        assert abs(res.masked_mean - 1.2) < 1e-12

    def test_ratio_below_clip_negative_advantage(self):
        # ratio 0.5, A=-1: min(-0.5, -0.8) = -0.8.
        res = clipped_surrogate([math.log(0.5)], [0.0], -1.0)
        assert abs(res.terms[0] - (-0.8)) < 1e-12

    def test_unit_ratio_passes_through(self):
        res = clipped_surrogate([0.3], [0.3], 0.7)
        assert abs(res.terms[0] - 0.7) < 1e-12

    def test_inside_band_unclipped(self):
        # ratio 1.1 inside [0.8, 1.2]: min(1.1 * A, 1.1 * A) = 1.1 * A.
        res = clipped_surrogate([math.log(1.1)], [0.0], 2.0)
        assert abs(res.terms[0] - 2.2) < 1e-12

    def test_negative_advantage_large_ratio_unclipped(self):
        # A < 0 and ratio 1.5: min(1.5 * -1, 1.2 * -1) = -1.5 (pessimistic).
        res = clipped_surrogate([math.log(1.5)], [0.0], -1.0)
        assert abs(res.terms[0] - (-1.5)) < 1e-12

    def test_masked_tokens_zero_and_excluded(self):
        res = clipped_surrogate([0.0, math.log(1.5), 0.0], [0.0, 0.0, 0.0], 1.0,
                                mask=[True, True, False])
        assert res.terms[2] == 0.0
        assert res.n_tokens == 2
        assert abs(res.masked_mean - (1.0 + 1.2) / 2) < 1e-12

    def test_all_masked_rejected(self):
        with pytest.raises(ShapeError):
            clipped_surrogate([0.0], [0.0], 1.0, mask=[False])

    def test_shape_mismatches(self):
        with pytest.raises(ShapeError):
            clipped_surrogate([0.0, 0.0], [0.0], 1.0)
        with pytest.raises(ShapeError):
            clipped_surrogate([0.0], [0.0], 1.0, mask=[True, False])
        with pytest.raises(ShapeError):
            clipped_surrogate([[0.0]], [[0.0]], 1.0)

    def test_epsilon_validation(self):
        for eps in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                clipped_surrogate([0.0], [0.0], 1.0, epsilon=eps)

    def test_zero_advantage_all_zero(self):
        res = clipped_surrogate([0.5, -0.5], [0.0, 0.0], 0.0)
        assert np.all(res.terms == 0.0) and res.masked_mean == 0.0

    @given(st.lists(st.floats(-3, 3), min_size=1, max_size=20),
           st.floats(-3, 3), st.floats(0.05, 0.5))
    @settings(max_examples=200, deadline=None)
    def test_surrogate_never_exceeds_unclipped(self, logp_new, advantage, eps):
        old = [0.0] * len(logp_new)
        res = clipped_surrogate(logp_new, old, advantage, epsilon=eps)
        unclipped = np.exp(np.asarray(logp_new)) * advantage
        assert np.all(res.terms <= unclipped + 1e-12)


class TestTokenMask:
    def trace_with_steps(self, n):
        return make_trace([make_step(t) for t in range(1, n + 1)],
                          Termination.STEP_CAP, None)

    def test_mask_true_exactly_on_response(self):
        trace = self.trace_with_steps(2)
        segments = [
            TokenSegment("prompt", 3),
            TokenSegment("response", 2),
            TokenSegment("observation", 4),
            TokenSegment("response", 1),
        ]
        mask = token_mask(trace, segments)
        expected = [False] * 3 + [True] * 2 + [False] * 4 + [True]
        assert mask.tolist() == expected

    def test_alignment_error(self):
        trace = self.trace_with_steps(2)
        with pytest.raises(AlignmentError):
            token_mask(trace, [TokenSegment("prompt", 3), TokenSegment("response", 2)])

    def test_zero_length_segments_ok(self):
        trace = self.trace_with_steps(1)
        mask = token_mask(trace, [TokenSegment("prompt", 0), TokenSegment("response", 3)])
        assert mask.tolist() == [True, True, True]

    def test_empty_segments_empty_trace(self):
        trace = make_trace([], Termination.POLICY_ERROR, None)
        assert token_mask(trace, []).tolist() == []

    def test_segment_validation(self):
        with pytest.raises(ValueError):
            TokenSegment("tool", 1)
        with pytest.raises(ValueError):
            TokenSegment("prompt", -1)


class TestGroupObjective:
    def test_worked_example(self):
        # scores [2, 0] -> advantages [1, -1]; single-token traces with
        # ratios 1.5 and 0.5 -> terms min(1.5, 1.2)=1.2 and min(-0.5, -0.8)=-0.8.
        group = RolloutGroup(
            scores=(2.0, 0.0),
            logp_new=([math.log(1.5)], [math.log(0.5)]),
            logp_old=([0.0], [0.0]),
            masks=([True], [True]),
        )
        objective, results = group_objective(group)
        assert abs(results[0].masked_mean - 1.2) < 1e-12
        assert abs(results[1].masked_mean - (-0.8)) < 1e-12
        assert abs(objective - 0.2) < 1e-12

    def test_degenerate_scores_zero_objective(self):
        group = RolloutGroup(
            scores=(1.0, 1.0, 1.0),
            logp_new=([0.1], [0.2], [-0.3]),
            logp_old=([0.0], [0.0], [0.0]),
            masks=([True], [True], [True]),
        )
        objective, results = group_objective(group)
        assert objective == 0.0
        assert all(r.masked_mean == 0.0 for r in results)

    def test_field_length_mismatch(self):
        with pytest.raises(ShapeError):
            RolloutGroup(scores=(1.0, 2.0), logp_new=([0.0],),
                         logp_old=([0.0], [0.0]), masks=([True], [True]))

    def test_identical_policies_objective_is_mean_advantage_weighted(self):
        # ratio == 1 everywhere: each masked mean equals its advantage.
        group = RolloutGroup(
            scores=(2.0, 0.0, 1.0, 1.0),
            logp_new=([0.0, 0.0], [0.1], [0.2, 0.2, 0.2], [0.3]),
            logp_old=([0.0, 0.0], [0.1], [0.2, 0.2, 0.2], [0.3]),
            masks=([True, True], [True], [True, True, True], [True]),
        )
        objective, results = group_objective(group)
        adv = group_advantages([2.0, 0.0, 1.0, 1.0])
        for r, a in zip(results, adv):
            assert abs(r.masked_mean - a) < 1e-12
        assert abs(objective - np.mean(adv)) < 1e-12
