"""Pacing schedules and the counter-based step-kind draw."""

from __future__ import annotations

import math

import pytest

from hypernym_lm.curriculum import (
    PacingSchedule,
    draw_step_kind,
    draw_step_kinds,
    expected_hcp_steps,
    hcp_probability,
)
from hypernym_lm.errors import ConfigError
from hypernym_lm.vocab import StepKind


def constant(a, b, n, seed=0):
    return PacingSchedule(kind="constant", a=a, b=b, total_steps=n, seed=seed)


def linear(a, b, n, seed=0):
    return PacingSchedule(kind="linear", a=a, b=b, total_steps=n, seed=seed)


class TestProbability:
    def test_constant_inside_and_outside_window(self):
        s = constant(0.12, 0.8, 100_000)
        assert hcp_probability(s, 0) == 0.8
        assert hcp_probability(s, 11_999) == 0.8
        assert hcp_probability(s, 12_000) == 0.0

    def test_linear_hand_computed_midpoint(self):
        # 0.64 - 0.64 * 32000/64000 = 0.32
        s = linear(0.64, 0.64, 100_000)
        assert hcp_probability(s, 32_000) == pytest.approx(0.32, abs=1e-12)

    def test_zero_past_cutoff_for_any_schedule(self):
        for s in (constant(0.3, 0.9, 1000), linear(0.3, 0.9, 1000)):
            assert hcp_probability(s, 999) == 0.0
            for t in range(300, 1000):
                assert hcp_probability(s, t) == 0.0

    def test_non_increasing_in_t(self):
        for s in (constant(0.4, 0.7, 500), linear(0.7, 0.9, 500)):
            probs = [hcp_probability(s, t) for t in range(500)]
            assert all(a >= b for a, b in zip(probs, probs[1:]))

    def test_range_errors(self):
        s = constant(0.5, 0.5, 100)
        with pytest.raises(ValueError):
            hcp_probability(s, 100)
        with pytest.raises(ValueError):
            hcp_probability(s, -1)

    def test_invalid_params_rejected(self):
        with pytest.raises(ConfigError):
            constant(1.5, 0.5, 100)
        with pytest.raises(ConfigError):
            constant(0.5, -0.1, 100)
        with pytest.raises(ConfigError):
            PacingSchedule(kind="quadratic", a=0.5, b=0.5, total_steps=100)
        with pytest.raises(ConfigError):
            constant(0.5, 0.5, 0)

    def test_cutoff_snaps_float_noise(self):
        # 0.2 * 100000 = 20000.000000000004 in float64; the boundary must not
        # admit step 20000
        s = constant(0.2, 1.0, 100_000)
        assert s.cutoff == 20_000.0
        assert hcp_probability(s, 20_000) == 0.0
        assert hcp_probability(s, 19_999) == 1.0


class TestDraw:
    def test_probability_zero_always_token(self):
        s = constant(0.5, 0.0, 200)
        assert all(k is StepKind.TOKEN for k in draw_step_kinds(s))

    def test_probability_one_always_hcp_inside_window(self):
        s = constant(0.25, 1.0, 200)
        kinds = draw_step_kinds(s)
        assert all(k is StepKind.HCP for k in kinds[:50])
        assert all(k is StepKind.TOKEN for k in kinds[50:])

    def test_exact_count_for_b1_constant(self):
        s = constant(0.2, 1.0, 100_000)
        kinds = draw_step_kinds(s)
        assert sum(k is StepKind.HCP for k in kinds) == 20_000

    def test_reproducible_across_reconstruction(self):
        a = [draw_step_kind(constant(0.5, 0.5, 300, seed=9), t) for t in range(300)]
        b = [draw_step_kind(constant(0.5, 0.5, 300, seed=9), t) for t in range(300)]
        assert a == b

    def test_order_independent(self):
        s = linear(0.8, 0.7, 400, seed=3)
        forward = [draw_step_kind(s, t) for t in range(400)]
        backward = [draw_step_kind(s, t) for t in reversed(range(400))]
        assert forward == list(reversed(backward))

    def test_seed_changes_draws(self):
        n = 2000
        a = draw_step_kinds(constant(1.0, 0.5, n, seed=0))
        b = draw_step_kinds(constant(1.0, 0.5, n, seed=1))
        assert a != b

    def test_empirical_frequency_within_3_sigma(self):
        n = 4000
        s = linear(0.6, 0.8, n)
        expected = sum(hcp_probability(s, t) for t in range(n))
        var = sum(p * (1 - p) for p in (hcp_probability(s, t) for t in range(n)))
        total = 0
        n_seeds = 10
        for seed in range(n_seeds):
            kinds = draw_step_kinds(linear(0.6, 0.8, n, seed=seed))
            total += sum(k is StepKind.HCP for k in kinds)
        sigma = math.sqrt(n_seeds * var)
        assert abs(total - n_seeds * expected) <= 3 * sigma


class TestExpectedSteps:
    def test_constant_table_values(self):
        for a, target in ((0.1, 10_000), (0.2, 20_000), (0.3, 30_000), (0.4, 40_000)):
            got = expected_hcp_steps(constant(a, 1.0, 100_000))
            assert round(got) == target
            assert got == pytest.approx(target, rel=1e-12)

    def test_linear_near_table_values(self):
        for a, target in ((0.45, 10_000), (0.64, 20_000), (0.78, 30_000), (0.90, 40_000)):
            got = expected_hcp_steps(linear(a, a, 100_000))
            assert abs(got - target) / target <= 0.025

    def test_linear_hand_value(self):
        assert expected_hcp_steps(linear(0.64, 0.64, 100_000)) == pytest.approx(20_480.0)
        assert expected_hcp_steps(linear(0.45, 0.45, 100_000)) == pytest.approx(10_125.0)

    def test_b_zero(self):
        assert expected_hcp_steps(constant(0.5, 0.0, 100)) == 0.0
        assert expected_hcp_steps(linear(0.5, 0.0, 100)) == 0.0
