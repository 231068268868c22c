import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotbandit.core import MeanSurface, RestlessTable, make_rng
from rotbandit.environments import Environment, make_prop1_pair, make_rested_two_arm
from rotbandit.core import Constant, Gaussian
from rotbandit.evaluation import simulate
from rotbandit.policies import (
    FEWA, UCB1, EffFEWA, EffRawUCB, Exp3S, GreedyOracle, RawUCB, RoundRobin, confidence_radius,
    delta_t, exp3s_switches_from_budget, exp3s_tuning, greedy_oracle_choose, make_policy,
    policy_constant, raw_ucb_index,
)
from rotbandit.windowstats import ArmStats


def feed(policy, samples):
    """samples: list per arm, pushed oldest first."""
    for arm, vals in enumerate(samples):
        for v in vals:
            policy.observe(arm, v)
    return policy


def stats(vals):
    s = ArmStats()
    for v in vals:
        s.push(v)
    return s


# confidence quantities ----------------------------------------------------------


def test_delta_t_examples():
    assert delta_t(1, 4) == 2
    assert delta_t(10, 4) == pytest.approx(2e-4)
    assert delta_t(2, 1.4) == pytest.approx(2 * 2 ** -1.4) == pytest.approx(0.757858, abs=1e-6)


def test_confidence_radius_examples():
    assert confidence_radius(1, 2, 1) == 0
    assert confidence_radius(1, 2e-4, 1) == pytest.approx(4.29193, abs=1e-5)
    assert confidence_radius(4, 2e-4, 1) == pytest.approx(2.14596, abs=1e-5)


@pytest.mark.parametrize("delta", [2.5, 0.0, -1.0])
def test_confidence_radius_domain(delta):
    with pytest.raises(ValueError):
        confidence_radius(1, delta, 1)


@given(st.integers(1, 10**6), st.floats(0.5, 8), st.floats(0, 5), st.integers(1, 1000))
def test_radius_matches_log_form(t, alpha, sigma, h):
    r = confidence_radius(h, delta_t(t, alpha), sigma)
    assert r == pytest.approx(sigma * math.sqrt(2 * alpha * math.log(t) / h), rel=1e-9, abs=1e-12)


def test_policy_constants():
    assert policy_constant("raw", 4) == pytest.approx(2 * math.sqrt(8))
    assert policy_constant("fewa", 2.5) == pytest.approx(2 * policy_constant("raw", 2.5))
    assert policy_constant("eff_raw", 4) == pytest.approx(8 / (math.sqrt(2) - 1))
    assert policy_constant("eff_fewa", 4) == pytest.approx(2 * policy_constant("eff_raw", 4))
    with pytest.raises(ValueError):
        policy_constant("thompson", 4)


# RAW-UCB index ------------------------------------------------------------------


def test_index_single_sample():
    v, h = raw_ucb_index(stats([0.5]), 2, 4, 1)
    assert v == pytest.approx(0.5 + math.sqrt(2 * math.log(16)), rel=1e-12)
    assert h == 1


def test_index_two_samples_enumerated():
    r = math.sqrt(8 * math.log(3))
    w1, w2 = 0.0 + r, 0.5 + r / math.sqrt(2)
    v, h = raw_ucb_index(stats([1.0, 0.0]), 3, 4, 1)
    assert (v, h) == (pytest.approx(min(w1, w2)), 2)
    assert w1 == pytest.approx(2.96461, abs=1e-5) and w2 == pytest.approx(2.59629, abs=1e-5)


def test_index_requires_samples():
    with pytest.raises(ValueError):
        raw_ucb_index(ArmStats(), 2, 4, 1)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=60), st.integers(2, 10**5))
def test_index_is_exact_minimum(vals, t):
    s = stats(vals)
    r = math.sqrt(2 * 4 * math.log(t))
    direct = [math.fsum(vals[-h:]) / h + r / math.sqrt(h) for h in range(1, len(vals) + 1)]
    v, h = raw_ucb_index(s, t, 4, 1)
    assert v == pytest.approx(min(direct), abs=1e-9)
    assert direct[h - 1] == pytest.approx(min(direct), abs=1e-9)


def test_constant_samples_pick_full_window():
    v, h = raw_ucb_index(stats([0.3] * 9), 50, 4, 1)
    assert h == 9
    assert v == pytest.approx(0.3 + math.sqrt(8 * math.log(50) / 9))


# choice rules -------------------------------------------------------------------


def test_forced_initialisation():
    for cls in (RawUCB, FEWA, EffRawUCB, EffFEWA, UCB1):
        p = cls(3)
        assert [p.choose(t) for t in (1, 2, 3)] == [0, 1, 2]


@pytest.mark.parametrize("cls", [RawUCB, FEWA, EffRawUCB, EffFEWA, UCB1])
def test_sigma_zero_is_greedy(cls):
    p = feed(cls(2, sigma=0.0), [[1.0], [0.0]])
    assert p.choose(3) == 0


@pytest.mark.parametrize("cls", [RawUCB, FEWA, EffRawUCB, EffFEWA, UCB1])
def test_ties_go_to_smallest_arm(cls):
    p = feed(cls(3), [[0.2, 0.1], [0.2, 0.1], [0.2, 0.1]])
    assert p.choose(7) == 0


def test_fewa_least_pulled_among_equal():
    p = feed(FEWA(2), [[0.5, 0.5], [0.5]])
    assert p.choose(4) == 1


def test_fewa_pulls_arm_with_one_sample_after_surviving():
    p = feed(FEWA(3), [[0.0, 0.0, 0.0], [1.0], [-5.0, -5.0]])
    assert p.choose(7) == 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.floats(-3, 3), min_size=1, max_size=15), min_size=2, max_size=4),
       st.integers(5, 1000))
def test_raw_choice_is_argmax_of_index(samples, t):
    K = len(samples)
    t = max(t, K + 1)
    p = feed(RawUCB(K), samples)
    idx = [raw_ucb_index(stats(s), t, 4, 1)[0] for s in samples]
    assert idx[p.choose(t)] == pytest.approx(max(idx), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.floats(-3, 3), min_size=1, max_size=15), min_size=2, max_size=4),
       st.integers(5, 1000), st.floats(-10, 10))
def test_shift_invariance(samples, t, c):
    K = len(samples)
    t = max(t, K + 1)
    a = feed(RawUCB(K), samples).choose(t)
    b = feed(RawUCB(K), [[v + c for v in s] for s in samples]).choose(t)
    base = [raw_ucb_index(stats(s), t, 4, 1)[0] for s in samples]
    # equal choices unless the top two indices are within rounding of each other
    if sorted(base)[-1] - sorted(base)[-2] > 1e-6:
        assert a == b


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_dense_grid_matches_exact_policies(seed):
    env = make_rested_two_arm(T=400, break_pull=100)
    for exact, eff in ((RawUCB, EffRawUCB), (FEWA, EffFEWA)):
        a = simulate(env, exact(2), seed=seed).arms
        b = simulate(env, eff(2, m="dense"), seed=seed).arms
        assert np.array_equal(a, b)


def test_eff_index_after_one_pull_uses_window_one():
    p = feed(EffRawUCB(2), [[0.4], [0.1, 0.1]])
    assert [t.h for t in p.bank.triplets(0) if t.mu_eff is not None] == [1]


def test_eff_constant_noiseless_matches_raw():
    env = Environment(MeanSurface([Constant(0.0), Constant(0.0)], 200), Gaussian(0.0))
    a = simulate(env, RawUCB(2, sigma=0.0)).arms
    b = simulate(env, EffRawUCB(2, sigma=0.0, m=2)).arms
    assert np.array_equal(a, b)


def test_eff_fewa_separation_matches_fewa():
    a = feed(FEWA(2, sigma=0.0), [[1.0], [0.0]]).choose(3)
    b = feed(EffFEWA(2, sigma=0.0), [[1.0], [0.0]]).choose(3)
    assert a == b == 0


# Exp3.S -------------------------------------------------------------------------


def test_exp3s_gamma_one_is_uniform():
    p = Exp3S(3, gamma=1.0, alpha_exp=0.0)
    p.weights = np.array([100.0, 1.0, 1e-3])
    assert np.allclose(p._probs(), 1 / 3)


def test_exp3s_equal_weights_uniform():
    p = Exp3S(4, gamma=0.2, alpha_exp=0.01)
    assert np.allclose(p._probs(), 0.25)


def test_exp3s_zero_rates_freeze_weights():
    # the exponent is gamma * xhat / K, so gamma = 0 leaves the weights unchanged
    p = Exp3S(2, gamma=0.0, alpha_exp=0.0)
    for _ in range(3):
        p.probs = p._probs()
        p.step(0, 1.0)
    assert np.allclose(p.weights, 0.5)


def test_exp3s_weight_grows():
    # weights are kept normalised, so growth shows up as a rising share
    p = Exp3S(2, gamma=0.1, alpha_exp=0.0)
    prev = 0.5
    for t in range(1, 4):
        p.probs = p._probs()
        p.step(0, 1.0)
        assert p.weights[0] > prev
        prev = p.weights[0]


def test_exp3s_rejects_out_of_range():
    p = Exp3S(2, 0.1, 0.0, reward_range=(-1.0, 0.0))
    p.choose(1)
    with pytest.raises(ValueError):
        p.observe(0, 0.5)
    q = Exp3S(2, 0.1, 0.0, reward_range=(-1.0, 0.0), clip=True)
    q.choose(1)
    q.observe(0, 0.5)
    with pytest.raises(ValueError):
        p.step(0, 1.5)


def test_exp3s_tuning_and_switches():
    g, a = exp3s_tuning(2, 100, 0)
    assert a == 0.01
    assert g == pytest.approx(math.sqrt(2 * math.e / ((math.e - 1) * 100)))
    assert exp3s_tuning(2, 10, 100)[0] == 1.0
    assert exp3s_switches_from_budget(2, 1000, 0) == 0
    batch = math.ceil((2 * math.log(2)) ** (1 / 3) * (1000 / 1.0) ** (2 / 3))
    assert exp3s_switches_from_budget(2, 1000, 1.0) == math.ceil(1000 / batch) - 1


def test_exp3s_probabilities_are_a_distribution():
    p = Exp3S(3, 0.1, 0.001, rng=make_rng(5, "x"))
    rng = np.random.default_rng(1)
    for t in range(1, 200):
        a = p.choose(t)
        p.step(a, float(rng.random()))
        assert p.probs.sum() == pytest.approx(1.0)
        assert np.all(p.probs >= 0.1 / 3 - 1e-12)


# greedy oracle and round robin ----------------------------------------------------


def test_greedy_oracle_examples():
    s = MeanSurface([RestlessTable([-0.1]), RestlessTable([-0.2])], 1)
    assert greedy_oracle_choose(s, [0, 0], 1) == 0
    tie = MeanSurface([Constant(0.0), Constant(0.0)], 1)
    assert greedy_oracle_choose(tie, [0, 0], 1) == 0
    mu0, _ = make_prop1_pair(8)
    assert greedy_oracle_choose(mu0.surface, [0, 0], 1) == 0


def test_greedy_oracle_policy_tracks_counts():
    env = make_rested_two_arm(T=20, break_pull=5, L=1.0)
    arms = simulate(env, GreedyOracle(env.surface)).arms
    assert list(arms[:5]) == [1] * 5
    assert set(arms[5:]) == {0}


def test_round_robin():
    p = RoundRobin(3)
    assert [p.choose(t) for t in range(1, 7)] == [0, 1, 2, 0, 1, 2]


def test_make_policy_ids():
    env = make_rested_two_arm(T=100, break_pull=25)
    for pid in ("raw_ucb", "eff_raw_ucb", "fewa", "eff_fewa", "ucb1", "exp3s", "greedy_oracle", "round_robin"):
        p = make_policy(pid, env, {}, rng=make_rng(0, pid))
        assert p.choose(1) in (0, 1)
    with pytest.raises(ValueError):
        make_policy("nope", env)
    assert make_policy("exp3s", env, {"gamma": 0.3}).gamma == 0.3
