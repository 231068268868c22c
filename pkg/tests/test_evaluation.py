import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotbandit.core import (
    Constant, Gaussian, MeanSurface, RestedTable, RestlessTable, SettingError, SurfaceKind,
)
from rotbandit.environments import Environment, make_prop1_pair, make_rested_two_arm
from rotbandit.evaluation import (
    InputError, SizeError, Trace, event_failure_frequency, exhaustive_optimal, favorable_event_check,
    greedy_oracle_value, greedy_trace, oracle_curve, regret_trajectory, sequence_trace, simulate,
    theoretical_bound, total_reward,
)
from rotbandit.policies import EffRawUCB, FEWA, GreedyOracle, RawUCB, RoundRobin


def stationary(*means, T=10, sigma=0.0):
    return Environment(MeanSurface(tuple(Constant(m) for m in means), T), Gaussian(sigma))


# total reward and oracles ---------------------------------------------------------------


def test_total_reward_zero():
    env = stationary(0.0, 0.0)
    assert total_reward(simulate(env, RoundRobin(2))) == 0


@pytest.mark.parametrize("T", [8, 9, 15])
def test_mixed_pair_greedy_values(T):
    mu0, mu1 = make_prop1_pair(T)
    assert total_reward(greedy_trace(mu1)) == T
    assert greedy_oracle_value(mu0) == T // 2


def test_mixed_pair_switching_policy_value():
    mu0, _ = make_prop1_pair(8)
    assert total_reward(sequence_trace(mu0, [1] * 4 + [0] * 4)) == 6.0


def test_greedy_on_stationary():
    assert greedy_oracle_value(stationary(0.2, 0.7, 0.1, T=13)) == pytest.approx(13 * 0.7)


def test_exhaustive_mixed_pair():
    mu0, mu1 = make_prop1_pair(8)
    v0, seq0 = exhaustive_optimal(mu0)
    assert v0 == 6.0 and total_reward(sequence_trace(mu0, seq0)) == 6.0
    assert exhaustive_optimal(mu1)[0] == 8.0
    assert exhaustive_optimal(mu0, exact=True)[0] == 6


def test_exhaustive_budget():
    env = stationary(0.0, 0.0, 0.0, T=200)
    with pytest.raises(SizeError):
        exhaustive_optimal(env, budget=1000)


def _random_surface(data, kind):
    K = data.draw(st.integers(1, 3))
    T = data.draw(st.integers(1, 7))
    vals = st.floats(-1, 1, allow_nan=False)
    arms = []
    for _ in range(K):
        row = sorted(data.draw(st.lists(vals, min_size=T, max_size=T)), reverse=True)
        arms.append(RestedTable(row) if kind == "rested" else RestlessTable(row))
    return Environment(MeanSurface(tuple(arms), T), Gaussian(0.0))


@settings(max_examples=60, deadline=None)
@given(st.data(), st.sampled_from(["rested", "restless"]))
def test_greedy_is_optimal_on_pure_surfaces(data, kind):
    env = _random_surface(data, kind)
    assert exhaustive_optimal(env)[0] == pytest.approx(greedy_oracle_value(env), abs=1e-9)


def _brute_force(env):
    import itertools
    best = -math.inf
    for seq in itertools.product(range(env.n_arms), repeat=env.T):
        best = max(best, total_reward(sequence_trace(env, list(seq))))
    return best


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_exhaustive_matches_brute_force_on_mixed_surfaces(data):
    T = data.draw(st.integers(1, 6))
    vals = st.floats(-1, 1, allow_nan=False)
    a = sorted(data.draw(st.lists(vals, min_size=T, max_size=T)), reverse=True)
    b = sorted(data.draw(st.lists(vals, min_size=T, max_size=T)), reverse=True)
    env = Environment(MeanSurface((RestedTable(a), RestlessTable(b)), T), Gaussian(0.0))
    assert env.kind is SurfaceKind.GENERAL
    v = exhaustive_optimal(env)[0]
    assert v == pytest.approx(_brute_force(env), abs=1e-9)
    assert v >= greedy_oracle_value(env) - 1e-9


# regret -----------------------------------------------------------------------------------


def test_oracle_against_itself():
    env = make_rested_two_arm(T=300, break_pull=100, sigma=0.0)
    rep = regret_trajectory(simulate(env, GreedyOracle(env.surface)), env, "greedy")
    assert np.all(rep.cumulative == 0) and rep.prefix_exact


@pytest.mark.parametrize("T", [4, 8, 12, 16, 20])
def test_mixed_pair_greedy_regret(T):
    mu0, _ = make_prop1_pair(T)
    tr = simulate(mu0, GreedyOracle(mu0.surface))
    rep = regret_trajectory(tr, mu0, "exhaustive")
    assert rep.final == T // 4
    assert not rep.prefix_exact


def test_greedy_oracle_refused_on_general():
    mu0, _ = make_prop1_pair(8)
    with pytest.raises(SettingError):
        regret_trajectory(greedy_trace(mu0), mu0, "greedy")
    assert oracle_curve(mu0).kind == "exhaustive"


def test_round_robin_regret():
    env = stationary(0.0, -1.0, T=10)
    assert regret_trajectory(simulate(env, RoundRobin(2)), env).final == 5


# favorable event ---------------------------------------------------------------------------


def test_event_always_holds_without_noise():
    env = make_rested_two_arm(T=400, break_pull=100, sigma=0.0)
    tr = simulate(env, RawUCB(2, sigma=0.0))
    rep = favorable_event_check(tr, env, alpha=4, sigma=0.0)
    assert rep.event.all() and rep.violations == 0


@pytest.mark.parametrize("seed", range(5))
def test_deviation_lemma_raw(seed):
    env = make_rested_two_arm(T=1000, break_pull=250)
    tr = simulate(env, RawUCB(2), seed=seed)
    rep = favorable_event_check(tr, env, alpha=4, sigma=1)
    assert rep.violations == 0
    assert rep.event_rounds > 900


@pytest.mark.parametrize("seed", range(3))
def test_deviation_lemma_fewa(seed):
    env = make_rested_two_arm(T=1000, break_pull=250)
    tr = simulate(env, FEWA(2), seed=seed)
    assert favorable_event_check(tr, env, alpha=4, sigma=1, policy="fewa").violations == 0


@pytest.mark.parametrize("seed", range(3))
def test_deviation_lemma_eff_grid(seed):
    env = make_rested_two_arm(T=1000, break_pull=250)
    tr = simulate(env, EffRawUCB(2, m=2), seed=seed)
    rep = favorable_event_check(tr, env, alpha=4, sigma=1, mode="eff", m=2)
    assert rep.violations == 0


def test_event_detects_bad_noise():
    # a huge observation on arm 0 breaks concentration from then on
    env = stationary(0.0, 0.0, T=20, sigma=1.0)
    arms = np.array([0, 1] * 10)
    means = np.zeros(20)
    values = np.zeros(20)
    values[0] = 100.0
    rep = favorable_event_check(Trace(arms, means, values), env, alpha=4, sigma=1.0)
    assert not rep.event[1:].any()


def test_event_failure_frequency_small():
    f = event_failure_frequency(t=100, alpha=4, K=2, replications=20_000, seed=1)
    assert f <= 2 * 100 ** (2 - 4)


# bounds ------------------------------------------------------------------------------------


def test_piecewise_bound_example():
    v = theoretical_bound("restless_piecewise",
                          {"upsilon": 1, "K": 2, "T": 10**4, "sigma": 1, "alpha": 4, "V": 1})
    C = 2 * math.sqrt(8)
    assert v == pytest.approx(C * math.sqrt(math.log(1e4)) * (math.sqrt(2e4) + 2) + 12, rel=1e-12)
    assert v == pytest.approx(2474.2188634368645, rel=1e-12)


def test_lower_piecewise_example():
    v = theoretical_bound("lower_piecewise", {"upsilon": 4, "K": 3, "T": 10**4, "sigma": 1})
    assert v == pytest.approx(math.sqrt(12e4) / 32) == pytest.approx(10.825, abs=1e-3)


def test_horizon_one_keeps_additive_constants():
    base = {"sigma": 1, "K": 3, "T": 1}
    assert theoretical_bound("restless_piecewise", {**base, "upsilon": 2, "V": 0.5}) == pytest.approx(9.0)
    assert theoretical_bound("rested_minimax", {**base, "L": 2}) == pytest.approx(36.0)
    assert theoretical_bound("rested_gap", {**base, "L": 1, "pseudo_gaps": [0.5, 1]}) == pytest.approx(12.0)
    assert theoretical_bound("restless_budget", {**base, "V": 1}) == 0.0
    assert theoretical_bound("restless_gap", {**base, "gaps": [[0.1, 0.2]]}) == 0.0


def test_budget_bounds():
    p = {"sigma": 1.0, "V": 2.0, "K": 2, "T": 1000, "alpha": 4}
    C = 2 * math.sqrt(8)
    assert theoretical_bound("restless_budget", p) == pytest.approx(
        4 * (C * C * 2 * 2 * 1000 ** 2 * math.log(1000)) ** (1 / 3))
    assert theoretical_bound("lower_budget", p) == pytest.approx((2 * 2 * 1000 ** 2) ** (1 / 3) / (16 * math.sqrt(2)))
    assert theoretical_bound("restless_budget", {**p, "policy": "fewa"}) > theoretical_bound("restless_budget", p)
    assert theoretical_bound("rested_minimax", {**p, "L": 1, "C": 1.0}) == pytest.approx(
        math.sqrt(math.log(1000)) * (math.sqrt(2000) + 2) + 12)


@pytest.mark.parametrize("setting,params", [
    ("restless_budget", {"sigma": 1, "K": 2, "T": 10}),
    ("rested_gap", {"sigma": 1, "T": 10, "L": 1}),
    ("lower_piecewise", {"K": 2, "T": 10, "upsilon": 1}),
    ("nonsense", {}),
])
def test_bound_input_errors(setting, params):
    with pytest.raises(InputError):
        theoretical_bound(setting, params)
