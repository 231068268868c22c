import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rotbandit.core import (
    Constant, Gaussian, HorizonError, MeanSurface, RestlessTable, SettingError, SurfaceKind, make_rng,
    validate_mean_surface,
)
from rotbandit.environments import (
    Environment, PiecewiseSpec, SchemaError, batch_lengths, dataset_env_from_table, lb_gap,
    load_piecewise_csv, make_piecewise_lb_instance, make_prop1_pair, make_rested_two_arm,
    random_i_star, set_upsilon, step, variation_budget,
)


def restless(*rows, T=None):
    T = T or len(rows[0])
    return Environment(MeanSurface(tuple(RestlessTable(r) for r in rows), T), Gaussian(0.0))


# step -----------------------------------------------------------------------------


def test_noiseless_observation_is_the_mean():
    env = make_rested_two_arm(T=10, break_pull=3, sigma=0.0)
    obs, counts = step(env, 1, 1, make_rng(0), [0, 0])
    assert obs.value == 0.5 and list(counts) == [0, 1]


def test_rested_mean_ignores_round():
    env = make_rested_two_arm(T=100, break_pull=3)
    assert env.surface.mean(1, 5, 2) == env.surface.mean(1, 90, 2)


def test_step_past_horizon():
    env = make_rested_two_arm(T=10, break_pull=3)
    with pytest.raises(HorizonError):
        step(env, 0, 11, make_rng(0), [0, 0])
    ep = env.episode()
    with pytest.raises(HorizonError):
        ep.pull(0, 11)


def test_gaussian_clt():
    env = Environment(MeanSurface((Constant(0.0),), 100_000), Gaussian(1.0))
    ep = env.episode(seed=4)
    vals = np.array([ep.pull(0, t)[1].value for t in range(1, 100_001)])
    assert abs(vals.mean()) < 0.02
    assert vals.std() == pytest.approx(1.0, abs=0.02)


def test_noise_streams_are_paired_by_pull_count():
    env = make_rested_two_arm(T=50, break_pull=10)
    a, b = env.episode(seed=9, replication=2), env.episode(seed=9, replication=2)
    x = [a.pull(0, t)[1].value for t in range(1, 6)]
    b.pull(1, 1)
    y = [b.pull(0, t)[1].value for t in range(2, 7)]
    assert x == y


# generators -----------------------------------------------------------------------


def test_rested_two_arm():
    env = make_rested_two_arm()
    assert (env.T, env.sigma, env.kind) == (10_000, 1.0, SurfaceKind.RESTED)
    s = env.surface
    assert s.mean(0, 7, 123) == 0.0
    assert s.mean(1, 1, 2499) == 0.5
    assert s.mean(1, 1, 2500) == -0.5  # the 2501st pull has 2500 prior pulls
    for L in (1e-3, 10.0):
        assert validate_mean_surface(make_rested_two_arm(L=L).surface, 10_000, 3000) == []


def test_mixed_pair():
    mu0, mu1 = make_prop1_pair(8)
    assert mu0.kind is SurfaceKind.GENERAL and mu1.kind is SurfaceKind.RESTLESS
    assert mu0.sigma == 0.0
    assert [mu0.surface.mean(0, 1, n) for n in (0, 3, 4)] == [1.0, 1.0, 0.0]
    assert [mu0.surface.mean(1, t, 0) for t in (1, 4, 5)] == [0.5, 0.5, 0.0]
    assert mu1.surface.mean(0, 8, 7) == 1.0
    for env in (mu0, mu1):
        assert validate_mean_surface(env.surface, 8, 8) == []


def test_lb_gap_and_batches():
    assert lb_gap(2, 2, 100, 1.0) == pytest.approx(0.0353553, abs=1e-7)
    assert batch_lengths(10, 3) == [4, 3, 3]


@given(st.integers(1, 5000), st.data())
def test_batch_lengths_sum_to_horizon(T, data):
    U = data.draw(st.integers(1, T))
    b = batch_lengths(T, U)
    assert sum(b) == T and len(b) == U and max(b) - min(b) <= 1


def test_lb_instance_levels():
    env = make_piecewise_lb_instance(2, 3, 10, 1.0, [1, 0, 2])
    d = lb_gap(2, 3, 10, 1.0)
    s = env.surface
    # batches cover rounds 1-4, 5-7, 8-10
    assert s.mean(0, 4, 0) == pytest.approx(0.0) and s.mean(1, 4, 0) == pytest.approx(-d)
    assert s.mean(0, 5, 0) == pytest.approx(-2 * d) == pytest.approx(s.mean(1, 6, 0))
    assert s.mean(1, 8, 0) == pytest.approx(-2 * d) and s.mean(0, 10, 0) == pytest.approx(-3 * d)
    assert validate_mean_surface(s, 10, 0) == []
    lo, hi = env.declared_range
    assert lo <= -3 * d and hi == 0.0


def test_lb_instance_rejects_bad_i_star():
    with pytest.raises(ValueError):
        make_piecewise_lb_instance(2, 2, 10, 1.0, [3, 1])
    with pytest.raises(ValueError):
        make_piecewise_lb_instance(2, 2, 10, 1.0, [1])


def test_random_i_star_and_upsilon():
    i = random_i_star(3, 50, make_rng(1))
    assert len(i) == 50 and set(i) <= {1, 2, 3}
    assert 1 <= set_upsilon(1.0, 10_000, 2, 1.0) <= 10_000


@given(st.integers(1, 4), st.integers(1, 30), st.integers(30, 500), st.integers(0, 2**32))
def test_lb_surfaces_are_non_increasing(K, U, T, seed):
    env = make_piecewise_lb_instance(K, U, T, 1.0, random_i_star(K, U, make_rng(seed)))
    assert validate_mean_surface(env.surface, T, 0) == []


# piecewise specification ------------------------------------------------------------


def test_piecewise_spec_violations():
    spec = PiecewiseSpec((5,), ((0.0, -0.1), (-0.2, 0.1)))
    assert spec.violations() == [(1, 1)]
    env = PiecewiseSpec((5,), ((0.0, -0.1), (-0.2, -0.3))).to_environment(10)
    assert env.surface.mean(0, 5, 0) == 0.0 and env.surface.mean(0, 6, 0) == -0.1
    with pytest.raises(ValueError):
        PiecewiseSpec((5, 3), ((0, 0, 0),))


def test_load_piecewise_csv(tmp_path):
    p = tmp_path / "pw.csv"
    p.write_text("end_round,arm0,arm1\n4,0,-0.5\n10,-1,-0.5\n")
    spec = load_piecewise_csv(p)
    assert spec.breakpoints == (4,) and spec.levels == ((0.0, -1.0), (-0.5, -0.5))
    p.write_text("round,a\n1,2\n")
    with pytest.raises(SchemaError):
        load_piecewise_csv(p)


# variation budget -------------------------------------------------------------------


def test_variation_budget_examples():
    assert variation_budget(restless([0.0] * 5, [-1.0] * 5)) == 0
    assert variation_budget(restless([0.0, 0.0, -2.0, -2.0], [-5.0] * 4)) == 2.0
    v = variation_budget(restless([0.0, 0.0, -0.3], [-0.1, -0.2, -0.2]))
    assert v == pytest.approx(0.4)


def test_variation_budget_rejects_rested():
    with pytest.raises(SettingError):
        variation_budget(make_rested_two_arm(T=100, break_pull=10))


# dataset environment ----------------------------------------------------------------


def test_dataset_ceiling_rule():
    env = dataset_env_from_table([(0, "a", 0.2, 30)], samples_per_round=10)
    assert env.T == 3
    env = dataset_env_from_table([(0, "a", 0.2, 31), (1, "a", 0.1, 5)], samples_per_round=10)
    assert env.T == 5
    assert env.surface.mean(0, 4, 0) == 0.2 and env.surface.mean(0, 5, 0) == 0.1


def test_dataset_zero_mean_arm():
    env = dataset_env_from_table([(0, "a", 0.0, 40), (0, "b", 0.7, 40)])
    ep = env.episode(seed=1)
    assert all(ep.pull(0, t)[1].value == 0.0 for t in range(1, 5))


def test_dataset_constant_is_stationary():
    env = dataset_env_from_table([(b, a, m, 20) for b in range(3) for a, m in (("x", 0.3), ("y", 0.6))])
    assert variation_budget(env) == 0.0
    assert env.sigma == pytest.approx(0.5 / math.sqrt(10))


def test_dataset_bernoulli_batch_mean():
    env = dataset_env_from_table([(0, "a", 0.3, 200_000)])
    ep = env.episode(seed=2)
    vals = [ep.pull(0, t)[1].value for t in range(1, 20_001)]
    assert np.mean(vals) == pytest.approx(0.3, abs=0.005)
    assert all(abs(v * 10 - round(v * 10)) < 1e-9 for v in vals[:100])


@pytest.mark.parametrize("rows", [
    [(0, "a", 0.1, 10), (0, "b", 0.1, 10), (1, "a", 0.1, 10)],     # missing cell
    [(0, "a", 0.1, 10), (0, "a", 0.2, 10)],                        # duplicate
    [(0, "a", 0.1, 10), (0, "b", 0.1, 11)],                        # traffic mismatch
    [(0, "a", 1.5, 10)],                                           # not a probability
    [],
])
def test_dataset_schema_errors(rows):
    with pytest.raises(SchemaError):
        dataset_env_from_table(rows)
