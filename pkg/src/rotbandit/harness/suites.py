"""Acceptance suites, runnable from the CLI (``verify``) and from the test-suite."""

from __future__ import annotations

import hashlib
import math
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..core import Constant, Gaussian, MeanSurface, RestedStep, make_rng
from ..environments import (
    Environment, PiecewiseSpec, dataset_env_from_table, lb_gap, make_piecewise_lb_instance,
    make_prop1_pair, make_rested_two_arm, random_i_star,
)
from ..evaluation import (
    event_failure_frequency, exhaustive_optimal, favorable_event_check, greedy_trace,
    oracle_curve, regret_trajectory, simulate, theoretical_bound,
)
from ..policies import FEWA, EffFEWA, EffRawUCB, RawUCB
from ..windowstats import eff_property_violations
from .config import config_from_dict
from .ingest import ingest_click_log, synthetic_click_log, synthetic_truth, write_table_csv
from .output import emit_aggregate_csv, emit_runs_csv
from .runner import aggregate, run_experiment
from .svg import emit_svg


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(name, fn, limit=None):
    t0 = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t0
    if limit is not None and dt > limit:
        ok, detail = False, f"{detail}; exceeded the {limit:.0f}s budget"
    return SuiteResult(name, bool(ok), detail, dt)


# 1 --------------------------------------------------------------------------


def _frac_total(trace):
    return sum((Fraction(float(m)) for m in trace.means), Fraction(0))


def oracle_exactness():
    bad = []
    for T in (4, 8, 12, 16, 20):
        mu0, mu1 = make_prop1_pair(T)
        J0, _ = exhaustive_optimal(mu0, exact=True)
        g0 = _frac_total(greedy_trace(mu0))
        J1, _ = exhaustive_optimal(mu1, exact=True)
        g1 = _frac_total(greedy_trace(mu1))
        if J0 != Fraction(3, 2) * (T // 2):
            bad.append(f"T={T}: J*(mu0)={J0}")
        if J0 - g0 != T // 4:
            bad.append(f"T={T}: greedy regret on mu0 {J0 - g0}")
        if J1 - g1 != 0:
            bad.append(f"T={T}: greedy regret on mu1 {J1 - g1}")
    return not bad, "; ".join(bad) or "J*(mu0)=(3/2)floor(T/2), greedy regret floor(T/4) on mu0 and 0 on mu1"


# 2 --------------------------------------------------------------------------


def three_arm_rested(T=10_000, sigma=1.0):
    arms = (Constant(0.0), RestedStep(0.5, -0.5, T // 4), RestedStep(0.25, -0.25, T // 10))
    return Environment(MeanSurface(arms, T), Gaussian(sigma), (-0.5, 0.5), "three_arm_rested")


def eff_equivalence(runs=50, T=10_000):
    env = three_arm_rested(T)
    diverged = []
    for r in range(runs):
        for exact, eff, label in ((RawUCB, EffRawUCB, "raw"), (FEWA, EffFEWA, "fewa")):
            a = simulate(env, exact(3, 4.0, 1.0), 11, r).arms
            b = simulate(env, eff(3, 4.0, 1.0, m="dense", horizon=T), 11, r).arms
            if not np.array_equal(a, b):
                diverged.append(f"{label}#{r}@t={int(np.argmax(a != b)) + 1}")
    return not diverged, (f"{2 * runs} paired runs, divergences: {len(diverged)}"
                          + (f" ({', '.join(diverged[:5])})" if diverged else ""))


# 3 --------------------------------------------------------------------------


def eff_structure(streams=10_000, max_len=512, seed=3):
    rng = make_rng(seed, "eff-structure")
    totals = {}
    for k in range(streams):
        m = 2 if k % 2 == 0 else 1.5
        v = rng.standard_normal(int(rng.integers(1, max_len + 1)))
        for key, c in eff_property_violations(v, m).items():
            totals[key] = totals.get(key, 0) + c
    return sum(totals.values()) == 0, "violations " + ", ".join(f"{k}={c}" for k, c in totals.items())


# 4 --------------------------------------------------------------------------


def three_arm_piecewise(T=2000, sigma=1.0):
    q = T // 4
    spec = PiecewiseSpec((q, 2 * q, 3 * q), ((0.5, 0.5, -0.5, -0.5), (0.2, 0.2, 0.2, 0.2), (0.8, 0.0, 0.0, -1.0)))
    return spec.to_environment(T, Gaussian(sigma), name="three_arm_piecewise")


def deviation_lemma(reps=100, T=2000):
    envs = (make_rested_two_arm(1.0, T // 4, T, 1.0), three_arm_piecewise(T))
    counts = {}
    for env in envs:
        for cls, kind in ((RawUCB, "raw"), (FEWA, "fewa")):
            v = ev = 0
            for r in range(reps):
                tr = simulate(env, cls(env.n_arms, 4.0, 1.0), 5, r)
                rep = favorable_event_check(tr, env, 4.0, 1.0, policy=kind)
                v += rep.violations
                ev += rep.event_rounds
            counts[f"{env.name}/{kind}"] = (v, ev)
    ok = all(v == 0 for v, _ in counts.values())
    return ok, "; ".join(f"{k}: {v} violations over {ev} event rounds" for k, (v, ev) in counts.items())


# 5 --------------------------------------------------------------------------


def rested_ratio(reps=200, T=10_000):
    cfg = config_from_dict({
        "environment": {"generator": "rested_two_arm", "params": {"L": 1.0, "break_pull": T // 4, "T": T, "sigma": 1.0}},
        "policies": [{"id": "raw_ucb", "params": {"alpha": 4}}, {"id": "fewa", "params": {"alpha": 4}}],
        "replications": reps, "seed": 2024, "write_runs": False,
    })
    res = run_experiment(cfg)
    raw, fewa = res.final_regrets("raw_ucb").mean(), res.final_regrets("fewa").mean()
    ratio = fewa / raw
    return 2 <= ratio <= 8, f"FEWA {fewa:.1f} / RAW-UCB {raw:.1f} = {ratio:.2f} (band [2, 8])"


# 6 --------------------------------------------------------------------------


def bound_domination(reps=100, K=3, U=4, T=10_000, sigma=1.0):
    gap = lb_gap(K, U, T, sigma)
    finals = []
    for r in range(reps):
        env = make_piecewise_lb_instance(K, U, T, sigma, random_i_star(K, U, make_rng(9, "i_star", r)))
        tr = simulate(env, RawUCB(K, 4.0, sigma), 9, r)
        finals.append(regret_trajectory(tr, env, "greedy").final)
    mean = float(np.mean(finals))
    # the family's variation budget: at most a 2*gap drop at each of the U-1 breakpoints
    bound = theoretical_bound("restless_piecewise",
                              dict(policy="raw", alpha=4.0, sigma=sigma, K=K, T=T, upsilon=U, V=2 * gap * (U - 1)))
    return 0 <= mean <= bound, f"mean regret {mean:.2f} within [0, {bound:.1f}]"


# 7 --------------------------------------------------------------------------


def sublinearity(reps=200, T=10_000):
    env = Environment(MeanSurface((Constant(0.0), Constant(-0.5)), T), Gaussian(1.0), (-0.5, 0.0), "stationary")
    curve = oracle_curve(env, "greedy")
    tot = np.zeros(T)
    for r in range(reps):
        tot += regret_trajectory(simulate(env, RawUCB(2, 1.4, 1.0), 17, r), env, curve).cumulative
    tot /= reps
    ratio = tot[T - 1] / tot[T // 2 - 1]
    return ratio <= 1.5, f"regret({T})={tot[T - 1]:.2f}, regret({T // 2})={tot[T // 2 - 1]:.2f}, ratio {ratio:.3f} (<= 1.5)"


# 8 --------------------------------------------------------------------------


def event_frequency(reps=100_000, t=100, alpha=4.0, K=2):
    f = event_failure_frequency(t, alpha, K, 1.0, reps, seed=8)
    limit = K * t ** (2 - alpha)
    return f <= limit, f"failure frequency {f:.2e} <= {limit:.1e}"


# 9 --------------------------------------------------------------------------

GOLDEN_LOG_SHA256 = "a21ddbdb8cc095872530cbcd070aed8e36844532a3fdf8c0677fc56022eec111"
GOLDEN_TABLE_SHA256 = "7e97ba8cef70b3df077448ee4f7fe9da9fde779975a8e3919176190c1c471a07"
GOLDEN_WINDOW = 1000


def _sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def ingest_golden(workdir=None):
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(workdir or tmp)
        log = synthetic_click_log(d / "clicks.csv", 100_000, seed=0)
        rows = ingest_click_log(log, 5, GOLDEN_WINDOW)
        t1 = write_table_csv(rows, d / "table1.csv")
        t2 = write_table_csv(ingest_click_log(log, 5, GOLDEN_WINDOW), d / "table2.csv")
        err = max(abs(m - synthetic_truth(b, a)) for b, a, m, _ in rows)
        problems = []
        if _sha(log) != GOLDEN_LOG_SHA256:
            problems.append("synthetic log hash changed")
        if t1.read_bytes() != t2.read_bytes():
            problems.append("two ingests differ")
        if _sha(t1) != GOLDEN_TABLE_SHA256:
            problems.append("table hash differs from the frozen golden file")
        if err > 0.02:
            problems.append(f"bucket error {err:.4f} > 0.02")
        buckets = len({b for b, *_ in rows})
        detail = f"{buckets} buckets, max |mean - truth| = {err:.4f}"
        return not problems, detail + ("; " + "; ".join(problems) if problems else "; byte-identical, hashes match")


# 10 -------------------------------------------------------------------------


def dataset_smoke(reps=4, workdir=None):
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(workdir or tmp)
        log = synthetic_click_log(d / "clicks.csv", 100_000, seed=0)
        rows = ingest_click_log(log, 5, GOLDEN_WINDOW)
        write_table_csv(rows, d / "table.csv")
        env = dataset_env_from_table(rows, 10)
        sigma = math.sqrt(0.29) / 10
        cfg = config_from_dict({
            "environment": {"generator": "dataset_table", "params": {"path": str(d / "table.csv"), "samples_per_round": 10}},
            "policies": [
                {"id": "raw_ucb", "params": {"alpha": 1.4, "sigma": sigma}},
                {"id": "eff_raw_ucb", "params": {"alpha": 1.4, "sigma": sigma, "m": 2}},
                {"id": "fewa", "params": {"alpha": 0.06, "sigma": sigma}},
                {"id": "exp3s", "params": {"V": "auto"}},
                {"id": "greedy_oracle"},
            ],
            "replications": reps, "seed": 6,
        })
        res = run_experiment(cfg)
        agg = aggregate(res, cfg.quantiles)
        emit_runs_csv(res.runs, d / "runs.csv")
        emit_aggregate_csv(agg, d / "aggregate.csv")
        emit_svg(agg, d / "regret.svg", title="synthetic click log")
        greedy = np.abs(np.concatenate([r.regret for r in res.for_policy("greedy_oracle")])).max()
        finals = ", ".join(f"{p.policy}={p.mean[-1]:.2f}" for p in agg.policies)
        return greedy == 0.0, f"T={env.T}, mean final regret {finals}; greedy max |regret| = {greedy}"


SUITES = {
    "oracle_exactness": (oracle_exactness, 10),
    "eff_equivalence": (eff_equivalence, 120),
    "eff_structure": (eff_structure, None),
    "deviation_lemma": (deviation_lemma, 300),
    "rested_ratio": (rested_ratio, 600),
    "bound_domination": (bound_domination, 600),
    "sublinearity": (sublinearity, None),
    "event_frequency": (event_frequency, 300),
    "ingest_golden": (ingest_golden, None),
    "dataset_smoke": (dataset_smoke, 300),
}


def run_suite(name: str) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(name)
    fn, limit = SUITES[name]
    return _timed(name, fn, limit)
