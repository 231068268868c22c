"""Monte Carlo execution and aggregation."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import make_rng
from ..evaluation import oracle_curve, regret_trajectory, simulate
from ..policies import make_policy
from .config import ConfigError, ExperimentConfig, thread_count


@dataclass
class RunResult:
    policy: str
    replication: int
    arms: np.ndarray
    means: np.ndarray
    regret: np.ndarray  # cumulative regret per round
    wall_clock: float = 0.0
    prefix_exact: bool = True

    @property
    def final_regret(self) -> float:
        return float(self.regret[-1])


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list

    def for_policy(self, label: str) -> list:
        return [r for r in self.runs if r.policy == label]

    def final_regrets(self, label: str) -> np.ndarray:
        return np.array([r.final_regret for r in self.for_policy(label)])


def _replication(cfg: ExperimentConfig, r: int, shared) -> list:
    if shared is None:
        env = cfg.build_environment(r)
        curve = oracle_curve(env, cfg.oracle, cfg.T or env.T)
    else:
        env, curve = shared
    T = cfg.T or env.T
    if T > env.T:
        raise ConfigError(f"T={T} exceeds the environment horizon {env.T}")
    out = []
    for spec in cfg.policies:
        try:
            pol = make_policy(spec.id, env, spec.params, rng=make_rng(cfg.seed, spec.label, r))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"policy {spec.label}: {e}") from None
        t0 = time.perf_counter()
        tr = simulate(env, pol, cfg.seed, r, T)
        dt = time.perf_counter() - t0
        rep = regret_trajectory(tr, env, curve)
        out.append(RunResult(spec.label, r, tr.arms, tr.means, rep.cumulative, dt, rep.prefix_exact))
    return out


def run_experiment(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentResult:
    """Run every policy on every replication.

    Replication ``r`` draws arm noise from ``(seed, "noise", r, arm)`` so all
    policies face the same realization, and each policy's own randomness from
    ``(seed, label, r)``. Results are ordered by replication then policy, so
    the output does not depend on the thread count.
    """
    shared = None
    if not cfg.varies_per_replication():
        env = cfg.build_environment(0)
        shared = (env, oracle_curve(env, cfg.oracle, cfg.T or env.T))
    n = thread_count(threads)
    reps = range(cfg.replications)
    if n == 1 or cfg.replications == 1:
        chunks = [_replication(cfg, r, shared) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            chunks = list(pool.map(lambda r: _replication(cfg, r, shared), reps))
    return ExperimentResult(cfg, [run for chunk in chunks for run in chunk])


@dataclass
class PolicyAggregate:
    policy: str
    mean: np.ndarray
    q_lo: np.ndarray
    q_hi: np.ndarray
    wall_clock: float
    replications: int

    @property
    def T(self) -> int:
        return len(self.mean)


@dataclass
class AggregateResult:
    quantiles: tuple
    policies: list = field(default_factory=list)

    def __getitem__(self, label) -> PolicyAggregate:
        for p in self.policies:
            if p.policy == label:
                return p
        raise KeyError(label)


def aggregate(runs, quantiles=(0.1, 0.9)) -> AggregateResult:
    """Pointwise mean and empirical quantiles (linear interpolation) per policy."""
    if isinstance(runs, ExperimentResult):
        runs = runs.runs
    labels = list(dict.fromkeys(r.policy for r in runs))
    out = AggregateResult(tuple(quantiles))
    for label in labels:
        sel = [r for r in runs if r.policy == label]
        M = np.vstack([r.regret for r in sel])
        lo, hi = np.quantile(M, quantiles, axis=0)
        out.policies.append(PolicyAggregate(label, M.mean(axis=0), lo, hi,
                                            float(sum(r.wall_clock for r in sel)), len(sel)))
    return out
