"""Simulation traces, oracles, regret, favorable-event diagnostics and bound calculators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import _kernels as kn
from .core import Policy, SettingError, SurfaceKind, log_radius, make_rng
from .environments import Environment
from .policies import GreedyOracle, greedy_oracle_choose, policy_constant
from .windowstats import EffBank, StatsBank


class SizeError(ValueError):
    """Exhaustive search would exceed its state budget."""


class InputError(ValueError):
    """Missing or malformed calculator parameter."""


@dataclass
class Trace:
    """One run: pulled arm, mean collected and noisy observation per round (index ``t - 1``)."""

    arms: np.ndarray
    means: np.ndarray
    values: np.ndarray

    def __len__(self):
        return len(self.arms)

    @property
    def T(self) -> int:
        return len(self.arms)

    def rows(self):
        for t, (a, m, v) in enumerate(zip(self.arms.tolist(), self.means.tolist(), self.values.tolist()), 1):
            yield t, a, m, v


def simulate(env: Environment, policy: Policy, seed: int = 0, replication: int = 0,
             T: Optional[int] = None, streams: Optional[list] = None) -> Trace:
    """Run ``policy`` on ``env`` for ``T`` rounds with the replication's shared noise streams."""
    T = env.T if T is None else T
    if T > env.T:
        raise ValueError("T exceeds the environment horizon")
    ep = env.episode(seed, replication) if streams is None else _episode(env, streams)
    arms = np.empty(T, dtype=np.int64)
    means = np.empty(T)
    values = np.empty(T)
    choose, observe, pull = policy.choose, policy.observe, ep.pull
    for t in range(1, T + 1):
        a = choose(t)
        mean, obs = pull(a, t)
        observe(a, obs.value)
        arms[t - 1] = a
        means[t - 1] = mean
        values[t - 1] = obs.value
    return Trace(arms, means, values)


def _episode(env, streams):
    from .environments import Episode
    return Episode(env, streams)


def total_reward(trace: Trace) -> float:
    return math.fsum(trace.means.tolist())


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def greedy_trace(env: Environment, T: Optional[int] = None) -> Trace:
    """Greedy oracle run on the true means (no noise)."""
    T = env.T if T is None else T
    surface = env.surface
    counts = np.zeros(env.n_arms, dtype=np.int64)
    arms = np.empty(T, dtype=np.int64)
    means = np.empty(T)
    for t in range(1, T + 1):
        mu = surface.means(t, counts)
        a = int(np.argmax(mu))
        arms[t - 1], means[t - 1] = a, mu[a]
        counts[a] += 1
    return Trace(arms, means, means.copy())


def greedy_oracle_value(env: Environment, T: Optional[int] = None) -> float:
    return total_reward(greedy_trace(env, T))


def _compositions(total, k):
    if k == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, k - 1):
            yield (first,) + rest


def exhaustive_optimal(env: Environment, T: Optional[int] = None, budget: int = 10**7,
                       exact: bool = False) -> tuple:
    """Exact ``max`` of the total reward over all deterministic pull sequences.

    Backward induction over pull-count vectors: the round is the number of
    pulls so far plus one, so ``(counts)`` is a sufficient state for any
    surface and the search touches ``C(T + K, K)`` states instead of ``K^T``
    sequences. ``exact`` accumulates values as ``Fraction``.

    Returns ``(value, sequence)`` where ``sequence`` is one optimal pull
    order (smallest arm on ties).
    """
    T = env.T if T is None else T
    K = env.n_arms
    if math.comb(T + K, K) > budget:
        raise SizeError(f"{math.comb(T + K, K)} states exceed the budget of {budget}")
    surface = env.surface
    conv = Fraction if exact else float
    zero = conv(0)
    value = {}
    for s in range(T, -1, -1):
        for c in _compositions(s, K):
            if s == T:
                value[c] = zero
                continue
            t = s + 1
            best = None
            for i in range(K):
                nxt = c[:i] + (c[i] + 1,) + c[i + 1:]
                v = conv(surface.mean(i, t, c[i])) + value[nxt]
                if best is None or v > best:
                    best = v
            value[c] = best
    seq, c = [], (0,) * K
    for s in range(T):
        t = s + 1
        for i in range(K):
            nxt = c[:i] + (c[i] + 1,) + c[i + 1:]
            if conv(surface.mean(i, t, c[i])) + value[nxt] == value[c]:
                break
        seq.append(i)
        c = nxt
    return value[(0,) * K], seq


def sequence_trace(env: Environment, seq) -> Trace:
    counts = np.zeros(env.n_arms, dtype=np.int64)
    means = np.empty(len(seq))
    for t, a in enumerate(seq, 1):
        means[t - 1] = env.surface.mean(a, t, int(counts[a]))
        counts[a] += 1
    return Trace(np.asarray(seq, dtype=np.int64), means, means.copy())


@dataclass
class OracleCurve:
    kind: str
    means: np.ndarray  # per-round mean collected by the oracle
    value: float

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.means)


def oracle_curve(env: Environment, kind: str = "auto", T: Optional[int] = None) -> OracleCurve:
    """Per-round oracle means. ``auto`` picks greedy for pure settings, exhaustive otherwise."""
    T = env.T if T is None else T
    if kind == "auto":
        kind = "exhaustive" if env.kind is SurfaceKind.GENERAL else "greedy"
    if kind == "greedy":
        if env.kind is SurfaceKind.GENERAL:
            raise SettingError("greedy oracle is not optimal on a surface mixing rested and restless arms")
        tr = greedy_trace(env, T)
    elif kind == "exhaustive":
        _, seq = exhaustive_optimal(env, T)
        tr = sequence_trace(env, seq)
    else:
        raise ValueError(f"unknown oracle kind {kind!r}")
    return OracleCurve(kind, tr.means, total_reward(tr))


@dataclass
class RegretReport:
    instantaneous: np.ndarray
    cumulative: np.ndarray
    oracle: str
    prefix_exact: bool = True

    @property
    def final(self) -> float:
        return float(self.cumulative[-1]) if len(self.cumulative) else 0.0


def regret_trajectory(trace: Trace, env: Environment, oracle="auto") -> RegretReport:
    """Pseudo-regret of ``trace`` against an oracle.

    ``oracle`` is ``"greedy"``, ``"exhaustive"``, ``"auto"`` or a precomputed
    ``OracleCurve``. With the exhaustive oracle the per-round values compare
    against the horizon-T optimal schedule and only the final entry is the
    regret in the strict sense (``prefix_exact`` is False).
    """
    curve = oracle if isinstance(oracle, OracleCurve) else oracle_curve(env, oracle, len(trace))
    if len(curve.means) < len(trace):
        raise ValueError("oracle curve shorter than the trace")
    inst = curve.means[: len(trace)] - trace.means
    cum = np.cumsum(inst)
    if curve.kind == "exhaustive":
        cum[-1] = curve.value - total_reward(trace)
    return RegretReport(inst, cum, curve.kind, prefix_exact=curve.kind == "greedy")


# ---------------------------------------------------------------------------
# Favorable event and the deviation lemma
# ---------------------------------------------------------------------------


@dataclass
class EventReport:
    event: np.ndarray  # per round, True when every estimate is within its radius
    violations: int
    violation_rounds: list = field(default_factory=list)

    @property
    def event_rounds(self) -> int:
        return int(self.event.sum())


_DEFAULT_SLACK = {"raw": 2.0, "fewa": 4.0}


def favorable_event_check(trace: Trace, env: Environment, alpha: float, sigma: float,
                          mode: str = "exact", policy: str = "raw", m=2.0,
                          slack: Optional[float] = None, tol: float = 1e-9) -> EventReport:
    """Replay a white-box trace and test concentration and the deviation lemma per round.

    The event at round ``t`` holds when every window estimate of every arm is
    within ``c(h, delta_t)`` of the average true mean of the same pulls
    (every window in ``exact`` mode, the defined grid windows in ``eff``
    mode). On event rounds after initialization the pulled arm must satisfy
    ``bar_mu^h >= max_j mu_j(t, N_j) - slack * c(h, delta_t)`` for each of its
    windows; failures are counted as violations. ``slack`` defaults to 2 for
    ``raw`` and 4 for ``fewa`` in exact mode, and to ``C_pi / sqrt(2 alpha)``
    for the grid constants in ``eff`` mode.
    """
    if mode not in ("exact", "eff"):
        raise ValueError("mode must be 'exact' or 'eff'")
    if slack is None:
        if mode == "exact":
            slack = _DEFAULT_SLACK[policy]
        else:
            slack = policy_constant("eff_" + policy, alpha) / math.sqrt(2 * alpha)
    K, T = env.n_arms, len(trace)
    surface = env.surface
    noise = trace.values - trace.means
    if mode == "exact":
        mean_bank = StatsBank(K, max(T, 1))
        noise_prefix = np.zeros((K, T + 1))
    else:
        mean_bank = EffBank(K, m, env.T)
        noise_bank = EffBank(K, m, env.T)
    dev = np.zeros(K)  # per arm: max normalized deviation at the current pull count
    counts = np.zeros(K, dtype=np.int64)
    event = np.zeros(T, dtype=bool)
    bad = []
    for t in range(1, T + 1):
        r = log_radius(t, alpha, sigma)
        ok = bool(np.all(dev <= r * (1 + 1e-12) + tol))
        event[t - 1] = ok
        a = int(trace.arms[t - 1])
        n = int(counts[a])
        if ok and t > K and n > 0:
            best = float(np.max(surface.means(t, counts)))
            if mode == "exact":
                lower, _ = kn.raw_index(mean_bank.hi[a], mean_bank.lo[a], n, slack * r)
            else:
                lower, _ = kn.eff_index(mean_bank.H[a], mean_bank.mu[a], int(mean_bank.levels[a]), slack * r)
            if lower < best - tol:
                bad.append(t)
        # fold the pull in
        counts[a] += 1
        n += 1
        mean_bank.push(a, float(trace.means[t - 1]))
        if mode == "exact":
            noise_prefix[a, n] = noise_prefix[a, n - 1] + noise[t - 1]
            dev[a] = kn.max_normalized_deviation(noise_prefix[a], n)
        else:
            noise_bank.push(a, float(noise[t - 1]))
            L = int(noise_bank.levels[a])
            mu, H = noise_bank.mu[a, :L], noise_bank.H[a, :L]
            ok_lv = ~np.isnan(mu)
            dev[a] = float(np.max(np.abs(mu[ok_lv]) * np.sqrt(H[ok_lv]))) if ok_lv.any() else 0.0
    return EventReport(event, len(bad), bad)


def event_failure_frequency(t: int = 100, alpha: float = 4.0, K: int = 2, sigma: float = 1.0,
                            replications: int = 100_000, seed: int = 0, chunk: int = 5000) -> float:
    """Monte Carlo frequency of a concentration failure at round ``t``.

    Noise-only: each replication draws ``t - 1`` Gaussian samples per arm and
    fails when ANY contiguous block (every pull count a policy could have
    reached and every window of it) leaves its radius. This union is a
    superset of the policy-dependent event, so the estimate is conservative.
    """
    radius = log_radius(t, alpha, 1.0)
    rng = make_rng(seed, "event-frequency")
    fails, done = 0, 0
    while done < replications:
        n = min(chunk, replications - done)
        z = rng.standard_normal((n, K, t - 1))
        fails += int(kn.count_block_failures(z, radius))
        done += n
    return fails / replications


# ---------------------------------------------------------------------------
# Bound calculators
# ---------------------------------------------------------------------------


def _need(params, *keys):
    missing = [k for k in keys if k not in params]
    if missing:
        raise InputError(f"missing parameter(s): {', '.join(missing)}")
    return [params[k] for k in keys]


def _constant(params, default_kind="raw"):
    if "C" in params:
        return float(params["C"])
    return policy_constant(params.get("policy", default_kind), float(params.get("alpha", 4.0)))


def _bound_restless_budget(p):
    sigma, V, K, T = _need(p, "sigma", "V", "K", "T")
    C = _constant(p)
    return 4.0 * (C * C * sigma * sigma * V * K * T * T * math.log(T)) ** (1 / 3)


def _bound_restless_piecewise(p):
    sigma, K, T, U = _need(p, "sigma", "K", "T", "upsilon")
    V = p.get("V", 0.0)
    C = _constant(p)
    return C * sigma * math.sqrt(math.log(T)) * (math.sqrt(U * K * T) + U * K) + 6 * K * V


def _bound_restless_gap(p):
    sigma, T, gaps = _need(p, "sigma", "T", "gaps")
    C = _constant(p)
    return sum(C * C * sigma * sigma * math.log(T) / g for row in gaps for g in row if g > 0)


def _bound_rested_minimax(p):
    sigma, K, T, L = _need(p, "sigma", "K", "T", "L")
    C = _constant(p)
    return C * sigma * math.sqrt(math.log(T)) * (math.sqrt(K * T) + K) + 6 * K * L


def _bound_rested_gap(p):
    sigma, T, L, gaps = _need(p, "sigma", "T", "L", "pseudo_gaps")
    C = _constant(p)
    lt = math.log(T)
    return sum((C * C * sigma * sigma * lt / g if g > 0 else 0.0) + C * sigma * math.sqrt(lt) + 6 * L
               for g in gaps)


def _bound_lower_budget(p):
    sigma, V, K, T = _need(p, "sigma", "V", "K", "T")
    return (sigma * sigma * V * K * T * T) ** (1 / 3) / (16 * math.sqrt(2))


def _bound_lower_piecewise(p):
    sigma, K, T, U = _need(p, "sigma", "K", "T", "upsilon")
    return sigma / 32 * math.sqrt(U * K * T)


BOUNDS = {
    "restless_budget": _bound_restless_budget,        # minimax upper bound under a variation budget (leading term)
    "restless_piecewise": _bound_restless_piecewise,  # minimax upper bound with Upsilon batches
    "restless_gap": _bound_restless_gap,              # gap-dependent piecewise upper bound (leading term)
    "rested_minimax": _bound_rested_minimax,
    "rested_gap": _bound_rested_gap,                  # pseudo-gaps supplied by the caller
    "lower_budget": _bound_lower_budget,
    "lower_piecewise": _bound_lower_piecewise,
}


def theoretical_bound(setting: str, params: dict) -> float:
    """Evaluate a regret bound formula.

    Common parameters: ``sigma``, ``K``, ``T``, and ``policy`` (``raw``,
    ``fewa``, ``eff_raw``, ``eff_fewa``) with ``alpha`` to select ``C_pi``, or
    ``C`` to override it. Settings and their extra parameters:

    - ``restless_budget``: ``V``
    - ``restless_piecewise``: ``upsilon``, optional ``V`` (additive ``6KV``)
    - ``restless_gap``: ``gaps[k][i]`` per batch and arm (zero gaps skipped)
    - ``rested_minimax``: ``L``
    - ``rested_gap``: ``L``, ``pseudo_gaps[i]``
    - ``lower_budget``: ``V``
    - ``lower_piecewise``: ``upsilon``
    """
    if setting not in BOUNDS:
        raise InputError(f"unknown setting {setting!r}; choose from {sorted(BOUNDS)}")
    if "T" in params and params["T"] < 1:
        raise InputError("T must be >= 1")
    return float(BOUNDS[setting](params))
