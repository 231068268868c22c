"""Environments and problem generators."""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    TOL, ArmMean, BernoulliBatch, Constant, Gaussian, HorizonError, MeanSurface, Observation,
    RestedStep, RestlessStep, RestlessTable, SettingError, SurfaceKind, make_rng,
)


class SchemaError(ValueError):
    """Structurally invalid input table."""


@dataclass(frozen=True)
class Environment:
    surface: MeanSurface
    noise: object = field(default_factory=Gaussian)
    declared_range: tuple = (0.0, 1.0)
    name: str = ""

    @property
    def n_arms(self) -> int:
        return self.surface.n_arms

    K = n_arms

    @property
    def T(self) -> int:
        return self.surface.horizon

    @property
    def kind(self) -> SurfaceKind:
        return self.surface.kind

    @property
    def sigma(self) -> float:
        """Sub-Gaussian parameter of the observation noise."""
        if isinstance(self.noise, Gaussian):
            return self.noise.sigma
        return 0.5 / math.sqrt(self.noise.samples_per_round)

    @property
    def noise_unbounded(self) -> bool:
        return isinstance(self.noise, Gaussian) and self.noise.sigma > 0

    def arm_streams(self, seed: int, replication: int) -> list:
        """Per-arm noise streams, consumed once per pull of that arm."""
        return [self.noise.stream(make_rng(seed, "noise", replication, i)) for i in range(self.n_arms)]

    def episode(self, seed: int = 0, replication: int = 0) -> "Episode":
        return Episode(self, self.arm_streams(seed, replication))


class Episode:
    """Pull-count state and noise streams for one replication."""

    def __init__(self, env: Environment, streams: list):
        self.env = env
        self.streams = streams
        self.counts = np.zeros(env.n_arms, dtype=np.int64)

    def pull(self, arm: int, t: int) -> tuple:
        """Returns ``(mean, Observation)`` and advances the arm's pull count."""
        env = self.env
        if not 1 <= t <= env.T:
            raise HorizonError(f"round {t} outside 1..{env.T}")
        if not 0 <= arm < env.n_arms:
            raise IndexError(f"arm {arm} outside 0..{env.n_arms - 1}")
        mean = env.surface.mean(arm, t, int(self.counts[arm]))
        value = self.streams[arm].observe(mean)
        self.counts[arm] += 1
        return mean, Observation(t, arm, value)


def step(env: Environment, arm: int, t: int, rng: np.random.Generator, counts) -> tuple:
    """Single draw without an episode: returns ``(Observation, new_counts)``."""
    if not 1 <= t <= env.T:
        raise HorizonError(f"round {t} outside 1..{env.T}")
    counts = np.array(counts, dtype=np.int64)
    mean = env.surface.mean(arm, t, int(counts[arm]))
    value = env.noise.stream(rng).observe(mean)
    counts[arm] += 1
    return Observation(t, arm, value), counts


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def make_rested_two_arm(L: float = 1.0, break_pull: int = 2500, T: int = 10_000,
                        sigma: float = 1.0) -> Environment:
    """Arm 0 constant 0; arm 1 worth ``+L/2`` for ``break_pull`` pulls, then ``-L/2``."""
    if L <= 0:
        raise ValueError("L must be > 0")
    if not 1 <= break_pull <= T:
        raise ValueError("break_pull must lie in 1..T")
    surface = MeanSurface((Constant(0.0), RestedStep(L / 2, -L / 2, break_pull)), T, SurfaceKind.RESTED)
    return Environment(surface, Gaussian(sigma), (-L / 2, L / 2), "rested_two_arm")


def make_prop1_pair(T: int) -> tuple:
    """The two noiseless problems on which no policy is good for both.

    In ``mu0`` arm 0 is rested (1 for its first floor(T/2) pulls, then 0) and
    arm 1 restless (1/2 up to round floor(T/2), then 0). ``mu1`` replaces arm 0
    by the constant 1 and is therefore restless.
    """
    if T < 2:
        raise ValueError("T must be >= 2")
    half = T // 2
    restless = RestlessStep(0.5, 0.0, half)
    mu0 = MeanSurface((RestedStep(1.0, 0.0, half), restless), T, SurfaceKind.GENERAL)
    mu1 = MeanSurface((Constant(1.0), restless), T, SurfaceKind.RESTLESS)
    return (Environment(mu0, Gaussian(0.0), (0.0, 1.0), "mixed_mu0"),
            Environment(mu1, Gaussian(0.0), (0.0, 1.0), "mixed_mu1"))


class PiecewiseConstant(ArmMean):
    """Restless arm: ``levels[k]`` on batch ``k``; ``ends[k]`` is the batch's last round."""

    depends_on = frozenset({"t"})

    def __init__(self, ends: Sequence[int], levels: Sequence[float]):
        if len(ends) != len(levels) - 1:
            raise ValueError("need one level more than breakpoints")
        self.ends = list(ends)
        self.levels = [float(v) for v in levels]

    def __call__(self, t, n):
        return self.levels[bisect.bisect_left(self.ends, t)]


@dataclass(frozen=True)
class PiecewiseSpec:
    """Breakpoints (last round of each batch but the final one) and per-arm batch levels."""

    breakpoints: tuple
    levels: tuple  # levels[arm][batch]

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(int(b) for b in self.breakpoints))
        object.__setattr__(self, "levels", tuple(tuple(float(v) for v in row) for row in self.levels))
        b = self.breakpoints
        if any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        for row in self.levels:
            if len(row) != len(b) + 1:
                raise ValueError("each arm needs len(breakpoints) + 1 levels")

    @property
    def n_batches(self) -> int:
        return len(self.breakpoints) + 1

    def violations(self) -> list:
        """(arm, batch) pairs whose level rises relative to the previous batch."""
        return [(i, k) for i, row in enumerate(self.levels)
                for k in range(1, len(row)) if row[k] > row[k - 1] + TOL]

    def to_environment(self, T: int, noise=None, declared_range=None, name="piecewise") -> Environment:
        if self.breakpoints and not (0 < self.breakpoints[0] and self.breakpoints[-1] < T):
            raise ValueError("breakpoints must lie in (0, T)")
        arms = tuple(PiecewiseConstant(self.breakpoints, row) for row in self.levels)
        allv = [v for row in self.levels for v in row]
        rng_ = declared_range if declared_range is not None else (min(allv), max(allv))
        surface = MeanSurface(arms, T, SurfaceKind.RESTLESS)
        return Environment(surface, noise if noise is not None else Gaussian(1.0), tuple(rng_), name)


def load_piecewise_csv(path) -> PiecewiseSpec:
    """Wide CSV: header ``end_round,arm0,arm1,...``; one row per batch.

    The final row's ``end_round`` is the horizon and is not a breakpoint.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0].strip() != "end_round":
        raise SchemaError(f"{path}: header must start with end_round")
    ends, levels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(rows[0]):
            raise SchemaError(f"{path}:{lineno}: expected {len(rows[0])} columns")
        try:
            ends.append(int(row[0]))
            levels.append([float(x) for x in row[1:]])
        except ValueError as e:
            raise SchemaError(f"{path}:{lineno}: {e}") from None
    if not ends:
        raise SchemaError(f"{path}: no batches")
    return PiecewiseSpec(tuple(ends[:-1]), tuple(zip(*levels)))


def batch_lengths(T: int, upsilon: int) -> list:
    """``ceil(T/U)`` for the first ``T mod U`` batches, ``floor(T/U)`` for the rest."""
    if not 1 <= upsilon <= T:
        raise ValueError("need 1 <= upsilon <= T")
    q, r = divmod(T, upsilon)
    return [q + 1 if k <= r else q for k in range(1, upsilon + 1)]


def lb_gap(K: int, upsilon: int, T: int, sigma: float) -> float:
    return 0.25 * math.sqrt(sigma * sigma * K * upsilon / (2.0 * T))


def set_upsilon(V: float, T: int, K: int, sigma: float) -> int:
    """Batch count tying the lower-bound family to a variation budget ``V``."""
    if sigma <= 0:
        return T
    u = math.floor(2.0 * (V * V * T / (K * sigma * sigma)) ** (1 / 3))
    return min(max(u, 1), T)


def random_i_star(K: int, upsilon: int, rng: np.random.Generator) -> list:
    """A uniformly drawn best arm (1..K) for every batch."""
    return [int(x) for x in rng.integers(1, K + 1, size=upsilon)]


def make_piecewise_lb_instance(K: int, upsilon: int, T: int, sigma: float, i_star) -> Environment:
    """Piecewise-stationary instance of the minimax lower-bound family.

    On batch ``k`` (0-based) the designated arm ``i_star[k]`` (1-based; 0 means
    none) has mean ``-k*gap`` and every other arm ``-(k+1)*gap``.
    """
    i_star = list(i_star)
    if len(i_star) != upsilon:
        raise ValueError("i_star needs one entry per batch")
    if any(not 0 <= j <= K for j in i_star):
        raise ValueError("i_star entries must lie in 0..K")
    gap = lb_gap(K, upsilon, T, sigma)
    ends = np.cumsum(batch_lengths(T, upsilon)).tolist()[:-1]
    levels = [[-(k + (0 if i_star[k] == i + 1 else 1)) * gap for k in range(upsilon)] for i in range(K)]
    spec = PiecewiseSpec(tuple(ends), tuple(map(tuple, levels)))
    return spec.to_environment(T, Gaussian(sigma), (-upsilon * gap - gap, 0.0), "piecewise_lb")


def restless_mean_table(env: Environment, T: Optional[int] = None) -> np.ndarray:
    """(K, T) matrix of restless means ``mu_i(t)`` for ``t = 1..T``."""
    T = env.T if T is None else T
    if env.kind is not SurfaceKind.RESTLESS:
        raise SettingError("restless surface required")
    out = np.empty((env.n_arms, T))
    for i, f in enumerate(env.surface.arms):
        if isinstance(f, RestlessTable):
            v = f.values
            out[i] = v[np.minimum(np.arange(T), len(v) - 1)]
        else:
            out[i] = [f(t, 0) for t in range(1, T + 1)]
    return out


def variation_budget(env: Environment, T: Optional[int] = None) -> float:
    """``sum_{t<T} max_i (mu_i(t) - mu_i(t+1))`` on a restless surface."""
    table = restless_mean_table(env, T)
    if table.shape[1] < 2:
        return 0.0
    return float(np.sum(np.max(table[:, :-1] - table[:, 1:], axis=0)))


# ---------------------------------------------------------------------------
# Dataset-driven environment
# ---------------------------------------------------------------------------


def dataset_env_from_table(table, samples_per_round: int = 10, name: str = "dataset") -> Environment:
    """Restless environment from ``(bucket, arm, mean, traffic)`` rows.

    Bucket ``b`` spans ``ceil(traffic_b / samples_per_round)`` consecutive
    rounds; arms are ordered by id and buckets by key. Monotonicity is not
    enforced.
    """
    if samples_per_round < 1:
        raise ValueError("samples_per_round must be >= 1")
    cells, traffic = {}, {}
    for row in table:
        b, a, mean, tr = row
        mean, tr = float(mean), int(tr)
        if not 0.0 <= mean <= 1.0:
            raise SchemaError(f"mean {mean} outside [0, 1] at bucket {b}, arm {a}")
        if (b, a) in cells:
            raise SchemaError(f"duplicate cell (bucket {b}, arm {a})")
        if traffic.setdefault(b, tr) != tr:
            raise SchemaError(f"inconsistent traffic for bucket {b}")
        cells[(b, a)] = mean
    if not cells:
        raise SchemaError("empty table")
    buckets = sorted(traffic)
    arms = sorted({a for _, a in cells})
    for b in buckets:
        for a in arms:
            if (b, a) not in cells:
                raise SchemaError(f"missing cell (bucket {b}, arm {a})")
    spans = [-(-traffic[b] // samples_per_round) for b in buckets]
    if sum(spans) < 1:
        raise SchemaError("table has no traffic")
    tables = [np.repeat([cells[(b, a)] for b in buckets], spans) for a in arms]
    surface = MeanSurface(tuple(RestlessTable(t) for t in tables), int(sum(spans)), SurfaceKind.RESTLESS)
    return Environment(surface, BernoulliBatch(samples_per_round), (0.0, 1.0), name)
