"""Shared domain types: mean surfaces, noise models, seeded RNG and the policy contract."""

from __future__ import annotations

import math
import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

TOL = 1e-12


class SettingError(ValueError):
    """Operation not defined for the surface kind (e.g. greedy oracle on a mixed surface)."""


class HorizonError(ValueError):
    """Round index beyond the environment horizon."""


class SurfaceKind(Enum):
    RESTED = "rested"
    RESTLESS = "restless"
    GENERAL = "general"


# ---------------------------------------------------------------------------
# Arm mean evaluators. Each maps (t >= 1, n >= 0) to a mean.
# ---------------------------------------------------------------------------


class ArmMean(ABC):
    """Mean function of one arm. ``depends_on`` is a subset of {"t", "n"}."""

    depends_on: frozenset = frozenset({"t", "n"})

    @abstractmethod
    def __call__(self, t: int, n: int) -> float: ...


class Constant(ArmMean):
    depends_on = frozenset()

    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, t, n):
        return self.value

    def __repr__(self):
        return f"Constant({self.value!r})"


class RestedTable(ArmMean):
    """Mean indexed by prior pull count; held at the last entry past the table end."""

    depends_on = frozenset({"n"})

    def __init__(self, values: Sequence[float]):
        self.values = np.asarray(values, dtype=float)
        if self.values.size == 0:
            raise ValueError("empty rested table")
        self._last = len(self.values) - 1
        self._list = self.values.tolist()

    def __call__(self, t, n):
        return self._list[n] if n < self._last else self._list[self._last]


class RestedStep(ArmMean):
    """``high`` for the first ``length`` pulls, ``low`` afterwards."""

    depends_on = frozenset({"n"})

    def __init__(self, high: float, low: float, length: int):
        self.high, self.low, self.length = float(high), float(low), int(length)

    def __call__(self, t, n):
        return self.high if n < self.length else self.low


class RestlessTable(ArmMean):
    """Mean indexed by round (``values[t - 1]``); held at the last entry past the end."""

    depends_on = frozenset({"t"})

    def __init__(self, values: Sequence[float]):
        self.values = np.asarray(values, dtype=float)
        if self.values.size == 0:
            raise ValueError("empty restless table")
        self._len = len(self.values)
        self._list = self.values.tolist()

    def __call__(self, t, n):
        return self._list[t - 1] if t <= self._len else self._list[-1]


class RestlessStep(ArmMean):
    """``high`` for rounds ``t <= length``, ``low`` afterwards."""

    depends_on = frozenset({"t"})

    def __init__(self, high: float, low: float, length: int):
        self.high, self.low, self.length = float(high), float(low), int(length)

    def __call__(self, t, n):
        return self.high if t <= self.length else self.low


class FunctionArm(ArmMean):
    """Wraps an arbitrary ``fn(t, n)``; the caller declares what it depends on."""

    def __init__(self, fn: Callable[[int, int], float], depends_on=("t", "n")):
        self.fn = fn
        self.depends_on = frozenset(depends_on)

    def __call__(self, t, n):
        return float(self.fn(t, n))


@dataclass(frozen=True)
class MeanSurface:
    """Reward means ``mu_i(t, n)`` for every arm, with a declared setting.

    ``kind`` is inferred from the arms when omitted: all arms free of ``t`` gives
    RESTED, all free of ``n`` gives RESTLESS (constants count as restless),
    anything else is GENERAL.
    """

    arms: tuple
    horizon: int
    kind: SurfaceKind = None  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        if self.kind is None:
            object.__setattr__(self, "kind", infer_kind(self.arms))
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    def mean(self, arm: int, t: int, n: int) -> float:
        return self.arms[arm](t, n)

    def means(self, t: int, counts) -> np.ndarray:
        return np.array([f(t, int(c)) for f, c in zip(self.arms, counts)])


def infer_kind(arms) -> SurfaceKind:
    deps = set().union(*(a.depends_on for a in arms)) if arms else set()
    if "n" not in deps:
        return SurfaceKind.RESTLESS
    if "t" not in deps:
        return SurfaceKind.RESTED
    return SurfaceKind.GENERAL


def validate_mean_surface(surface: MeanSurface, T: int, grid_pulls: int) -> list:
    """Probe the non-increasing assumption on ``t < T`` and ``n < grid_pulls``.

    Returns a list of ``(arm, t, n, delta)`` where ``delta > 0`` is the size of
    the increase. Arms that ignore an argument are only probed along the other
    one (at ``t = 1`` or ``n = 0``), so each violation is reported once.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    out = []
    for i, f in enumerate(surface.arms):
        ts = list(range(1, T + 1)) if "t" in f.depends_on else [1]
        ns = list(range(0, grid_pulls + 1)) if "n" in f.depends_on else [0]
        grid = np.array([[f(t, n) for n in ns] for t in ts], dtype=float)
        for a, b in np.argwhere(np.diff(grid, axis=0) > TOL):
            out.append((i, ts[a], ns[b], float(grid[a + 1, b] - grid[a, b])))
        for a, b in np.argwhere(np.diff(grid, axis=1) > TOL):
            out.append((i, ts[a], ns[b], float(grid[a, b + 1] - grid[a, b])))
    return out


# ---------------------------------------------------------------------------
# Randomness
# ---------------------------------------------------------------------------


def _key(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    return int(k) & 0xFFFFFFFFFFFFFFFF


def make_rng(seed: int, *keys) -> np.random.Generator:
    """Deterministic PCG64 stream for ``seed`` and an optional key path.

    The entropy ``(seed, *keys)`` is mixed by numpy's ``SeedSequence`` hash into
    the PCG64 state; strings in the key path are reduced with CRC-32. Numpy
    guarantees PCG64/SeedSequence streams are identical across platforms, so
    ``make_rng(s, "noise", r, arm)`` gives the same draws everywhere. Distinct
    key paths give statistically independent sub-streams.
    """
    entropy = [_key(seed)] + [_key(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Observation:
    round: int
    arm: int
    value: float


@dataclass(frozen=True)
class Gaussian:
    sigma: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    def stream(self, rng: np.random.Generator, block: int = 4096) -> "NoiseStream":
        return _GaussianStream(self.sigma, rng, block)


@dataclass(frozen=True)
class BernoulliBatch:
    """One observation is the mean of ``samples_per_round`` Bernoulli draws.

    Means live in ``[offset, offset + 1]``; the success probability is
    ``mean - offset`` and the batch mean is shifted back by ``offset``.
    """

    samples_per_round: int = 10
    offset: float = 0.0

    def __post_init__(self):
        if self.samples_per_round < 1:
            raise ValueError("samples_per_round must be >= 1")

    def stream(self, rng: np.random.Generator, block: int = 1024) -> "NoiseStream":
        return _BernoulliStream(self.samples_per_round, self.offset, rng, block)


class NoiseStream(ABC):
    """Per-arm noise source consumed once per pull of that arm."""

    @abstractmethod
    def observe(self, mean: float) -> float: ...


class _GaussianStream(NoiseStream):
    def __init__(self, sigma, rng, block):
        self.sigma, self.rng, self.block = sigma, rng, block
        self._buf: list = []
        self._pos = 0

    def observe(self, mean):
        if self.sigma == 0.0:
            return mean
        if self._pos >= len(self._buf):
            self._buf = self.rng.standard_normal(self.block).tolist()
            self._pos = 0
        z = self._buf[self._pos]
        self._pos += 1
        return mean + self.sigma * z


class _BernoulliStream(NoiseStream):
    def __init__(self, s, offset, rng, block):
        self.s, self.offset, self.rng, self.block = s, offset, rng, block
        self._buf = np.empty((0, s))
        self._pos = 0

    def observe(self, mean):
        p = mean - self.offset
        if not (-TOL <= p <= 1 + TOL):
            raise ValueError(f"mean {mean} outside the Bernoulli range")
        if self._pos >= len(self._buf):
            self._buf = self.rng.random((self.block, self.s))
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return self.offset + float(np.count_nonzero(u < p)) / self.s


# ---------------------------------------------------------------------------
# Policy contract
# ---------------------------------------------------------------------------


class Policy(ABC):
    """Stateful decision rule. ``choose(t)`` then ``observe(arm, value)`` once per round."""

    name = "policy"

    def __init__(self, n_arms: int):
        if n_arms < 1:
            raise ValueError("n_arms must be >= 1")
        self.n_arms = n_arms
        self.counts = np.zeros(n_arms, dtype=np.int64)

    @abstractmethod
    def choose(self, t: int) -> int: ...

    def observe(self, arm: int, value: float) -> None:
        self.counts[arm] += 1
        self._update(arm, value)

    def _update(self, arm: int, value: float) -> None:
        pass


def log_radius(t: int, alpha: float, sigma: float) -> float:
    """``sqrt(2 sigma^2 log(2/delta_t))`` with ``delta_t = 2 t^-alpha``, i.e. ``c(1, delta_t)``."""
    return sigma * math.sqrt(2.0 * alpha * math.log(t)) if t > 1 else 0.0
