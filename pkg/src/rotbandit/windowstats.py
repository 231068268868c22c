"""Trailing-window statistics: exact full-history prefix sums and the geometric-grid EFF_UPDATE structure."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import _kernels as kn

DENSE = "dense"


# ---------------------------------------------------------------------------
# Exact statistics
# ---------------------------------------------------------------------------


class StatsBank:
    """Full observation history for ``K`` arms as compensated prefix sums.

    Row ``i`` of ``hi``/``lo`` holds the Kahan running sum and its
    compensation after each sample, so any trailing window mean costs O(1).
    """

    def __init__(self, n_arms: int, capacity: int = 1024):
        self.n_arms = n_arms
        self.counts = np.zeros(n_arms, dtype=np.int64)
        self.hi = np.zeros((n_arms, capacity + 1))
        self.lo = np.zeros((n_arms, capacity + 1))
        self._s = [0.0] * n_arms
        self._c = [0.0] * n_arms

    def _grow(self):
        cap = 2 * (self.hi.shape[1] - 1)
        for name in ("hi", "lo"):
            old = getattr(self, name)
            new = np.zeros((self.n_arms, cap + 1))
            new[:, : old.shape[1]] = old
            setattr(self, name, new)

    def push(self, arm: int, value: float) -> None:
        n = int(self.counts[arm]) + 1
        if n >= self.hi.shape[1]:
            self._grow()
        s, c = self._s[arm], self._c[arm]
        y = value - c
        t = s + y
        c = (t - s) - y
        self._s[arm], self._c[arm] = t, c
        self.hi[arm, n] = t
        self.lo[arm, n] = c
        self.counts[arm] = n

    def window_mean(self, arm: int, h: int) -> float:
        n = int(self.counts[arm])
        if not 1 <= h <= n:
            raise IndexError(f"window {h} outside 1..{n}")
        return float(kn.window_sum(self.hi[arm], self.lo[arm], n, h)) / h

    def window_means(self, arm: int) -> np.ndarray:
        """Means of every trailing window ``h = 1..N`` (index ``h - 1``)."""
        n = int(self.counts[arm])
        tot = self.hi[arm, : n + 1] - self.lo[arm, : n + 1]
        return (tot[n] - tot[n - 1 :: -1][:n]) / np.arange(1, n + 1)


class ArmStats:
    """Exact trailing-window statistics for one arm."""

    def __init__(self, capacity: int = 64):
        self._bank = StatsBank(1, capacity)

    @property
    def pull_count(self) -> int:
        return int(self._bank.counts[0])

    def __len__(self):
        return self.pull_count

    def push(self, value: float) -> "ArmStats":
        self._bank.push(0, float(value))
        return self

    def window_mean(self, h: int) -> float:
        return self._bank.window_mean(0, h)

    def window_means(self) -> np.ndarray:
        return self._bank.window_means(0)

    @property
    def prefix(self):
        """(hi, lo) prefix buffers, valid up to ``pull_count``."""
        return self._bank.hi[0], self._bank.lo[0]


def push(stats: ArmStats, value: float) -> ArmStats:
    return stats.push(value)


def window_mean(stats: ArmStats, h: int) -> float:
    return stats.window_mean(h)


# ---------------------------------------------------------------------------
# Geometric grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridRatio:
    """Grid ratio ``m`` as an exact rational, or the dense sentinel.

    Storing ``num/den`` keeps ``ceil(m * h)`` exact: with floats,
    ``ceil(1.1 * 10)`` is 12.
    """

    dense: bool
    num: int = 1
    den: int = 1

    @classmethod
    def parse(cls, m, horizon: Optional[int] = None) -> "GridRatio":
        if isinstance(m, GridRatio):
            return m
        if m is None or (isinstance(m, str) and m.lower() == DENSE):
            return cls(True)
        frac = Fraction(m) if isinstance(m, (int, Fraction)) else Fraction(repr(float(m)))
        if frac <= 1 or (horizon is not None and frac <= 1 + Fraction(1, horizon)):
            return cls(True)
        if frac.denominator > 10**9:
            frac = frac.limit_denominator(10**9)
        return cls(False, frac.numerator, frac.denominator)

    def next_window(self, h: int) -> int:
        if self.dense:
            return h + 1
        return -(-self.num * h // self.den)

    @property
    def value(self) -> float:
        return math.inf if self.dense else self.num / self.den


def grid(m, N: int) -> list:
    """Windows present after ``N`` pulls, including the pending largest one.

    Starts from ``{1}`` and adds ``ceil(m * n)`` whenever the pull count ``n``
    reaches the current largest window.
    """
    ratio = GridRatio.parse(m)
    hs = [1]
    for n in range(1, N + 1):
        if n == hs[-1]:
            hs.append(ratio.next_window(n))
    return hs


# ---------------------------------------------------------------------------
# EFF_UPDATE structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EffTriplet:
    h: int
    mu_eff: Optional[float]
    p: float
    n: int


class EffBank:
    """Grid statistics for ``K`` arms in (K, capacity) buffers."""

    def __init__(self, n_arms: int, m, horizon: Optional[int] = None, capacity: int = 32):
        self.ratio = GridRatio.parse(m, horizon)
        self.n_arms = n_arms
        self.counts = np.zeros(n_arms, dtype=np.int64)
        self.levels = np.ones(n_arms, dtype=np.int64)
        self.H = np.ones((n_arms, capacity), dtype=np.int64)
        self.mu = np.full((n_arms, capacity), np.nan)
        self.p = np.zeros((n_arms, capacity))
        self.n = np.zeros((n_arms, capacity), dtype=np.int64)

    def _grow(self):
        cap = 2 * self.H.shape[1]
        for name, fill in (("H", 1), ("mu", np.nan), ("p", 0.0), ("n", 0)):
            old = getattr(self, name)
            new = np.full((self.n_arms, cap), fill, dtype=old.dtype)
            new[:, : old.shape[1]] = old
            setattr(self, name, new)

    def push(self, arm: int, value: float) -> None:
        if self.levels[arm] + 1 > self.H.shape[1]:
            self._grow()
        self.counts[arm] += 1
        r = self.ratio
        self.levels[arm] = kn.eff_update(
            self.H[arm], self.mu[arm], self.p[arm], self.n[arm], int(self.levels[arm]),
            int(self.counts[arm]), float(value), r.num, r.den, r.dense,
        )

    def triplets(self, arm: int) -> list:
        out = []
        for j in range(int(self.levels[arm])):
            mu = float(self.mu[arm, j])
            out.append(EffTriplet(int(self.H[arm, j]), None if math.isnan(mu) else mu,
                                  float(self.p[arm, j]), int(self.n[arm, j])))
        return out


class EffArmStats:
    """EFF_UPDATE statistics for one arm.

    ``m`` is the grid ratio; ``"dense"`` (or any ``m <= 1``, or
    ``m <= 1 + 1/horizon`` when a horizon is given) selects the exact dense
    grid ``h_{j+1} = h_j + 1``.
    """

    def __init__(self, m=2, horizon: Optional[int] = None):
        self._bank = EffBank(1, m, horizon)

    @property
    def ratio(self) -> GridRatio:
        return self._bank.ratio

    @property
    def pull_count(self) -> int:
        return int(self._bank.counts[0])

    def push(self, value: float) -> "EffArmStats":
        self._bank.push(0, value)
        return self

    @property
    def triplets(self) -> list:
        return self._bank.triplets(0)

    def windows(self, defined_only: bool = True) -> list:
        return [(t.h, t.mu_eff) for t in self.triplets if t.mu_eff is not None or not defined_only]

    def mu(self, h: int) -> Optional[float]:
        for t in self.triplets:
            if t.h == h:
                return t.mu_eff
        raise KeyError(h)


def eff_update(eff: EffArmStats, value: float) -> EffArmStats:
    """Fold one observation in; the pull count is incremented first."""
    return eff.push(value)


def eff_windows(eff: EffArmStats, defined_only: bool = True) -> list:
    return eff.windows(defined_only)


EFF_PROPERTIES = ("block", "cadence", "pending_sum", "pending_bound", "monotone_counts", "space")


def eff_property_violations(values, m=2, check_cadence: Optional[bool] = None) -> dict:
    """Replay a sample stream and count violations of the structural guarantees.

    ``block``: each defined statistic averages exactly ``h`` consecutive
    samples among the last ``2h - 1``. ``cadence`` (m = 2 only): window
    ``2^j`` is refreshed exactly at pulls that are multiples of ``2^(j-1)``.
    ``pending_sum``: ``p`` is the sum of the last ``n`` samples.
    ``pending_bound``: ``n < h`` (``n <= 1`` for ``h = 1``).
    ``monotone_counts``: ``n`` is non-decreasing in ``h``. ``space``: at most
    ``2 + log_m(N)`` triplets.
    """
    r = GridRatio.parse(m)
    if check_cadence is None:
        check_cadence = not r.dense and r.num == 2 * r.den
    counts = kn.eff_property_check(np.asarray(values, dtype=float), r.num, r.den, r.dense, bool(check_cadence))
    return dict(zip(EFF_PROPERTIES, counts.tolist()))
