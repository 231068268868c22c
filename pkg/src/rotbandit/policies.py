"""Decision policies: RAW-UCB, FEWA, their grid variants, UCB1, Exp3.S, greedy oracle and round robin."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from . import _kernels as kn
from .core import MeanSurface, Policy, SettingError, log_radius, make_rng
from .windowstats import ArmStats, EffBank, StatsBank

SQRT2 = math.sqrt(2.0)


def delta_t(t: int, alpha: float) -> float:
    if t < 1:
        raise ValueError("t must be >= 1")
    return 2.0 * t ** (-alpha)


def confidence_radius(h: int, delta: float, sigma: float) -> float:
    """``sqrt(2 sigma^2 ln(2/delta) / h)``."""
    if h < 1:
        raise ValueError("h must be >= 1")
    if not 0 < delta <= 2:
        raise ValueError("delta must lie in (0, 2]")
    return math.sqrt(2.0 * sigma * sigma * math.log(2.0 / delta) / h)


_CONSTANTS = {
    "raw": lambda a: 2 * math.sqrt(2 * a),
    "fewa": lambda a: 4 * math.sqrt(2 * a),
    "eff_raw": lambda a: 4 * math.sqrt(a) / (SQRT2 - 1),
    "eff_fewa": lambda a: 8 * math.sqrt(a) / (SQRT2 - 1),
}
_CONSTANT_ALIASES = {
    "raw_ucb": "raw", "eff_raw_ucb": "eff_raw", "eff-raw": "eff_raw", "eff-fewa": "eff_fewa",
}


def policy_constant(kind: str, alpha: float) -> float:
    """Regret constant ``C_pi`` for ``raw``, ``fewa``, ``eff_raw`` or ``eff_fewa``."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    key = kind.lower()
    key = _CONSTANT_ALIASES.get(key, key)
    if key not in _CONSTANTS:
        raise ValueError(f"unknown policy kind {kind!r}")
    return _CONSTANTS[key](alpha)


def raw_ucb_index(stats: ArmStats, t: int, alpha: float, sigma: float) -> tuple:
    """(index, argmin window) of one arm at round ``t``."""
    n = stats.pull_count
    if n < 1:
        raise ValueError("index needs at least one sample")
    hi, lo = stats.prefix
    v, h = kn.raw_index(hi, lo, n, log_radius(t, alpha, sigma))
    return float(v), int(h)


_ISQ = np.zeros(1)


def _inv_sqrt(n: int) -> np.ndarray:
    """Shared table of ``1/sqrt(h)`` for ``h < n`` (entry 0 unused)."""
    global _ISQ
    if len(_ISQ) < n:
        _ISQ = np.concatenate(([0.0], 1.0 / np.sqrt(np.arange(1, 2 * n))))
    return _ISQ


def _check(alpha, sigma):
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")


class _Forced(Policy):
    """Pulls arm ``t - 1`` for the first K rounds, then defers to ``_select``."""

    def __init__(self, n_arms, alpha=4.0, sigma=1.0):
        super().__init__(n_arms)
        _check(alpha, sigma)
        self.alpha, self.sigma = float(alpha), float(sigma)

    def choose(self, t):
        if t <= self.n_arms:
            return t - 1
        return self._select(t, log_radius(t, self.alpha, self.sigma))

    def _select(self, t, radius) -> int:
        raise NotImplementedError


class RawUCB(_Forced):
    name = "raw_ucb"

    def __init__(self, n_arms, alpha=4.0, sigma=1.0):
        super().__init__(n_arms, alpha, sigma)
        self.stats = StatsBank(n_arms)

    def _update(self, arm, value):
        self.stats.push(arm, value)

    def index(self, arm, t):
        s = self.stats
        return kn.raw_index(s.hi[arm], s.lo[arm], int(s.counts[arm]), log_radius(t, self.alpha, self.sigma))

    def _select(self, t, radius):
        s = self.stats
        return int(kn.raw_select(s.hi, s.lo, s.counts, radius, _inv_sqrt(s.hi.shape[1])))


class UCB1(RawUCB):
    """RAW-UCB with the window pinned to the full history."""

    name = "ucb1"

    def _select(self, t, radius):
        s = self.stats
        best, pick = -np.inf, 0
        for i in range(self.n_arms):
            n = int(s.counts[i])
            v = kn.window_sum(s.hi[i], s.lo[i], n, n) / n + radius / math.sqrt(n)
            if v > best:
                best, pick = v, i
        return pick


class FEWA(RawUCB):
    """Filtering on expanding windows.

    At window ``h`` the surviving arms whose trailing mean is within
    ``2 c(h, delta_t)`` of the best trailing mean are kept; if a survivor has
    exactly ``h`` samples the smallest such arm is pulled, otherwise ``h``
    grows by one.
    """

    name = "fewa"

    def _select(self, t, radius):
        s = self.stats
        return int(kn.fewa_select(s.hi, s.lo, s.counts, radius))


class EffRawUCB(_Forced):
    """RAW-UCB whose inner minimum ranges over the defined grid windows only."""

    name = "eff_raw_ucb"

    def __init__(self, n_arms, alpha=4.0, sigma=1.0, m=2.0, horizon: Optional[int] = None):
        super().__init__(n_arms, alpha, sigma)
        self.bank = EffBank(n_arms, m, horizon)

    def _update(self, arm, value):
        self.bank.push(arm, value)

    def _select(self, t, radius):
        b = self.bank
        best, pick = -np.inf, 0
        for i in range(self.n_arms):
            v, _ = kn.eff_index(b.H[i], b.mu[i], int(b.levels[i]), radius)
            if v > best:
                best, pick = v, i
        return pick


class EffFEWA(EffRawUCB):
    name = "eff_fewa"

    def _select(self, t, radius):
        b = self.bank
        return int(kn.eff_fewa_select(b.H, b.mu, b.levels, radius))


# ---------------------------------------------------------------------------
# Exp3.S
# ---------------------------------------------------------------------------


def exp3s_tuning(K: int, T: int, switches: float) -> tuple:
    """Theoretical (gamma, alpha) for Exp3.S against ``switches`` arm changes.

    ``alpha = 1/T`` and ``gamma = min(1, sqrt(K (S ln(KT) + e) / ((e - 1) T)))``.
    """
    S = max(float(switches), 0.0)
    gamma = min(1.0, math.sqrt(K * (S * math.log(K * T) + math.e) / ((math.e - 1) * T)))
    return gamma, 1.0 / T


def exp3s_switches_from_budget(K: int, T: int, V: float) -> int:
    """Switch count for a variation budget: one switch per batch of length
    ``ceil((K ln K)^{1/3} (T/V)^{2/3})``."""
    if V <= 0:
        return 0
    batch = math.ceil((K * math.log(max(K, 2))) ** (1 / 3) * (T / V) ** (2 / 3))
    return max(math.ceil(T / max(batch, 1)) - 1, 0)


class Exp3S(Policy):
    """Exp3.S with fixed-share weight mixing.

    Rewards are mapped from ``reward_range`` onto [0, 1]; values that fall
    outside raise unless ``clip`` is set (Gaussian noise can leave any range).
    """

    name = "exp3s"

    def __init__(self, n_arms, gamma: float, alpha_exp: float, reward_range=(0.0, 1.0),
                 rng: Optional[np.random.Generator] = None, clip: bool = False):
        super().__init__(n_arms)
        if not 0 <= gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if alpha_exp < 0:
            raise ValueError("alpha_exp must be >= 0")
        lo, hi = reward_range
        if not hi > lo:
            raise ValueError("empty reward range")
        self.gamma, self.alpha_exp = float(gamma), float(alpha_exp)
        self.lo, self.hi = float(lo), float(hi)
        self.clip = clip
        self.rng = rng if rng is not None else make_rng(0, "exp3s")
        self.weights = np.ones(n_arms)
        self.probs = np.full(n_arms, 1.0 / n_arms)

    def _probs(self):
        w = self.weights
        return (1 - self.gamma) * w / w.sum() + self.gamma / self.n_arms

    def choose(self, t):
        self.probs = self._probs()
        u = self.rng.random()
        arm = int(np.searchsorted(np.cumsum(self.probs), u, side="right"))
        return min(arm, self.n_arms - 1)

    def rescale(self, value: float) -> float:
        x = (value - self.lo) / (self.hi - self.lo)
        if not 0.0 <= x <= 1.0:
            if not self.clip:
                raise ValueError(f"reward {value} outside [{self.lo}, {self.hi}]")
            x = min(max(x, 0.0), 1.0)
        return x

    def _update(self, arm, value):
        self.step(arm, self.rescale(value))

    def step(self, arm: int, x: float) -> None:
        """Weight update with a reward already in [0, 1]."""
        if not 0.0 <= x <= 1.0:
            raise ValueError("reward must be in [0, 1]")
        K = self.n_arms
        xhat = np.zeros(K)
        xhat[arm] = x / self.probs[arm]
        W = self.weights.sum()
        self.weights = self.weights * np.exp(self.gamma * xhat / K) + math.e * self.alpha_exp / K * W
        self.weights /= self.weights.sum()


# ---------------------------------------------------------------------------
# Clairvoyant and trivial policies
# ---------------------------------------------------------------------------


def greedy_oracle_choose(surface: MeanSurface, pulls, t: int) -> int:
    """Arm with the largest current true mean; smallest index on ties."""
    return int(np.argmax(surface.means(t, pulls)))


class GreedyOracle(Policy):
    name = "greedy_oracle"

    def __init__(self, surface: MeanSurface):
        super().__init__(surface.n_arms)
        self.surface = surface

    def choose(self, t):
        return greedy_oracle_choose(self.surface, self.counts, t)


class RoundRobin(Policy):
    name = "round_robin"

    def choose(self, t):
        return (t - 1) % self.n_arms


POLICY_IDS = ("raw_ucb", "eff_raw_ucb", "fewa", "eff_fewa", "ucb1", "exp3s", "greedy_oracle", "round_robin")


def make_policy(pid: str, env, params: Optional[dict] = None, rng=None) -> Policy:
    """Build a policy from its config id and parameters for environment ``env``.

    Exp3.S accepts ``gamma``/``alpha_exp`` directly, or tunes them from
    ``switches`` (Upsilon - 1) or ``V`` (``"auto"`` reads the environment's
    variation budget).
    """
    p = dict(params or {})
    K = env.n_arms
    if pid in ("raw_ucb", "fewa", "ucb1"):
        cls = {"raw_ucb": RawUCB, "fewa": FEWA, "ucb1": UCB1}[pid]
        return cls(K, alpha=p.get("alpha", 4.0), sigma=p.get("sigma", env.sigma))
    if pid in ("eff_raw_ucb", "eff_fewa"):
        cls = EffRawUCB if pid == "eff_raw_ucb" else EffFEWA
        return cls(K, alpha=p.get("alpha", 4.0), sigma=p.get("sigma", env.sigma),
                   m=p.get("m", 2.0), horizon=env.T)
    if pid == "exp3s":
        T = env.T
        if "gamma" in p:
            gamma, alpha_exp = float(p["gamma"]), float(p.get("alpha_exp", 1.0 / T))
        else:
            if "switches" in p:
                S = p["switches"]
            elif "upsilon" in p:
                S = int(p["upsilon"]) - 1
            else:
                V = p.get("V", "auto")
                if V == "auto":
                    from .environments import variation_budget
                    try:
                        V = variation_budget(env, T)
                    except SettingError:
                        V = 0.0
                S = exp3s_switches_from_budget(K, T, float(V))
            gamma, alpha_exp = exp3s_tuning(K, T, S)
        return Exp3S(K, gamma, alpha_exp, reward_range=p.get("range", env.declared_range),
                     rng=rng, clip=p.get("clip", env.noise_unbounded))
    if pid == "greedy_oracle":
        return GreedyOracle(env.surface)
    if pid == "round_robin":
        return RoundRobin(K)
    raise ValueError(f"unknown policy id {pid!r}")
