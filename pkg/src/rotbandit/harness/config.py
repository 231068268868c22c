"""Experiment configuration: a single JSON document per experiment."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..core import Constant, Gaussian, MeanSurface, make_rng
from ..environments import (
    Environment, dataset_env_from_table, load_piecewise_csv, make_piecewise_lb_instance,
    make_prop1_pair, make_rested_two_arm, random_i_star, set_upsilon,
)
from ..policies import POLICY_IDS


class ConfigError(ValueError):
    """Invalid or missing configuration."""


@dataclass(frozen=True)
class PolicySpec:
    id: str
    params: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.id not in POLICY_IDS:
            raise ConfigError(f"unknown policy id {self.id!r}; known: {', '.join(POLICY_IDS)}")
        if not self.label:
            object.__setattr__(self, "label", self.id)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    ``environment`` is ``{"generator": name, "params": {...}}``; relative
    paths inside it resolve against ``base_dir`` (the config file's folder).
    """

    environment: dict
    policies: tuple
    T: Optional[int] = None
    replications: int = 1
    seed: int = 0
    quantiles: tuple = (0.1, 0.9)
    output_dir: str = "out"
    oracle: str = "auto"
    write_runs: bool = True
    name: str = "experiment"
    base_dir: str = "."

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if len(self.quantiles) != 2 or not all(0 < q < 1 for q in self.quantiles):
            raise ConfigError("quantiles must be two values in (0, 1)")
        if self.quantiles[0] > self.quantiles[1]:
            raise ConfigError("quantiles must be ordered (low, high)")
        if not self.policies:
            raise ConfigError("at least one policy is required")
        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ConfigError("policy labels must be unique")
        if "generator" not in self.environment:
            raise ConfigError("environment.generator is required")
        if self.environment["generator"] not in GENERATORS:
            raise ConfigError(f"unknown environment generator {self.environment['generator']!r}")
        if self.oracle not in ("auto", "greedy", "exhaustive"):
            raise ConfigError(f"unknown oracle {self.oracle!r}")
        if self.T is not None and self.T < 1:
            raise ConfigError("T must be >= 1")

    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def env_params(self) -> dict:
        return dict(self.environment.get("params", {}))

    def varies_per_replication(self) -> bool:
        return GENERATORS[self.environment["generator"]][1](self.env_params)

    def build_environment(self, replication: int = 0) -> Environment:
        gen = GENERATORS[self.environment["generator"]][0]
        params = self.env_params
        if self.T is not None:
            params.setdefault("T", self.T)
        try:
            return gen(self, params, replication)
        except ConfigError:
            raise
        except (TypeError, KeyError) as e:
            raise ConfigError(f"bad parameters for {self.environment['generator']}: {e}") from None


ALLOWED_KEYS = {"environment", "policies", "T", "replications", "seed", "quantiles",
                "output_dir", "oracle", "write_runs", "name"}


def config_from_dict(d: dict, base_dir=".") -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(d) - ALLOWED_KEYS
    if extra:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
    for key in ("environment", "policies"):
        if key not in d:
            raise ConfigError(f"missing required key {key!r}")
    pols = []
    for p in d["policies"]:
        if isinstance(p, str):
            p = {"id": p}
        if "id" not in p:
            raise ConfigError("every policy needs an id")
        pols.append(PolicySpec(p["id"], dict(p.get("params", {})), p.get("label", "")))
    try:
        return ExperimentConfig(
            environment=dict(d["environment"]),
            policies=tuple(pols),
            T=d.get("T"),
            replications=int(d.get("replications", 1)),
            seed=int(d.get("seed", 0)),
            quantiles=tuple(d.get("quantiles", (0.1, 0.9))),
            output_dir=str(d.get("output_dir", "out")),
            oracle=d.get("oracle", "auto"),
            write_runs=bool(d.get("write_runs", True)),
            name=str(d.get("name", "experiment")),
            base_dir=str(base_dir),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return config_from_dict(d, base_dir=path.parent)


# ---------------------------------------------------------------------------
# Environment generators by name: (builder, varies_per_replication)
# ---------------------------------------------------------------------------


def _rested_two_arm(cfg, p, r):
    return make_rested_two_arm(p.get("L", 1.0), p.get("break_pull", 2500), p.get("T", 10_000), p.get("sigma", 1.0))


def _mixed_pair(which):
    def build(cfg, p, r):
        return make_prop1_pair(p["T"])[which]
    return build


def _stationary(cfg, p, r):
    means = [float(x) for x in p["means"]]
    surface = MeanSurface(tuple(Constant(m) for m in means), int(p["T"]))
    lo, hi = p.get("range", (min(means), max(means)))
    if hi <= lo:
        lo = hi - 1.0
    return Environment(surface, Gaussian(p.get("sigma", 1.0)), (lo, hi), "stationary")


def _piecewise_lb(cfg, p, r):
    K, T, sigma = int(p["K"]), int(p["T"]), float(p.get("sigma", 1.0))
    if "upsilon" in p:
        U = int(p["upsilon"])
    elif "V" in p:
        U = set_upsilon(float(p["V"]), T, K, sigma)
    else:
        raise ConfigError("piecewise_lb needs upsilon or V")
    i_star = p.get("i_star", "random")
    if i_star == "random":
        i_star = random_i_star(K, U, make_rng(cfg.seed, "i_star", r))
    return make_piecewise_lb_instance(K, U, T, sigma, i_star)


def _piecewise_csv(cfg, p, r):
    spec = load_piecewise_csv(cfg.resolve(p["path"]))
    T = int(p.get("T") or 0)
    if not T:
        raise ConfigError("piecewise_csv needs T")
    return spec.to_environment(T, Gaussian(p.get("sigma", 1.0)), p.get("range"))


def _dataset_table(cfg, p, r):
    from .ingest import read_table_csv
    rows = read_table_csv(cfg.resolve(p["path"]))
    return dataset_env_from_table(rows, int(p.get("samples_per_round", 10)))


def _click_log(cfg, p, r):
    from .ingest import ingest_click_log
    rows = ingest_click_log(cfg.resolve(p["path"]), p.get("bucket_minutes", 5), p.get("window", 30000),
                            tuple(p["span"]) if "span" in p else None)
    return dataset_env_from_table(rows, int(p.get("samples_per_round", 10)))


GENERATORS = {
    "rested_two_arm": (_rested_two_arm, lambda p: False),
    "mixed_mu0": (_mixed_pair(0), lambda p: False),
    "mixed_mu1": (_mixed_pair(1), lambda p: False),
    "stationary": (_stationary, lambda p: False),
    "piecewise_lb": (_piecewise_lb, lambda p: p.get("i_star", "random") == "random"),
    "piecewise_csv": (_piecewise_csv, lambda p: False),
    "dataset_table": (_dataset_table, lambda p: False),
    "click_log": (_click_log, lambda p: False),
}


def thread_count(default: Optional[int] = None) -> int:
    """Worker count from ``BANDIT_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("BANDIT_THREADS", "")
    n = default
    if raw.strip():
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"BANDIT_THREADS must be an integer, got {raw!r}") from None
    if not n:
        n = os.cpu_count() or 1
    return max(1, n)
