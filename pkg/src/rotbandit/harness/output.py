"""CSV emission and reading for run and aggregate results."""

from __future__ import annotations

import csv
from pathlib import Path

RUNS_HEADER = ("policy", "replication", "t", "arm", "regret")
AGG_HEADER = ("policy", "t", "mean_regret", "q_lo", "q_hi")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def emit_runs_csv(runs, path) -> Path:
    """One row per (policy, replication, round); ``regret`` is cumulative."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(RUNS_HEADER)
        for r in runs:
            for t, (a, g) in enumerate(zip(r.arms.tolist(), r.regret.tolist()), 1):
                w.writerow((r.policy, r.replication, t, a, fmt(g)))
    return path


def emit_aggregate_csv(agg, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(AGG_HEADER)
        for p in agg.policies if agg is not None else []:
            for t, (m, lo, hi) in enumerate(zip(p.mean.tolist(), p.q_lo.tolist(), p.q_hi.tolist()), 1):
                w.writerow((p.policy, t, fmt(m), fmt(lo), fmt(hi)))
    return path


def emit_csv(obj, path) -> Path:
    """Aggregate results go to the aggregate schema, a run list to the runs schema."""
    if hasattr(obj, "policies") and hasattr(obj, "quantiles"):
        return emit_aggregate_csv(obj, path)
    return emit_runs_csv(obj, path)


def read_csv(path) -> list:
    """Rows as dicts with numeric columns parsed (ints stay ints)."""
    ints = {"replication", "t", "arm"}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = []
        for row in csv.DictReader(fh):
            rows.append({k: (int(v) if k in ints else v if k == "policy" else float(v)) for k, v in row.items()})
    return rows
