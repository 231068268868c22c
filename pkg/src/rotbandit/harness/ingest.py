"""Click-log ingestion: bucketing, article filtering and rolling click-through means."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path
from typing import Optional

import numpy as np

from ..core import make_rng

LOG_COLUMNS = ("timestamp_seconds", "article_id", "click")
TABLE_HEADER = ("bucket", "arm", "mean", "traffic")


class ParseError(ValueError):
    """Malformed input row; the message names the line."""


class DataError(ValueError):
    """Input parses but yields nothing usable."""


def _read_log(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != LOG_COLUMNS:
            raise ParseError(f"{path}:1: expected header {','.join(LOG_COLUMNS)}")
        ts, arts, clicks = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                t = int(row[0])
                c = int(row[2])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer timestamp or click") from None
            if c not in (0, 1):
                raise ParseError(f"{path}:{lineno}: click must be 0 or 1")
            art = row[1].strip()
            if not art:
                raise ParseError(f"{path}:{lineno}: empty article id")
            ts.append(t)
            arts.append(art)
            clicks.append(c)
    return ts, arts, clicks


def ingest_click_log(path, bucket_minutes: int = 5, rolling_window: int = 30000,
                     span: Optional[tuple] = None) -> list:
    """Turn a click log into ``(bucket, arm, mean, traffic)`` rows.

    Timestamps are floored to ``bucket_minutes``. Only articles shown in every
    bucket of the span are kept. Each impression of an article gets the mean
    of that article's last ``rolling_window`` clicks (itself included); a
    bucket's mean is the average of those values over the article's
    impressions in the bucket. ``traffic`` counts all kept impressions in the
    bucket. ``span`` is ``(start, end)`` in seconds, end exclusive.
    """
    if rolling_window < 1:
        raise ValueError("rolling_window must be >= 1")
    if bucket_minutes <= 0:
        raise ValueError("bucket_minutes must be > 0")
    ts, arts, clicks = _read_log(path)
    width = int(round(bucket_minutes * 60))
    events = [(t, i) for i, t in enumerate(ts) if span is None or span[0] <= t < span[1]]
    if not events:
        raise DataError(f"{path}: no events in the requested span")
    events.sort()
    bucket_of = {}
    per_article = defaultdict(list)  # article -> event indices in time order
    for t, i in events:
        bucket_of[i] = (t // width) * width
        per_article[arts[i]].append(i)
    buckets = sorted(set(bucket_of.values()))
    kept = sorted(a for a, idx in per_article.items() if len({bucket_of[i] for i in idx}) == len(buckets))
    if not kept:
        raise DataError(f"{path}: no article is present in every bucket")
    sums = defaultdict(float)
    n_imp = defaultdict(int)
    traffic = defaultdict(int)
    for a in kept:
        idx = per_article[a]
        c = np.concatenate(([0], np.cumsum([clicks[i] for i in idx], dtype=np.int64)))
        j = np.arange(1, len(idx) + 1)
        w = np.minimum(j, rolling_window)
        roll = (c[j] - c[j - w]) / w
        for i, v in zip(idx, roll.tolist()):
            b = bucket_of[i]
            sums[(b, a)] += v
            n_imp[(b, a)] += 1
            traffic[b] += 1
    return [(b, a, sums[(b, a)] / n_imp[(b, a)], traffic[b]) for b in buckets for a in kept]


def write_table_csv(rows, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for b, a, m, tr in rows:
            w.writerow((b, a, format(m, ".17g"), tr))
    return path


def read_table_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TABLE_HEADER:
            raise ParseError(f"{path}:1: expected header {','.join(TABLE_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((int(row[0]), row[1], float(row[2]), int(row[3])))
            except (ValueError, IndexError):
                raise ParseError(f"{path}:{lineno}: malformed table row") from None
    return rows


def synthetic_click_log(path, rows: int = 100_000, seed: int = 0, start: int = 1_300_000_200,
                        duration: int = 7200, articles=("a1", "a2"), switch: float = 0.5,
                        probs=((0.05, 0.03), (0.03, 0.05))) -> Path:
    """Write a reproducible log with piecewise-constant click probabilities.

    Timestamps are uniform over ``[start, start + duration)``. Article ``k``
    clicks with ``probs[k][0]`` before ``start + switch * duration`` and
    ``probs[k][1]`` after.
    """
    rng = make_rng(seed, "synthetic-click-log")
    ts = np.sort(rng.integers(start, start + duration, size=rows))
    which = rng.integers(0, len(articles), size=rows)
    cut = start + int(switch * duration)
    p = np.where(ts < cut, [probs[k][0] for k in which], [probs[k][1] for k in which])
    clicks = (rng.random(rows) < p).astype(int)
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for t, k, c in zip(ts.tolist(), which.tolist(), clicks.tolist()):
            w.writerow((t, articles[k], c))
    return path


def synthetic_truth(bucket: int, article: str, start: int = 1_300_000_200, duration: int = 7200,
                    articles=("a1", "a2"), switch: float = 0.5,
                    probs=((0.05, 0.03), (0.03, 0.05))) -> float:
    """True click probability of ``article`` at a bucket start of the synthetic log."""
    k = list(articles).index(article)
    return probs[k][0] if bucket < start + int(switch * duration) else probs[k][1]
