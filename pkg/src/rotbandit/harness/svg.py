"""Minimal hand-written SVG line charts for regret curves."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
WIDTH, HEIGHT = 720, 440
MARGIN = dict(left=70, right=170, top=30, bottom=50)
MAX_POINTS = 600


class Axis:
    """Maps data values to pixels, linearly or in log10."""

    def __init__(self, lo, hi, p0, p1, log=False):
        self.log = log
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi <= lo:
            hi = lo + 1.0
        self.lo, self.hi, self.p0, self.p1 = lo, hi, p0, p1

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if self.log:
            v = np.log10(v)
        return self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)

    def ticks(self, n=5):
        if self.log:
            return [10.0 ** k for k in range(math.floor(self.lo), math.ceil(self.hi) + 1)
                    if self.lo - 1e-9 <= k <= self.hi + 1e-9]
        return list(np.linspace(self.lo, self.hi, n))


def _thin(n):
    if n <= MAX_POINTS:
        return np.arange(n)
    idx = np.unique(np.geomspace(1, n, MAX_POINTS).astype(int) - 1)
    return np.union1d(idx, np.linspace(0, n - 1, MAX_POINTS // 2).astype(int))


def _points(xs, ys):
    return " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))


def emit_svg(agg, path, log_axes: bool = False, bounds: Optional[dict] = None,
             title: str = "", band: bool = True) -> Path:
    """Regret curves with quantile bands and optional bound overlays.

    ``bounds`` maps a label to a per-round array (rounds 1..T). Root element
    attributes ``data-x-*``/``data-y-*`` record the axis mapping so coordinates
    can be converted back to data units.
    """
    if agg is None or not agg.policies:
        raise ValueError("nothing to plot")
    bounds = bounds or {}
    T = max(p.T for p in agg.policies)
    series = [(p.policy, p.mean, (p.q_lo, p.q_hi)) for p in agg.policies]
    series += [(name, np.asarray(v, dtype=float), None) for name, v in bounds.items()]
    allv = np.concatenate([s[1] for s in series] + ([b for s in series if s[2] for b in s[2]] if band else []))
    floor = 1e-3
    if log_axes:
        pos = allv[allv > 0]
        floor = float(pos.min()) if pos.size else 1e-3
        ylo, yhi = floor, max(float(allv.max()), floor * 10)
        xlo, xhi = 1.0, float(max(T, 10))
    else:
        ylo, yhi = min(0.0, float(allv.min())), float(allv.max())
        if yhi <= ylo:
            yhi = ylo + 1.0
        xlo, xhi = 1.0, float(max(T, 2))
    left, top = MARGIN["left"], MARGIN["top"]
    right, bottom = WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]
    X = Axis(xlo, xhi, left, right, log_axes)
    Y = Axis(ylo, yhi, bottom, top, log_axes)

    def ypix(v):
        v = np.asarray(v, dtype=float)
        return Y(np.maximum(v, floor)) if log_axes else Y(v)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" data-log="{int(log_axes)}" '
        f'data-x-lo="{X.lo!r}" data-x-hi="{X.hi!r}" data-x-p0="{X.p0}" data-x-p1="{X.p1}" '
        f'data-y-lo="{Y.lo!r}" data-y-hi="{Y.hi!r}" data-y-p0="{Y.p0}" data-y-p1="{Y.p1}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" fill="none" stroke="#444"/>',
    ]
    if title:
        out.append(f'<text x="{(left + right) / 2}" y="{top - 10}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="14">{escape(title)}</text>')
    for v in X.ticks():
        px = float(X(v))
        out.append(f'<line x1="{px:.2f}" y1="{bottom}" x2="{px:.2f}" y2="{bottom + 5}" stroke="#444"/>')
        out.append(f'<text x="{px:.2f}" y="{bottom + 18}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{v:.4g}</text>')
    for v in Y.ticks():
        py = float(Y(v))
        out.append(f'<line x1="{left - 5}" y1="{py:.2f}" x2="{left}" y2="{py:.2f}" stroke="#444"/>')
        out.append(f'<text x="{left - 8}" y="{py + 4:.2f}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{v:.4g}</text>')
    out.append(f'<text x="{(left + right) / 2}" y="{HEIGHT - 12}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">round t</text>')
    out.append(f'<text x="18" y="{(top + bottom) / 2}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12" transform="rotate(-90 18 {(top + bottom) / 2})">regret</text>')

    for k, (name, ys, qs) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        idx = _thin(len(ys))
        ts = idx + 1.0
        px = X(ts)
        if qs is not None and band:
            lo, hi = ypix(qs[0][idx]), ypix(qs[1][idx])
            poly = _points(np.concatenate([px, px[::-1]]), np.concatenate([hi, lo[::-1]]))
            out.append(f'<polygon class="band" data-series="{escape(name)}" points="{poly}" '
                       f'fill="{color}" fill-opacity="0.18" stroke="none"/>')
        dash = ' stroke-dasharray="6,4"' if qs is None else ""
        kind = "bound" if qs is None else "mean"
        out.append(f'<polyline class="{kind}" data-series="{escape(name)}" points="{_points(px, ypix(ys[idx]))}" '
                   f'fill="none" stroke="{color}" stroke-width="1.8"{dash}/>')
        ly = top + 16 + 18 * k
        out.append(f'<g class="legend"><line x1="{right + 12}" y1="{ly}" x2="{right + 36}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"{dash}/><text x="{right + 42}" y="{ly + 4}" '
                   f'font-family="sans-serif" font-size="12">{escape(name)}</text></g>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path


def read_series(path) -> dict:
    """Recover ``{series: (t, y)}`` in data units from an emitted chart."""
    import xml.etree.ElementTree as ET

    root = ET.parse(path).getroot()
    a = root.attrib
    log = a["data-log"] == "1"

    def inv(p, lo, hi, p0, p1):
        v = lo + (p - p0) / (p1 - p0) * (hi - lo)
        return 10.0 ** v if log else v

    xs = [float(a[f"data-x-{k}"]) for k in ("lo", "hi", "p0", "p1")]
    ys = [float(a[f"data-y-{k}"]) for k in ("lo", "hi", "p0", "p1")]
    out = {}
    for el in root.iter("{http://www.w3.org/2000/svg}polyline"):
        pts = np.array([[float(c) for c in p.split(",")] for p in el.attrib["points"].split()])
        out[el.attrib["data-series"]] = (inv(pts[:, 0], *xs), inv(pts[:, 1], *ys))
    return out
