"""CSV / JSON / SVG writers.  Plain text only, so outputs diff cleanly."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def trajectory_rows(records):
    """Long format: one row per (trajectory, record time)."""
    herm = records[0].hermitian_channels
    labels = records[0].labels
    header = ["time", "trajectory"]
    for j, lab in enumerate(labels):
        header += [f"{lab}.re", f"{lab}.im"]
        if j in herm:
            header.append(f"{lab}.var")
    rows = []
    for r in records:
        for k, t in enumerate(r.times):
            row = [float(t), r.trajectory_index]
            for j in range(len(labels)):
                e = r.expectations[k, j]
                row += [float(e.real), float(e.imag)]
                if j in herm:
                    row.append(float(r.variances[k, herm.index(j)]))
            rows.append(row)
    return header, rows


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]


def expectation_svg(series, levels, title: str, ylabel: str, width: int = 800, height: int = 480) -> str:
    """Line plot of <L>(t) per trajectory with dashed gridlines at eigenvalues.

    ``series`` is a list of ``(times, values)`` pairs.
    """
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom
    t_hi = max(float(t[-1]) for t, _ in series) or 1.0
    lo = min(min(levels), min(float(np.min(v)) for _, v in series))
    hi = max(max(levels), max(float(np.max(v)) for _, v in series))
    pad = 0.05 * (hi - lo or 1.0)
    lo, hi = lo - pad, hi + pad

    def sx(t):
        return left + pw * float(t) / t_hi

    def sy(v):
        return top + ph * (hi - float(v)) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{_esc(title)}</text>',
    ]
    for lev in levels:
        y = sy(lev)
        out.append(f'<line class="level" x1="{left}" y1="{y:.3f}" x2="{left + pw}" y2="{y:.3f}" '
                   f'stroke="#999" stroke-dasharray="4 3" stroke-width="1"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.3f}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{lev:g}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for k in range(6):
        t = t_hi * k / 5
        out.append(f'<text x="{sx(t):.3f}" y="{top + ph + 18}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{t:.3g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13">time</text>')
    out.append(f'<text x="18" y="{top + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="13" transform="rotate(-90 18 {top + ph / 2:.1f})">{_esc(ylabel)}</text>')
    for i, (t, v) in enumerate(series):
        pts = " ".join(f"{sx(a):.3f},{sy(b):.3f}" for a, b in zip(t, v) if math.isfinite(float(b)))
        out.append(f'<polyline class="trajectory" fill="none" stroke="{_PALETTE[i % len(_PALETTE)]}" '
                   f'stroke-width="1.2" points="{pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
