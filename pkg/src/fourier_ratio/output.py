"""Deterministic CSV, JSON and SVG writers.

Floats are written with ``repr`` (shortest round-trip form) and JSON keys are
sorted, so identical inputs give byte-identical files.  Nothing written here
carries a timestamp or host name.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


def _plain(x):
    """Convert numpy scalars, Fractions and non-finite floats to JSON-safe values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else str(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def write_json(path: str, obj) -> str:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))
    return path


def _cell(v) -> str:
    v = _plain(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    return str(v)


def write_csv(path: str, rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    """Rows of dicts to CSV; ``columns`` defaults to the keys of the first row in order."""
    if columns is None:
        columns = []
        for row in rows:
            for k in row:
                if k not in columns:
                    columns.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return path


def write_field_csv(path: str, field: np.ndarray) -> str:
    """A 1-d or 2-d spatial field as CSV: one row per first-axis index, real and imaginary parts interleaved
    when complex."""
    field = np.atleast_2d(field)
    if field.ndim != 2:
        raise ValueError("only 1-d and 2-d fields are exported")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if np.iscomplexobj(field):
        for row in field:
            w.writerow([repr(float(v)) for pair in zip(row.real, row.imag) for v in pair])
    else:
        for row in field:
            w.writerow([repr(float(v)) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return path


# ---------------------------------------------------------------------------
# SVG


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        ticks = [10.0**k for k in range(a, b + 1)]
        if len(ticks) <= 2:
            ticks = sorted({v * m for v in ticks for m in (1, 2, 5)})
        return [t for t in ticks if lo <= t <= hi] or [lo, hi]
    step = 10 ** math.floor(math.log10((hi - lo) / 4 or 1.0))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _fmt_tick(v: float) -> str:
    return f"{v:g}"


def svg_plot(series: Iterable[tuple[str, Sequence[float], Sequence[float]]], title: str, xlabel: str, ylabel: str,
             logx: bool = True, logy: bool = True, width: int = 640, height: int = 420) -> str:
    """Self-contained SVG line chart; every data point is embedded as a circle with its value in a title tag."""
    series = [(name, [float(a) for a in x], [float(b) for b in y]) for name, x, y in series]
    pts = [(a, b) for _, x, y in series for a, b in zip(x, y)
           if math.isfinite(a) and math.isfinite(b) and (a > 0 or not logx) and (b > 0 or not logy)]
    if not pts:
        raise ValueError("nothing to plot")
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    xs = [a for a, _ in pts]
    ys = [b for _, b in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x0 == x1:
        x0, x1 = (x0 / 2, x1 * 2) if logx else (x0 - 1, x1 + 1)
    if y0 == y1:
        y0, y1 = (y0 / 2, y1 * 2) if logy else (y0 - 1, y1 + 1)
    if logy:
        y0, y1 = y0 / 1.2, y1 * 1.2
    else:
        pad = 0.05 * (y1 - y0)
        y0, y1 = y0 - pad, y1 + pad
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def X(v):
        return left + (tx(v) - tx(x0)) / (tx(x1) - tx(x0)) * pw

    def Y(v):
        return top + ph - (ty(v) - ty(y0)) / (ty(y1) - ty(y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1, logx):
        out.append(f'<line x1="{X(t):.2f}" y1="{top + ph}" x2="{X(t):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X(t):.2f}" y="{top + ph + 18}" text-anchor="middle">{_fmt_tick(t)}</text>')
    for t in _ticks(y0, y1, logy):
        out.append(f'<line x1="{left - 5}" y1="{Y(t):.2f}" x2="{left}" y2="{Y(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{Y(t) + 4:.2f}" text-anchor="end">{_fmt_tick(t)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="15" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + ph / 2:.1f})">{_esc(ylabel)}</text>')
    for i, (name, x, y) in enumerate(series):
        colour = _PALETTE[i % len(_PALETTE)]
        keep = [(a, b) for a, b in zip(x, y) if math.isfinite(a) and math.isfinite(b)
                and (a > 0 or not logx) and (b > 0 or not logy)]
        if not keep:
            continue
        path = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in keep)
        out.append(f'<polyline points="{path}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        for a, b in keep:
            out.append(f'<circle cx="{X(a):.2f}" cy="{Y(b):.2f}" r="3" fill="{colour}">'
                       f'<title>{_esc(name)}: ({a!r}, {b!r})</title></circle>')
        ly = top + 15 + 16 * i
        out.append(f'<line x1="{left + pw - 150}" y1="{ly}" x2="{left + pw - 130}" y2="{ly}" stroke="{colour}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{left + pw - 125}" y="{ly + 4}">{_esc(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def write_svg(path: str, text: str) -> str:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


# ---------------------------------------------------------------------------
# run records


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def write_run_record(outdir: str, subcommand: str, config_ini: str, tolerances: dict, version: str) -> None:
    """``run_config.ini`` (replayable with ``--config``) and ``manifest.json`` with version and tolerances."""
    ensure_dir(outdir)
    with open(os.path.join(outdir, "run_config.ini"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config_ini)
    write_json(os.path.join(outdir, "manifest.json"),
               {"subcommand": subcommand, "version": version, "tolerances": tolerances})
