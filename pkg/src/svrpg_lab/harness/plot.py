"""Learning-curve comparison plots as standalone SVG."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

from ..errors import ConfigError

COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]
WIDTH, HEIGHT = 720, 440
MARGIN = dict(left=70, right=170, top=30, bottom=55)


def read_aggregate(path) -> dict[str, list[float]]:
    """Columns ``x``, ``y``, ``low``, ``high`` from an aggregate CSV."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            need = ("trajectories_consumed", "mean_return", "ci_low", "ci_high")
            if reader.fieldnames is None or any(c not in reader.fieldnames for c in need):
                raise ConfigError(f"{path}: not an aggregate CSV (need columns {', '.join(need)})")
            cols: dict[str, list[float]] = {"x": [], "y": [], "low": [], "high": []}
            for lineno, row in enumerate(reader, 2):
                try:
                    vals = [float(row[c]) for c in need]
                except (TypeError, ValueError):
                    raise ConfigError(f"{path}:{lineno}: non-numeric value") from None
                if not all(math.isfinite(v) for v in vals):
                    raise ConfigError(f"{path}:{lineno}: non-finite value")
                for key, v in zip(("x", "y", "low", "high"), vals):
                    cols[key].append(v)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except csv.Error as exc:
        raise ConfigError(f"{path}: malformed CSV: {exc}") from None
    if not cols["x"]:
        raise ConfigError(f"{path}: no data rows")
    return cols


def run_label(path) -> str:
    """Legend name: the run directory holding the CSV, else the file stem."""
    path = Path(path)
    return path.parent.name if path.name == "aggregate.csv" and path.parent.name else path.stem


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 10))
        v += step
    return ticks


def _fmt_tick(v: float) -> str:
    return f"{v:g}"


def render_svg(curves: list[tuple[str, dict[str, list[float]]]], title: str = "") -> str:
    xs = [v for _, c in curves for v in c["x"]]
    ys = [v for _, c in curves for key in ("y", "low", "high") for v in c[key]]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1.0, x1 + 1.0
    if y1 == y0:
        pad = max(abs(y0) * 0.05, 1.0)
        y0, y1 = y0 - pad, y1 + pad
    left, top = MARGIN["left"], MARGIN["top"]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    def pts(points):
        return " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in points)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{left + pw / 2:.2f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<g class="axes" stroke="black" fill="none">'
               f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}"/>'
               f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}"/></g>')
    ticks = ['<g class="ticks" fill="black">']
    for t in _nice_ticks(x0, x1):
        ticks.append(f'<line x1="{px(t):.2f}" y1="{top + ph}" x2="{px(t):.2f}" y2="{top + ph + 5}" stroke="black"/>'
                     f'<text x="{px(t):.2f}" y="{top + ph + 18}" text-anchor="middle">{_fmt_tick(t)}</text>')
    for t in _nice_ticks(y0, y1):
        ticks.append(f'<line x1="{left - 5}" y1="{py(t):.2f}" x2="{left}" y2="{py(t):.2f}" stroke="black"/>'
                     f'<text x="{left - 8}" y="{py(t) + 4:.2f}" text-anchor="end">{_fmt_tick(t)}</text>')
    ticks.append("</g>")
    out.extend(ticks)
    out.append(f'<text class="xlabel" x="{left + pw / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">'
               'trajectories consumed</text>')
    out.append(f'<text class="ylabel" x="18" y="{top + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2:.2f})">mean return</text>')

    for i, (label, c) in enumerate(curves):
        color = COLORS[i % len(COLORS)]
        name = quoteattr(label)
        out.append(f'<g class="curve" data-name={name}>')
        if len(c["x"]) == 1:
            x, y, lo, hi = c["x"][0], c["y"][0], c["low"][0], c["high"][0]
            out.append(f'<line class="errorbar" x1="{px(x):.2f}" y1="{py(lo):.2f}" x2="{px(x):.2f}" '
                       f'y2="{py(hi):.2f}" stroke="{color}" stroke-width="1.5"/>')
            out.append(f'<circle class="marker" cx="{px(x):.2f}" cy="{py(y):.2f}" r="4" fill="{color}"/>')
        else:
            upper = list(zip(c["x"], c["high"]))
            lower = list(zip(c["x"], c["low"]))[::-1]
            out.append(f'<polygon class="band" points="{pts(upper + lower)}" fill="{color}" '
                       'fill-opacity="0.2" stroke="none"/>')
            out.append(f'<polyline class="mean" points="{pts(zip(c["x"], c["y"]))}" fill="none" '
                       f'stroke="{color}" stroke-width="1.5"/>')
        out.append("</g>")

    lx = left + pw + 15
    out.append('<g class="legend">')
    for i, (label, _) in enumerate(curves):
        color = COLORS[i % len(COLORS)]
        ly = top + 10 + 20 * i
        out.append(f'<rect x="{lx}" y="{ly - 8}" width="14" height="10" fill="{color}"/>'
                   f'<text x="{lx + 20}" y="{ly + 1}">{escape(label)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(csv_paths, out, title: str = "") -> Path:
    """Render aggregate CSVs into one SVG comparison plot at ``out``."""
    csv_paths = list(csv_paths)
    if not csv_paths:
        raise ConfigError("plot needs at least one aggregate CSV")
    curves = [(run_label(p), read_aggregate(p)) for p in csv_paths]
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_svg(curves, title), encoding="utf-8", newline="")
    return out
