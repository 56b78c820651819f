"""Tiny dependency-free SVG charts.

Two renderers: a train/validation loss curve and a horizontal signed bar
chart for explanation weights (green toward the positive class, red against,
ordered by descending magnitude). Both emit plain SVG text, so chart output
is deterministic and diffable.
"""

from __future__ import annotations

from html import escape
from typing import Sequence

_FONT = "font-family='monospace' font-size='12'"
_GREEN = "#2f9e44"
_RED = "#c0392b"


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def loss_curve_svg(
    train_losses: Sequence[float],
    val_losses: Sequence[float],
    title: str = "Training and validation loss",
) -> str:
    """Line chart of per-epoch losses (train solid blue, validation orange)."""
    if len(train_losses) == 0:
        raise ValueError("no losses to plot")
    width, height = 640, 400
    left, right, top, bottom = 60, 20, 40, 40
    pw, ph = width - left - right, height - top - bottom

    all_vals = [float(v) for v in train_losses] + [float(v) for v in val_losses]
    lo, hi = min(all_vals), max(all_vals)
    if hi <= lo:
        hi = lo + 1.0
    n = max(len(train_losses), len(val_losses))

    def x_of(i: int) -> float:
        return left + (pw * i / max(n - 1, 1))

    def y_of(v: float) -> float:
        return top + ph * (1.0 - (v - lo) / (hi - lo))

    def polyline(vals, color) -> str:
        pts = " ".join(f"{x_of(i):.1f},{y_of(float(v)):.1f}" for i, v in enumerate(vals))
        return f"<polyline fill='none' stroke='{color}' stroke-width='1.5' points='{pts}'/>"

    parts = [
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' height='{height}'>",
        f"<rect width='{width}' height='{height}' fill='white'/>",
        f"<text x='{width / 2:.0f}' y='20' text-anchor='middle' {_FONT}>{escape(title)}</text>",
        f"<rect x='{left}' y='{top}' width='{pw}' height='{ph}' fill='none' stroke='#999'/>",
    ]
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        y = y_of(v)
        parts.append(f"<line x1='{left}' y1='{y:.1f}' x2='{left + pw}' y2='{y:.1f}' stroke='#eee'/>")
        parts.append(
            f"<text x='{left - 6}' y='{y + 4:.1f}' text-anchor='end' {_FONT}>{_fmt(v)}</text>"
        )
    step = max(1, (n - 1) // 8 or 1)
    for i in range(0, n, step):
        x = x_of(i)
        parts.append(
            f"<text x='{x:.1f}' y='{height - 18}' text-anchor='middle' {_FONT}>{i + 1}</text>"
        )
    parts.append(
        f"<text x='{left + pw / 2:.0f}' y='{height - 4}' text-anchor='middle' {_FONT}>epoch</text>"
    )
    parts.append(polyline(train_losses, "#1c7ed6"))
    if len(val_losses):
        parts.append(polyline(val_losses, "#e8590c"))
    parts.append(
        f"<rect x='{left + 10}' y='{top + 8}' width='12' height='4' fill='#1c7ed6'/>"
        f"<text x='{left + 28}' y='{top + 14}' {_FONT}>train</text>"
        f"<rect x='{left + 10}' y='{top + 24}' width='12' height='4' fill='#e8590c'/>"
        f"<text x='{left + 28}' y='{top + 30}' {_FONT}>validation</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts)


def weight_bars_svg(
    entries: Sequence[tuple[str, float]],
    title: str = "Explanation weights",
    max_bars: int = 20,
) -> str:
    """Signed horizontal bars for (statement, weight) pairs.

    Entries are drawn top-down in the given order (callers pass them sorted
    by descending |weight|); positive weights grow rightward in green,
    negative leftward in red.
    """
    if len(entries) == 0:
        raise ValueError("no entries to plot")
    entries = list(entries)[:max_bars]
    label_w, chart_w, row_h = 330, 300, 24
    width = label_w + chart_w + 80
    height = 50 + row_h * len(entries) + 10
    center = label_w + chart_w / 2
    peak = max(abs(w) for _, w in entries) or 1.0
    half = chart_w / 2 - 4

    parts = [
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' height='{height}'>",
        f"<rect width='{width}' height='{height}' fill='white'/>",
        f"<text x='{width / 2:.0f}' y='20' text-anchor='middle' {_FONT}>{escape(title)}</text>",
        f"<line x1='{center:.1f}' y1='36' x2='{center:.1f}' y2='{height - 10}' stroke='#999'/>",
    ]
    for row, (stmt, w) in enumerate(entries):
        y = 50 + row * row_h
        bar = half * abs(w) / peak
        color = _GREEN if w >= 0 else _RED
        x0 = center if w >= 0 else center - bar
        parts.append(
            f"<text x='{label_w - 8}' y='{y + 12}' text-anchor='end' {_FONT}>{escape(stmt)}</text>"
        )
        parts.append(
            f"<rect x='{x0:.1f}' y='{y}' width='{max(bar, 0.5):.1f}' height='{row_h - 8}' fill='{color}'/>"
        )
        tx = center + bar + 6 if w >= 0 else center - bar - 6
        anchor = "start" if w >= 0 else "end"
        parts.append(
            f"<text x='{tx:.1f}' y='{y + 12}' text-anchor='{anchor}' {_FONT}>{w:+.4f}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts)
