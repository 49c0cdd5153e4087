"""Static SVG regret charts.

The writer is deliberately hand-rolled: output bytes depend only on the
input statistics, which makes golden-file testing and diffing of experiment
outputs possible.  One chart shows one metric (simple or cumulative regret)
with a mean line and a shaded +/-1 SE band per strategy.
"""

from __future__ import annotations

import math
from pathlib import Path

from .errors import ConfigurationError
from .harness import AggregateStats

# Regret can hit exact zero; on a log axis it is clamped here.
LOG_FLOOR = 1e-12

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
)

_WIDTH, _HEIGHT = 720, 480
_LEFT, _RIGHT, _TOP, _BOTTOM = 80, 170, 24, 56


def _series(stats: AggregateStats, metric: str):
    if metric == "simple":
        return stats.mean_simple, stats.se_simple
    if metric == "cumulative":
        return stats.mean_cum, stats.se_cum
    raise ConfigurationError(f"unknown metric: {metric!r}")


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def emit_plot(
    stats_list: list[AggregateStats],
    path,
    metric: str = "simple",
    log_y: bool = False,
) -> None:
    """Write a line chart with +/-1 SE bands, one series per statistics object."""
    stats_list = [s for s in stats_list if s.rounds]
    if not stats_list:
        raise ConfigurationError("nothing to plot: no non-empty statistics given")

    def transform(v: float) -> float:
        return math.log10(max(v, LOG_FLOOR)) if log_y else v

    xs_all = [t for s in stats_list for t in s.rounds]
    ys_all: list[float] = []
    for s in stats_list:
        mean, se = _series(s, metric)
        ys_all.extend(transform(m - e) for m, e in zip(mean, se))
        ys_all.extend(transform(m + e) for m, e in zip(mean, se))
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    plot_w = _WIDTH - _LEFT - _RIGHT
    plot_h = _HEIGHT - _TOP - _BOTTOM

    def px(t: float) -> float:
        frac = 0.0 if x_hi == x_lo else (t - x_lo) / (x_hi - x_lo)
        return _LEFT + frac * plot_w

    def py(v: float) -> float:
        frac = (v - y_lo) / (y_hi - y_lo)
        return _TOP + (1.0 - frac) * plot_h

    def pts(pairs) -> str:
        return " ".join(f"{x:.2f},{y:.2f}" for x, y in pairs)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="#ffffff"/>',
    ]

    # axes and ticks
    axis = (
        f'<line x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{_TOP + plot_h}" '
        'stroke="#000000" stroke-width="1"/>'
        f'<line x1="{_LEFT}" y1="{_TOP + plot_h}" x2="{_LEFT + plot_w}" '
        f'y2="{_TOP + plot_h}" stroke="#000000" stroke-width="1"/>'
    )
    parts.append(axis)
    for t in _ticks(x_lo, x_hi):
        x = px(t)
        parts.append(
            f'<line x1="{x:.2f}" y1="{_TOP + plot_h}" x2="{x:.2f}" '
            f'y2="{_TOP + plot_h + 5}" stroke="#000000" stroke-width="1"/>'
            f'<text x="{x:.2f}" y="{_TOP + plot_h + 20}" font-size="12" '
            f'text-anchor="middle" font-family="sans-serif">{t:.3g}</text>'
        )
    for v in _ticks(y_lo, y_hi):
        y = py(v)
        label = f"1e{v:.2f}" if log_y else f"{v:.3g}"
        parts.append(
            f'<line x1="{_LEFT - 5}" y1="{y:.2f}" x2="{_LEFT}" y2="{y:.2f}" '
            'stroke="#000000" stroke-width="1"/>'
            f'<text x="{_LEFT - 8}" y="{y + 4:.2f}" font-size="12" '
            f'text-anchor="end" font-family="sans-serif">{label}</text>'
        )
    metric_name = "simple regret" if metric == "simple" else "cumulative regret"
    y_title = f"log10 {metric_name}" if log_y else metric_name
    parts.append(
        f'<text x="{_LEFT + plot_w / 2:.2f}" y="{_HEIGHT - 12}" font-size="13" '
        'text-anchor="middle" font-family="sans-serif">round</text>'
        f'<text x="18" y="{_TOP + plot_h / 2:.2f}" font-size="13" text-anchor="middle" '
        f'font-family="sans-serif" transform="rotate(-90 18 {_TOP + plot_h / 2:.2f})">'
        f"{y_title}</text>"
    )

    for i, stats in enumerate(stats_list):
        color = PALETTE[i % len(PALETTE)]
        mean, se = _series(stats, metric)
        upper = [(px(t), py(transform(m + e))) for t, m, e in zip(stats.rounds, mean, se)]
        lower = [(px(t), py(transform(m - e))) for t, m, e in zip(stats.rounds, mean, se)]
        band = upper + lower[::-1]
        parts.append(
            f'<polyline points="{pts(band)}" fill="{color}" fill-opacity="0.18" '
            'stroke="none"/>'
        )
        line = [(px(t), py(transform(m))) for t, m in zip(stats.rounds, mean)]
        parts.append(
            f'<polyline points="{pts(line)}" fill="none" stroke="{color}" '
            'stroke-width="1.8"/>'
        )
        ly = _TOP + 16 + 18 * i
        lx = _LEFT + plot_w + 14
        label = stats.label or f"series {i}"
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
            f'<text x="{lx + 28}" y="{ly}" font-size="12" '
            f'font-family="sans-serif">{label}</text>'
        )

    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
