"""Self-contained SVG line plots.

Byte-deterministic output with no external renderer: figures are byproducts,
the CSVs are the contract.  Supports a log y-axis, one dashed horizontal
marker, and an optional secondary right-hand axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]

_MARGIN = dict(left=62.0, right=66.0, top=34.0, bottom=46.0)


@dataclass
class Series:
    x: list
    y: list
    label: str = ""
    dashed: bool = False
    right: bool = False  # plot against the secondary axis


@dataclass
class Figure:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    right_ylabel: str = ""
    ylog: bool = False
    hline: float | None = None
    hline_label: str = ""
    width: float = 840.0
    height: float = 500.0
    series: list = field(default_factory=list)


def _nice_ticks(lo: float, hi: float, target: int = 6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1.0, 2.0, 5.0, 10.0) if m * mag >= raw)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def _finite_pairs(xs, ys):
    return [(float(x), float(y)) for x, y in zip(xs, ys) if math.isfinite(float(x)) and math.isfinite(float(y))]


def render(fig: Figure) -> str:
    x0, y0 = _MARGIN["left"], _MARGIN["top"]
    x1, y1 = fig.width - _MARGIN["right"], fig.height - _MARGIN["bottom"]

    def transform_y(v):
        if fig.ylog:
            return math.log10(v) if v > 0 else float("nan")
        return v

    left = [s for s in fig.series if not s.right]
    right = [s for s in fig.series if s.right]
    pts_left = [p for s in left for p in _finite_pairs(s.x, [transform_y(v) for v in s.y])]
    pts_right = [p for s in right for p in _finite_pairs(s.x, s.y)]
    if not pts_left:
        pts_left = [(0.0, 0.0), (1.0, 1.0)]
    xs = [p[0] for p in pts_left] + [p[0] for p in pts_right]
    xmin, xmax = min(xs), max(xs)
    ys = [p[1] for p in pts_left]
    if fig.hline is not None:
        ys.append(transform_y(fig.hline))
    ymin, ymax = min(ys), max(ys)
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1.0
    pad = 0.04 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad

    def sx(v):
        return x0 + (v - xmin) / (xmax - xmin) * (x1 - x0)

    def sy(v):
        return y1 - (v - ymin) / (ymax - ymin) * (y1 - y0)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{fig.width:g}" height="{fig.height:g}" '
        f'viewBox="0 0 {fig.width:g} {fig.height:g}" font-family="monospace" font-size="12">',
        f'<rect width="{fig.width:g}" height="{fig.height:g}" fill="white"/>',
        f'<text x="{(x0 + x1) / 2:.1f}" y="20" text-anchor="middle" font-size="14">{fig.title}</text>',
    ]

    for t in _nice_ticks(xmin, xmax):
        px = sx(t)
        out.append(f'<line x1="{px:.2f}" y1="{y0:.1f}" x2="{px:.2f}" y2="{y1:.1f}" stroke="#dddddd"/>')
        out.append(f'<text x="{px:.2f}" y="{y1 + 16:.1f}" text-anchor="middle">{_fmt(t)}</text>')
    if fig.ylog:
        lo_dec, hi_dec = math.floor(ymin), math.ceil(ymax)
        yticks = [d for d in range(int(lo_dec), int(hi_dec) + 1) if ymin <= d <= ymax]
        ylabels = [f"1e{d}" for d in yticks]
    else:
        yticks = _nice_ticks(ymin, ymax)
        ylabels = [_fmt(t) for t in yticks]
    for t, lbl in zip(yticks, ylabels):
        py = sy(t)
        out.append(f'<line x1="{x0:.1f}" y1="{py:.2f}" x2="{x1:.1f}" y2="{py:.2f}" stroke="#dddddd"/>')
        out.append(f'<text x="{x0 - 6:.1f}" y="{py + 4:.2f}" text-anchor="end">{lbl}</text>')

    if right:
        rvals = [p[1] for p in pts_right] or [0.0, 1.0]
        rmin, rmax = min(rvals), max(rvals)
        if rmax == rmin:
            rmax = rmin + 1.0
        rpad = 0.04 * (rmax - rmin)
        rmin, rmax = rmin - rpad, rmax + rpad

        def sy_r(v):
            return y1 - (v - rmin) / (rmax - rmin) * (y1 - y0)

        for t in _nice_ticks(rmin, rmax):
            py = sy_r(t)
            out.append(f'<text x="{x1 + 6:.1f}" y="{py + 4:.2f}" text-anchor="start">{_fmt(t)}</text>')
        if fig.right_ylabel:
            out.append(
                f'<text x="{fig.width - 12:.1f}" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
                f'transform="rotate(90 {fig.width - 12:.1f} {(y0 + y1) / 2:.1f})">{fig.right_ylabel}</text>'
            )
    else:
        sy_r = sy

    if fig.hline is not None:
        py = sy(transform_y(fig.hline))
        out.append(
            f'<line x1="{x0:.1f}" y1="{py:.2f}" x2="{x1:.1f}" y2="{py:.2f}" '
            f'stroke="#444444" stroke-dasharray="7,5"/>'
        )
        if fig.hline_label:
            out.append(f'<text x="{x1 - 4:.1f}" y="{py - 5:.2f}" text-anchor="end" fill="#444444">{fig.hline_label}</text>')

    for i, s in enumerate(fig.series):
        color = PALETTE[i % len(PALETTE)]
        scale_y = sy_r if s.right else sy
        ys_t = s.y if s.right else [transform_y(v) for v in s.y]
        pts = _finite_pairs(s.x, ys_t)
        if pts:
            coords = " ".join(f"{sx(px):.2f},{scale_y(py):.2f}" for px, py in pts)
            dash = ' stroke-dasharray="5,4"' if s.dashed else ""
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>')
        ly = y0 + 14 * (i + 1)
        out.append(f'<line x1="{x1 - 150:.1f}" y1="{ly - 4:.1f}" x2="{x1 - 126:.1f}" y2="{ly - 4:.1f}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x1 - 120:.1f}" y="{ly:.1f}">{s.label}</text>')

    out.append(f'<rect x="{x0:.1f}" y="{y0:.1f}" width="{x1 - x0:.1f}" height="{y1 - y0:.1f}" fill="none" stroke="#333333"/>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{fig.height - 10:.1f}" text-anchor="middle">{fig.xlabel}</text>')
    out.append(
        f'<text x="16" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">{fig.ylabel}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
