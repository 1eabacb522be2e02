"""Static SVG line charts with zero plotting dependencies.

Good enough to eyeball a sweep or a training curve; deterministic output
(fixed canvas, coordinates rounded to fixed precision).
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

from ..errors import ValidationError

_W, _H = 720, 440
_ML, _MR, _MT, _MB = 70, 20, 40, 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _scale(v: float, lo: float, hi: float, out_lo: float, out_hi: float) -> float:
    if hi == lo:
        return 0.5 * (out_lo + out_hi)
    return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)


def line_chart(xs: Sequence[float], series: dict[str, Sequence[float]], title: str,
               x_label: str, y_label: str) -> str:
    if not xs or not series:
        raise ValidationError("line_chart needs x values and at least one series")
    for name, ys in series.items():
        if len(ys) != len(xs):
            raise ValidationError(f"series {name!r} length {len(ys)} != {len(xs)} xs")
        if any(not math.isfinite(v) for v in ys):
            raise ValidationError(f"series {name!r} contains non-finite values")

    all_y = [v for ys in series.values() for v in ys]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(all_y), max(all_y)
    if y_lo == y_hi:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="24" text-anchor="middle" font-size="16" '
        f'font-family="sans-serif">{title}</text>',
        f'<text x="{_W / 2:.1f}" y="{_H - 12}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif">{x_label}</text>',
        f'<text x="16" y="{_H / 2:.1f}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif" transform="rotate(-90 16 {_H / 2:.1f})">'
        f'{y_label}</text>',
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
        f'height="{_H - _MT - _MB}" fill="none" stroke="#888"/>',
    ]
    # axis tick labels at the corners of the data range
    for frac in (0.0, 0.5, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        px = _scale(xv, x_lo, x_hi, _ML, _W - _MR)
        py = _scale(yv, y_lo, y_hi, _H - _MB, _MT)
        parts.append(f'<text x="{px:.1f}" y="{_H - _MB + 16}" text-anchor="middle" '
                     f'font-size="10" font-family="sans-serif">{xv:.6g}</text>')
        parts.append(f'<text x="{_ML - 6}" y="{py:.1f}" text-anchor="end" '
                     f'font-size="10" font-family="sans-serif">{yv:.6g}</text>')

    for si, (name, ys) in enumerate(sorted(series.items())):
        pts = " ".join(
            f"{_scale(x, x_lo, x_hi, _ML, _W - _MR):.2f},"
            f"{_scale(y, y_lo, y_hi, _H - _MB, _MT):.2f}"
            for x, y in zip(xs, ys))
        color = _COLORS[si % len(_COLORS)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{_W - _MR - 6}" y="{_MT + 16 + 14 * si}" '
                     f'text-anchor="end" font-size="11" font-family="sans-serif" '
                     f'fill="{color}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_chart(path: str | Path, xs: Sequence[float], series: dict[str, Sequence[float]],
                title: str, x_label: str, y_label: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(line_chart(xs, series, title, x_label, y_label))
