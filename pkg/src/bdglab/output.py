"""CSV tables, manifest files and minimal SVG line charts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import NumericalFailure


def fmt(value) -> str:
    """17 significant digits for reals; ints and strings verbatim."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        if any(c in value for c in ',"\n\r'):
            raise ValueError(f"CSV text cell needs quoting: {value!r}")
        return value
    v = float(value)
    if not math.isfinite(v):
        raise NumericalFailure(f"non-finite value {v!r} in CSV output")
    return format(v, ".17g")


@dataclass
class CsvTable:
    header: Sequence[str]
    rows: list[Sequence] = field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.header):
            raise ValueError(f"row has {len(values)} cells, header has {len(self.header)}")
        self.rows.append(values)

    def render(self) -> str:
        lines = [",".join(self.header)]
        lines.extend(",".join(fmt(v) for v in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def write(self, path: Path) -> Path:
        text = self.render()
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
        return path


def write_manifest(path: Path, entries: Sequence[tuple[str, str]]) -> Path:
    with open(path, "w", newline="\n") as fh:
        for key, value in entries:
            fh.write(f"{key} = {value}\n")
    return path


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_chart(
    series: dict[str, tuple[Sequence[float], Sequence[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    logx: bool = False,
    logy: bool = False,
    width: int = 640,
    height: int = 420,
) -> str:
    """A bare SVG line chart; one polyline per series."""
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    pts = {
        name: [(tx(x), ty(y)) for x, y in zip(xs, ys) if (not logx or x > 0) and (not logy or y > 0)]
        for name, (xs, ys) in series.items()
    }
    allx = [p[0] for v in pts.values() for p in v] or [0.0, 1.0]
    ally = [p[1] for v in pts.values() for p in v] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + (1.0 - (v - y0) / (y1 - y0)) * ph

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1):
        label = f"{10 ** v:.3g}" if logx else f"{v:.3g}"
        out.append(f'<text x="{sx(v):.1f}" y="{top + ph + 18}" text-anchor="middle">{label}</text>')
    for v in _ticks(y0, y1):
        label = f"{10 ** v:.3g}" if logy else f"{v:.3g}"
        out.append(f'<text x="{left - 6}" y="{sy(v) + 4:.1f}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 16 {top + ph / 2:.1f})">{ylabel}</text>'
    )
    for i, (name, p) in enumerate(pts.items()):
        color = colors[i % len(colors)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in p)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        for x, y in p:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        out.append(f'<text x="{left + 10}" y="{top + 16 + 14 * i}" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path: Path, svg: str) -> Path:
    with open(path, "w", newline="\n") as fh:
        fh.write(svg)
    return path
