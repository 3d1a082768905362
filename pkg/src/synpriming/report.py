"""Deterministic SVG figures: AE heatmap and structure dendrogram.

Output depends only on the inputs; numbers are written with fixed
precision so reruns are byte-identical.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .metrics import AdaptationMatrix, Cluster

SCHEMA = "<desc>synpriming-report v1</desc>"
CELL = 56
PAD = 90


def _f(x: float) -> str:
    return f"{x:.2f}"


def _color(v: float, lo: float, hi: float) -> str:
    """Diverging blue-white-red, white at zero."""
    if not np.isfinite(v):
        return "#cccccc"
    span = max(abs(lo), abs(hi))
    if span == 0:
        return "#f7f7f7"
    t = max(-1.0, min(1.0, v / span))
    if t >= 0:
        r, g, b = 255, round(255 * (1 - 0.75 * t)), round(255 * (1 - 0.8 * t))
    else:
        r, g, b = round(255 * (1 + 0.8 * t)), round(255 * (1 + 0.6 * t)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(matrix: AdaptationMatrix | np.ndarray, labels: Sequence[str] | None = None,
                title: str = "Adaptation effect (bits)") -> str:
    m = matrix.mean if isinstance(matrix, AdaptationMatrix) else np.asarray(matrix, dtype=np.float64)
    labels = list(labels or getattr(matrix, "labels", None) or [str(i) for i in range(len(m))])
    n = len(m)
    finite = m[np.isfinite(m)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 0.0)
    w = PAD + n * CELL + 130
    h = PAD + n * CELL + 40
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">',
           SCHEMA,
           f'<text x="{PAD}" y="18" font-size="13">{escape(title)}</text>',
           f'<text x="{PAD + n * CELL / 2:.1f}" y="36" text-anchor="middle">test structure</text>',
           f'<text x="14" y="{PAD + n * CELL / 2:.1f}" transform="rotate(-90 14 {PAD + n * CELL / 2:.1f})" '
           f'text-anchor="middle">adaptation structure</text>']
    for j, lab in enumerate(labels):
        out.append(f'<text x="{PAD + j * CELL + CELL / 2:.1f}" y="{PAD - 8}" text-anchor="middle">'
                   f'{escape(lab)}</text>')
    for i, lab in enumerate(labels):
        y = PAD + i * CELL
        out.append(f'<text x="{PAD - 6}" y="{y + CELL / 2 + 4:.1f}" text-anchor="end">{escape(lab)}</text>')
        for j in range(n):
            v = m[i, j]
            x = PAD + j * CELL
            out.append(f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{_color(v, lo, hi)}" '
                       f'stroke="#ffffff"/>')
            txt = "NA" if not np.isfinite(v) else _f(v)
            out.append(f'<text x="{x + CELL / 2:.1f}" y="{y + CELL / 2 + 4:.1f}" text-anchor="middle">'
                       f'{txt}</text>')
    # legend: a gradient over the data range, or one swatch when it is a single value
    lx, ly, lh = PAD + n * CELL + 30, PAD, n * CELL
    if hi == lo:
        out.append(f'<rect x="{lx}" y="{ly}" width="16" height="{lh}" fill="{_color(lo, lo, hi)}" '
                   f'stroke="#999999"/>')
        out.append(f'<text x="{lx + 22}" y="{ly + lh / 2 + 4:.1f}">{_f(lo)}</text>')
    else:
        steps = 20
        for k in range(steps):
            v = hi - (hi - lo) * (k + 0.5) / steps
            out.append(f'<rect x="{lx}" y="{ly + k * lh / steps:.2f}" width="16" '
                       f'height="{lh / steps:.2f}" fill="{_color(v, lo, hi)}"/>')
        out.append(f'<text x="{lx + 22}" y="{ly + 10}">{_f(hi)}</text>')
        out.append(f'<text x="{lx + 22}" y="{ly + lh}">{_f(lo)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _layout(node: Cluster, order: list[str]):
    """(x, height) of ``node``; leaves are spaced by their order."""
    if node.is_leaf:
        return order.index(node.members[0]), 0.0
    xs = [_layout(c, order)[0] for c in node.children]
    return sum(xs) / len(xs), node.height


def _leaves(node: Cluster) -> list[str]:
    return list(node.members) if node.is_leaf else [x for c in node.children for x in _leaves(c)]


def dendrogram_svg(root: Cluster, title: str = "Structure similarity") -> str:
    order = _leaves(root)
    step = 70
    w = 60 + step * len(order)
    h = 300
    top, base = 40, h - 50
    scale = (base - top) / root.height if root.height > 0 else 0.0

    def y(height):
        return base - height * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">',
           SCHEMA, f'<text x="10" y="18" font-size="13">{escape(title)}</text>']

    def draw(node):
        x, hgt = _layout(node, order)
        px = 40 + step * x
        if node.is_leaf:
            out.append(f'<text x="{px:.1f}" y="{base + 16}" text-anchor="middle">'
                       f'{escape(node.members[0])}</text>')
            return
        kids = [(_layout(c, order), c) for c in node.children]
        xs = [40 + step * k[0][0] for k in kids]
        out.append(f'<line x1="{min(xs):.1f}" y1="{y(hgt):.2f}" x2="{max(xs):.1f}" y2="{y(hgt):.2f}" '
                   f'stroke="#333333"/>')
        for (kx, kh), c in kids:
            cx = 40 + step * kx
            out.append(f'<line x1="{cx:.1f}" y1="{y(hgt):.2f}" x2="{cx:.1f}" y2="{y(kh):.2f}" '
                       f'stroke="#333333"/>')
            draw(c)

    draw(root)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(svg: str, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(svg, encoding="utf-8")
