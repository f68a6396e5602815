"""Deterministic SVG drawings of windows and prototile solutions (d = 1 as bars, d = 2 as boxes)."""
from __future__ import annotations

import colorsys
from pathlib import Path

import numpy as np

from .errors import EmptyRegion, UnsupportedDimension
from .geometry import Region
from .gifs import PrototileSolution
from .tiling import TilingWindow

BAR = 20.0  # bar height for 1D drawings, in user units


def palette(n: int) -> list[str]:
    out = []
    for i in range(n):
        r, g, b = colorsys.hsv_to_rgb((i * 0.618034) % 1.0, 0.55, 0.92)
        out.append(f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}")
    return out


def _rects(boxes: np.ndarray, color: str, y0: float = 0.0) -> list[str]:
    out = []
    d = boxes.shape[2]
    for b in boxes:
        if d == 1:
            x, w, y, h = b[0, 0], b[1, 0] - b[0, 0], y0, BAR
        else:
            # flip y so the drawing has y pointing up
            x, w, y, h = b[0, 0], b[1, 0] - b[0, 0], -b[1, 1], b[1, 1] - b[0, 1]
        out.append(f'<rect x="{x:.6g}" y="{y:.6g}" width="{w:.6g}" height="{h:.6g}" fill="{color}" '
                   f'stroke="{color}" stroke-width="0"/>')
    return out


def _outline(boxes: np.ndarray, y0: float = 0.0) -> list[str]:
    """Tile boundary drawn as the box outlines with a thin dark stroke."""
    out = []
    for b in boxes:
        if boxes.shape[2] == 1:
            x, w, y, h = b[0, 0], b[1, 0] - b[0, 0], y0, BAR
        else:
            x, w, y, h = b[0, 0], b[1, 0] - b[0, 0], -b[1, 1], b[1, 1] - b[0, 1]
        out.append(f'<rect x="{x:.6g}" y="{y:.6g}" width="{w:.6g}" height="{h:.6g}" fill="none" '
                   f'stroke="#222" stroke-width="{0.01 * max(w, h):.3g}"/>')
    return out


def _document(body: list[str], lo: np.ndarray, hi: np.ndarray, pad: float) -> str:
    w, h = hi - lo
    vb = f"{lo[0] - pad:.6g} {lo[1] - pad:.6g} {w + 2 * pad:.6g} {h + 2 * pad:.6g}"
    scale = 800.0 / max(w + 2 * pad, 1e-9)
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{vb}" '
            f'width="{800:d}" height="{max(1, int(round((h + 2 * pad) * scale)))}">')
    return "\n".join([head, *body, "</svg>"]) + "\n"


def window_svg(w: TilingWindow, outline: bool = True) -> str:
    d = w.dimension
    if d > 2:
        raise UnsupportedDimension("vector drawings need d <= 2")
    if len(w) == 0:
        raise EmptyRegion("window has no tiles")
    colors = palette(w.m)
    p = w.patch
    body = []
    for t in range(len(p)):
        boxes = w.prototiles[p.labels[t]].boxes + p.translations[t]
        body += _rects(boxes, colors[p.labels[t]])
        if outline:
            body += _outline(boxes)
    lo, hi, _ = p.flat_boxes
    if d == 1:
        lo2, hi2 = np.array([lo.min(), 0.0]), np.array([hi.max(), BAR])
    else:
        lo2, hi2 = np.array([lo[:, 0].min(), -hi[:, 1].max()]), np.array([hi[:, 0].max(), -lo[:, 1].min()])
    return _document(body, lo2, hi2, 0.02 * float(np.max(hi2 - lo2)))


def regions_svg(regions: list[Region], gap: float | None = None) -> str:
    """Each region in its own column, left to right, in label order."""
    if not regions or any(r.empty for r in regions):
        raise EmptyRegion("nothing to draw")
    d = regions[0].dimension
    if d > 2:
        raise UnsupportedDimension("vector drawings need d <= 2")
    colors = palette(len(regions))
    bounds = [r.bounds() for r in regions]
    width = max(float(np.max(hi - lo)) for lo, hi in bounds)
    gap = 0.25 * width if gap is None else gap
    body, x = [], 0.0
    ys = []
    for r, (lo, hi), c in zip(regions, bounds, colors):
        shift = np.zeros(d)
        shift[0] = x - lo[0]
        boxes = r.boxes + shift
        y0 = 0.0
        body += _rects(boxes, c, y0) + _outline(boxes, y0)
        x += float(hi[0] - lo[0]) + gap
        ys.append((lo, hi))
    if d == 1:
        lo2, hi2 = np.array([0.0, 0.0]), np.array([x - gap, BAR])
    else:
        lo2 = np.array([0.0, -max(float(hi[1]) for _, hi in ys)])
        hi2 = np.array([x - gap, -min(float(lo[1]) for lo, _ in ys)])
    return _document(body, lo2, hi2, 0.02 * float(np.max(hi2 - lo2)))


def render_svg(obj, path) -> Path:
    """Write a window, a prototile solution or a list of regions as SVG."""
    if isinstance(obj, TilingWindow):
        text = window_svg(obj)
    elif isinstance(obj, PrototileSolution):
        text = regions_svg(obj.F)
    elif isinstance(obj, Region):
        text = regions_svg([obj])
    else:
        text = regions_svg(list(obj))
    path = Path(path)
    path.write_text(text)
    return path
