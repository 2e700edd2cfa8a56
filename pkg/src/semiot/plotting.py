"""Dependency-free figure output: SVG trajectory panels and PGM montages."""

import math
from xml.sax.saxutils import escape

import numpy as np

PANEL_W, PANEL_H = 360, 360
MARGIN = 48


def _nice_ticks(lo, hi, target=5):
    span = hi - lo
    raw = span / target
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * span:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _bounds(panels):
    pts = [np.asarray(p["points"], float).reshape(-1, 2) for p in panels]
    pts += [np.asarray([m[0] for m in p.get("markers", [])], float).reshape(-1, 2)
            for p in panels]
    allp = np.concatenate([p for p in pts if p.size])
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = max(float((hi - lo).max()), 1e-3)
    center = (lo + hi) / 2
    half = 0.55 * span
    return center - half, center + half


def trajectory_svg(panels, title=None):
    """Render side-by-side panels of 2-D trajectories as an SVG string.

    Each panel is a dict with ``title``, ``points`` (T x 2) and optional
    ``markers``: ``(xy, label, color)`` tuples drawn as labelled dots.
    All panels share the same axis limits.
    """
    lo, hi = _bounds(panels)
    ticks_x = _nice_ticks(lo[0], hi[0])
    ticks_y = _nice_ticks(lo[1], hi[1])
    top = 28 if title else 0
    width = len(panels) * (PANEL_W + MARGIN) + MARGIN
    height = PANEL_H + 2 * MARGIN + top
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}" '
           'font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    for pi, panel in enumerate(panels):
        x0 = MARGIN + pi * (PANEL_W + MARGIN)
        y0 = MARGIN + top

        def sx(v):
            return x0 + (v - lo[0]) / (hi[0] - lo[0]) * PANEL_W

        def sy(v):
            return y0 + PANEL_H - (v - lo[1]) / (hi[1] - lo[1]) * PANEL_H

        out.append(f'<rect x="{x0}" y="{y0}" width="{PANEL_W}" '
                   f'height="{PANEL_H}" fill="none" stroke="black"/>')
        out.append(f'<text x="{x0 + PANEL_W / 2:.1f}" y="{y0 - 8}" '
                   f'text-anchor="middle" font-size="12">'
                   f'{escape(panel["title"])}</text>')
        for t in ticks_x:
            X = sx(t)
            out.append(f'<line x1="{X:.2f}" y1="{y0 + PANEL_H}" x2="{X:.2f}" '
                       f'y2="{y0 + PANEL_H + 4}" stroke="black"/>')
            out.append(f'<text x="{X:.2f}" y="{y0 + PANEL_H + 16}" '
                       f'text-anchor="middle">{t:g}</text>')
        for t in ticks_y:
            Y = sy(t)
            out.append(f'<line x1="{x0 - 4}" y1="{Y:.2f}" x2="{x0}" '
                       f'y2="{Y:.2f}" stroke="black"/>')
            out.append(f'<text x="{x0 - 6}" y="{Y + 4:.2f}" '
                       f'text-anchor="end">{t:g}</text>')
        pts = np.asarray(panel["points"], float).reshape(-1, 2)
        if len(pts):
            coords = " ".join(f"{sx(p[0]):.2f},{sy(p[1]):.2f}" for p in pts)
            out.append(f'<polyline points="{coords}" fill="none" '
                       'stroke="#1f77b4" stroke-width="1.2" '
                       'stroke-linejoin="round"/>')
            out.append(f'<circle cx="{sx(pts[0, 0]):.2f}" cy="{sy(pts[0, 1]):.2f}" '
                       'r="3" fill="#1f77b4"/>')
        for xy, label, color in panel.get("markers", []):
            X, Y = sx(xy[0]), sy(xy[1])
            out.append(f'<circle cx="{X:.2f}" cy="{Y:.2f}" r="4.5" '
                       f'fill="{color}" stroke="black" stroke-width="0.6"/>')
            out.append(f'<text x="{X + 7:.2f}" y="{Y - 6:.2f}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def montage(images, cols=None, pad_value=0.0):
    """Tile ``(N, h, w)`` images into one grid, row-major, blank-padded."""
    images = np.asarray(images, dtype=np.float64)
    n, h, w = images.shape
    if cols is None:
        cols = max(1, math.ceil(math.sqrt(n)))
    rows = max(1, math.ceil(n / cols))
    grid = np.full((rows * h, cols * w), pad_value)
    for i in range(n):
        r, c = divmod(i, cols)
        grid[r * h:(r + 1) * h, c * w:(c + 1) * w] = images[i]
    return grid


def write_pgm(path, image):
    """Write a 2-D array with values in [0, 1] as binary (P5) 8-bit PGM."""
    image = np.asarray(image, dtype=np.float64)
    data = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_pgm(path):
    """Read a P5 PGM written by :func:`write_pgm`; returns ``(pixels, maxval)``."""
    with open(path, "rb") as f:
        raw = f.read()
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while end < len(raw) and not raw[end:end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h, maxval = (int(v) for v in fields[1:])
    # exactly one whitespace byte separates the header from the pixels
    pixels = np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=pos + 1)
    return pixels.reshape(h, w), maxval
