"""Static SVG line chart of one diagnostic column on a logarithmic value axis."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = {"left": 70, "right": 20, "top": 30, "bottom": 50}


def _polyline(xs, ys, color, dash=""):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{extra} points="{pts}"/>'


def line_chart_svg(t, y, fit=None, label="value"):
    """Value on a log10 axis against time (log-log when the fit is algebraic)."""
    t, y = np.asarray(t, float), np.asarray(y, float)
    loglog = fit is not None and fit.law == "algebraic"
    keep = (y > 0) & ((t > 0) if loglog else np.isfinite(t))
    t, y = t[keep], y[keep]
    if len(t) < 2:
        raise ValueError("need at least two positive points to draw a chart")
    xs = np.log10(t) if loglog else t
    ly = np.log10(y)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(math.floor(ly.min())), float(math.ceil(ly.max()))
    if y1 == y0:
        y1 += 1.0
    if x1 == x0:
        x1 += 1.0
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN["top"] + (y1 - v) / (y1 - y0) * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
             f'font-family="sans-serif" font-size="12">',
             f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    left, bottom = MARGIN["left"], HEIGHT - MARGIN["bottom"]
    parts.append(f'<line x1="{left}" y1="{MARGIN["top"]}" x2="{left}" y2="{bottom}" stroke="black"/>')
    parts.append(f'<line x1="{left}" y1="{bottom}" x2="{WIDTH - MARGIN["right"]}" y2="{bottom}" stroke="black"/>')
    for k in range(int(y0), int(y1) + 1):
        yy = py(k)
        parts.append(f'<line x1="{left - 4}" y1="{yy:.2f}" x2="{left}" y2="{yy:.2f}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{yy + 4:.2f}" text-anchor="end">1e{k}</text>')
    for v in np.linspace(x0, x1, 5):
        xx = px(v)
        text = f"1e{v:.2g}" if loglog else f"{v:.4g}"
        parts.append(f'<line x1="{xx:.2f}" y1="{bottom}" x2="{xx:.2f}" y2="{bottom + 4}" stroke="black"/>')
        parts.append(f'<text x="{xx:.2f}" y="{bottom + 18}" text-anchor="middle">{text}</text>')
    parts.append(f'<text x="{left + pw / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle">'
                 f'{"t (log scale)" if loglog else "t"}</text>')
    parts.append(f'<text x="16" y="{MARGIN["top"] + ph / 2:.2f}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.2f})">{escape(label)}</text>')
    parts.append(_polyline(px(xs), py(ly), "#1f5fa8"))
    if fit is not None:
        env = np.log10(fit.envelope(t))
        inside = (env >= y0) & (env <= y1)
        if inside.sum() >= 2:
            parts.append(_polyline(px(xs[inside]), py(env[inside]), "#c0392b", dash="6,4"))
        parts.append(f'<text x="{WIDTH - MARGIN["right"]}" y="{MARGIN["top"] - 10}" text-anchor="end" '
                     f'fill="#c0392b">{escape(fit.summary())}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
