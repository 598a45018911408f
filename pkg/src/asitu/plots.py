"""Minimal hand-rolled SVG plots; plain text so runs can be diffed."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

W, H = 480, 360
PAD = 48
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _scale(x, lo, hi, a, b):
    if hi - lo <= 0:
        return np.full_like(np.asarray(x, float), (a + b) / 2.0)
    return a + (np.asarray(x, float) - lo) / (hi - lo) * (b - a)


def _frame(title: str, xlabel: str, ylabel: str, xr, yr) -> list[str]:
    x0, x1 = PAD, W - PAD / 2
    y0, y1 = H - PAD, PAD / 2
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" fill="none" stroke="black"/>',
        f'<text x="{W / 2}" y="14" font-size="12" text-anchor="middle">{escape(title)}</text>',
        f'<text x="{W / 2}" y="{H - 8}" font-size="11" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="12" y="{H / 2}" font-size="11" text-anchor="middle" '
        f'transform="rotate(-90 12 {H / 2})">{escape(ylabel)}</text>',
        f'<text x="{x0}" y="{y0 + 14}" font-size="9" text-anchor="middle">{xr[0]:.3g}</text>',
        f'<text x="{x1}" y="{y0 + 14}" font-size="9" text-anchor="middle">{xr[1]:.3g}</text>',
        f'<text x="{x0 - 4}" y="{y0}" font-size="9" text-anchor="end">{yr[0]:.3g}</text>',
        f'<text x="{x0 - 4}" y="{y1 + 8}" font-size="9" text-anchor="end">{yr[1]:.3g}</text>',
    ]
    return parts


def _xy(x, y, xr, yr):
    px = _scale(x, xr[0], xr[1], PAD, W - PAD / 2)
    py = _scale(y, yr[0], yr[1], H - PAD, PAD / 2)
    return px, py


def _polyline(px, py, color, width=1.5) -> str:
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"/>'


def va_plot(V, A, curve_v, curve_mean, curve_var=None, title="affective curve") -> str:
    xr, yr = (-1.0, 1.0), (0.0, 1.0)
    parts = _frame(title, "valence", "arousal", xr, yr)
    px, py = _xy(V, A, xr, yr)
    step = max(1, len(px) // 400)
    for a, b in zip(px[::step], py[::step]):
        parts.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="1.5" fill="{COLORS[0]}" fill-opacity="0.5"/>')
    if curve_var is not None:
        sd = np.sqrt(np.maximum(np.asarray(curve_var, float), 0.0))
        for sign in (-1, 1):
            qx, qy = _xy(curve_v, np.clip(np.asarray(curve_mean) + 2 * sign * sd, -0.5, 1.5), xr, yr)
            parts.append(_polyline(qx, np.clip(qy, 0, H), COLORS[1], 0.6))
    cx, cy = _xy(curve_v, curve_mean, xr, yr)
    parts.append(_polyline(cx, np.clip(cy, 0, H), COLORS[1], 2.0))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def traces_plot(t, series: dict, title="components") -> str:
    t = np.asarray(t, float)
    vals = np.concatenate([np.asarray(v, float) for v in series.values()])
    yr = (float(np.min(vals)), float(np.max(vals)))
    if yr[1] - yr[0] <= 0:
        yr = (yr[0] - 1.0, yr[1] + 1.0)
    xr = (float(t[0]), float(t[-1]))
    parts = _frame(title, "time (s)", "value", xr, yr)
    for k, (name, y) in enumerate(series.items()):
        px, py = _xy(t, y, xr, yr)
        color = COLORS[k % len(COLORS)]
        parts.append(_polyline(px, py, color))
        parts.append(f'<text x="{PAD + 6}" y="{PAD / 2 + 14 + 12 * k}" font-size="10" fill="{color}">'
                     f'{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
