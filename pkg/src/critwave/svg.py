"""Minimal deterministic SVG line charts (polylines on linear or log axes)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 640, 400
_ML, _MR, _MT, _MB = 70, 20, 40, 50


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def line_chart(series: dict, title: str = "", xlabel: str = "", ylabel: str = "", logy: bool = False) -> str:
    """SVG text for ``series``: name -> (x, y). Non-finite points are dropped."""
    clean = {}
    for name, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logy:
            ok &= y > 0
        if np.any(ok):
            clean[name] = (x[ok], np.log10(y[ok]) if logy else y[ok])
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{_W / 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
    ]
    if clean:
        xs = np.concatenate([v[0] for v in clean.values()])
        ys = np.concatenate([v[1] for v in clean.values()])
        x0, x1 = float(xs.min()), float(xs.max())
        y0, y1 = float(ys.min()), float(ys.max())
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            pad = 0.5 if y0 == 0 else 0.05 * abs(y0)
            y0, y1 = y0 - pad, y1 + pad
        pw, ph = _W - _ML - _MR, _H - _MT - _MB

        def px(v):
            return _ML + (v - x0) / (x1 - x0) * pw

        def py(v):
            return _MT + (1.0 - (v - y0) / (y1 - y0)) * ph

        parts.append(f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
        for k in range(5):
            fx = x0 + k * (x1 - x0) / 4
            fy = y0 + k * (y1 - y0) / 4
            ylab = _fmt(10**fy) if logy else _fmt(fy)
            parts.append(
                f'<text x="{px(fx):.2f}" y="{_H - _MB + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{_fmt(fx)}</text>'
            )
            parts.append(
                f'<text x="{_ML - 6}" y="{py(fy) + 3:.2f}" text-anchor="end" font-family="sans-serif" font-size="10">{ylab}</text>'
            )
        for i, (name, (x, y)) in enumerate(clean.items()):
            color = _COLORS[i % len(_COLORS)]
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
            parts.append(
                f'<text x="{_ML + 8}" y="{_MT + 14 + 14 * i}" font-family="sans-serif" font-size="11" fill="{color}">{escape(name)}</text>'
            )
    parts.append(
        f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>'
    )
    parts.append(
        f'<text x="16" y="{_H / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {_H / 2})">{escape(ylabel + (" (log10 axis)" if logy else ""))}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_chart(path, series: dict, **kw) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(line_chart(series, **kw))

