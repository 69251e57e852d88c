"""Minimal deterministic SVG plots (line, bar, normal QQ)."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

W, H, PAD = 480, 320, 48
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


@dataclass(frozen=True)
class Series:
    label: str
    x: tuple
    y: tuple

    @classmethod
    def of(cls, label: str, x, y) -> "Series":
        return cls(label, tuple(float(v) for v in x), tuple(float(v) for v in y))


def _f(v: float) -> str:
    return f"{v:.2f}"


def _range(vals) -> tuple[float, float]:
    lo, hi = float(min(vals)), float(max(vals))
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def qq_points(values, scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Standard normal quantiles and the sorted sample divided by ``scale``."""
    v = np.sort(np.asarray(values, dtype=float)) / scale
    p = (np.arange(1, v.size + 1) - 0.5) / v.size
    return stats.norm.ppf(p), v


def qq_slope(values, scale: float = 1.0) -> float:
    """Least-squares slope of the QQ cloud over its central 98%."""
    q, v = qq_points(values, scale)
    keep = slice(int(0.01 * v.size), max(int(0.99 * v.size), 1))
    slope, _ = np.polyfit(q[keep], v[keep], 1) if v.size > 1 else (float("nan"), 0.0)
    return float(slope)


def render(series: list[Series], kind: str, title: str = "", scale: float = 1.0) -> str:
    if not series or any(len(s.y) == 0 for s in series):
        raise ValueError("nonempty series required")
    if kind not in ("line", "bar", "qq"):
        raise ValueError("kind must be line, bar or qq")
    if kind == "qq":
        pts = [qq_points(s.y, scale) for s in series]
        series = [Series.of(s.label, q, v) for s, (q, v) in zip(series, pts)]
    xs = [v for s in series for v in s.x]
    ys = [v for s in series for v in s.y]
    if kind == "bar":
        ys = ys + [0.0]
    x0, x1 = _range(xs)
    y0, y1 = _range(ys)

    def px(v):
        return PAD + (v - x0) / (x1 - x0) * (W - 2 * PAD)

    def py(v):
        return H - PAD - (v - y0) / (y1 - y0) * (H - 2 * PAD)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<text x="{PAD}" y="{H - PAD + 16}" font-size="10">{_f(x0)}</text>',
        f'<text x="{W - PAD}" y="{H - PAD + 16}" font-size="10" text-anchor="end">{_f(x1)}</text>',
        f'<text x="{PAD - 4}" y="{H - PAD}" font-size="10" text-anchor="end">{_f(y0)}</text>',
        f'<text x="{PAD - 4}" y="{PAD + 8}" font-size="10" text-anchor="end">{_f(y1)}</text>',
    ]
    if title:
        out.append(f'<text x="{W / 2:.1f}" y="20" font-size="13" text-anchor="middle">{_esc(title)}</text>')
    if kind == "qq":
        lo, hi = max(x0, y0), min(x1, y1)
        out.append(f'<line class="diagonal" x1="{_f(px(lo))}" y1="{_f(py(lo))}" x2="{_f(px(hi))}" '
                   f'y2="{_f(py(hi))}" stroke="gray" stroke-dasharray="4 3"/>')
    for i, s in enumerate(series):
        col = COLORS[i % len(COLORS)]
        if kind == "bar":
            k = len(series)
            step = (W - 2 * PAD) / max(len(s.x), 1)
            bw = 0.8 * step / k
            for xv, yv in zip(s.x, s.y):
                left = px(xv) - 0.4 * step + i * bw
                top, base = py(max(yv, 0.0)), py(min(yv, 0.0))
                out.append(f'<rect class="bar" x="{_f(left)}" y="{_f(top)}" width="{_f(bw)}" '
                           f'height="{_f(base - top)}" fill="{col}"/>')
        else:
            if kind == "line" and len(s.x) > 1:
                pts = " ".join(f"{_f(px(a))},{_f(py(b))}" for a, b in zip(s.x, s.y))
                out.append(f'<polyline points="{pts}" fill="none" stroke="{col}"/>')
            r = 3 if kind == "line" else 1.5
            for a, b in zip(s.x, s.y):
                out.append(f'<circle class="marker" cx="{_f(px(a))}" cy="{_f(py(b))}" r="{r}" fill="{col}"/>')
        out.append(f'<text x="{W - PAD}" y="{PAD + 14 * i}" font-size="11" text-anchor="end" '
                   f'fill="{col}">{_esc(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_plot(series: list[Series], kind: str, path, title: str = "", scale: float = 1.0) -> Path:
    """Write a self-contained SVG; identical input gives identical bytes."""
    path = Path(path)
    path.write_bytes(render(series, kind, title, scale).encode("utf-8"))
    return path
