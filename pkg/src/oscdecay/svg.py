"""Small log-log SVG plot writer (points, lines, axes)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

W, H = 560, 400
ML, MR, MT, MB = 70, 20, 30, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def loglog_svg(points, lines=(), title: str = "", xlabel: str = "lambda", ylabel: str = "estimate") -> str:
    """Render (x, y) ``points`` and ``lines`` on log-log axes.

    Each line is (label, slope, intercept) in natural-log space:
    ln y = slope * ln x + intercept.
    """
    pts = [(x, y) for x, y in points if x > 0 and y > 0 and math.isfinite(y)]
    if not pts:
        raise ValueError("nothing to plot")
    lx = [math.log10(x) for x, _ in pts]
    ly = [math.log10(y) for _, y in pts]
    x0, x1 = min(lx), max(lx)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    ys = list(ly)
    for _, s, b in lines:
        for xv in (x0, x1):
            ys.append((s * xv * math.log(10) + b) / math.log(10))
    y0, y1 = min(ys), max(ys)
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return ML + (v - x0) / (x1 - x0) * (W - ML - MR)

    def py(v):
        return H - MB - (v - y0) / (y1 - y0) * (H - MT - MB)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" stroke="black"/>',
           f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" stroke="black"/>']
    for d in range(math.ceil(x0), math.floor(x1) + 1):
        out.append(f'<line x1="{_fmt(px(d))}" y1="{H - MB}" x2="{_fmt(px(d))}" y2="{H - MB + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px(d))}" y="{H - MB + 18}" font-size="11" text-anchor="middle">1e{d}</text>')
    # y ticks every decade, or at the ends if the range is short
    yt = list(range(math.ceil(y0), math.floor(y1) + 1)) or [y0, y1]
    for d in yt:
        lab = f"1e{d}" if isinstance(d, int) else f"{10 ** d:.3g}"
        out.append(f'<line x1="{ML - 5}" y1="{_fmt(py(d))}" x2="{ML}" y2="{_fmt(py(d))}" stroke="black"/>')
        out.append(f'<text x="{ML - 8}" y="{_fmt(py(d) + 4)}" font-size="11" text-anchor="end">{lab}</text>')
    for i, (label, s, b) in enumerate(lines):
        c = COLORS[(i + 1) % len(COLORS)]
        ya = (s * x0 * math.log(10) + b) / math.log(10)
        yb = (s * x1 * math.log(10) + b) / math.log(10)
        out.append(f'<line x1="{_fmt(px(x0))}" y1="{_fmt(py(ya))}" x2="{_fmt(px(x1))}" y2="{_fmt(py(yb))}" '
                   f'stroke="{c}" stroke-width="1.5"/>')
        out.append(f'<text x="{W - MR - 5}" y="{MT + 14 * (i + 1)}" font-size="11" text-anchor="end" '
                   f'fill="{c}">{escape(label)}</text>')
    for a, b in zip(lx, ly):
        out.append(f'<circle cx="{_fmt(px(a))}" cy="{_fmt(py(b))}" r="3.5" fill="{COLORS[0]}"/>')
    if title:
        out.append(f'<text x="{W / 2}" y="18" font-size="13" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<text x="{(ML + W - MR) / 2}" y="{H - 12}" font-size="12" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(MT + H - MB) / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 16 {(MT + H - MB) / 2})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)
