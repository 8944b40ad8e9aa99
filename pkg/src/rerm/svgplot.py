"""Minimal native SVG emission: line plots and sign-diverging heatmaps.
No external plotting dependency; output is deterministic for fixed inputs."""

from __future__ import annotations

import math

_W, _H = 640, 440
_ML, _MR, _MT, _MB = 70, 20, 40, 50  # margins
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x):
    return f"{x:.6g}"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / n))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if span / (step * mult) <= n + 1:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * span:
        out.append(0.0 if abs(t) < 1e-12 * span else t)
        t += step
    return out


def line_plot(path, series, title="", xlabel="", ylabel="", logx=False):
    """series: iterable of (label, xs, ys)."""
    series = [(lbl, list(map(float, xs)), list(map(float, ys)))
              for lbl, xs, ys in series]
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    all_x = [tx(x) for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys if math.isfinite(y)]
    if not all_x or not all_y:
        raise ValueError("empty plot data")
    x0, x1 = min(all_x), max(all_x)
    y0, y1 = min(all_y), max(all_y)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def px(v):
        return _ML + (tx(v) - x0) / (x1 - x0) * pw

    def py(v):
        return _MT + (y1 - v) / (y1 - y0) * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
             f'font-family="sans-serif" font-size="12">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>',
             f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>']
    # axes box
    parts.append(f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" '
                 'fill="none" stroke="black"/>')
    for t in _ticks(x0, x1):
        sx = _ML + (t - x0) / (x1 - x0) * pw
        lab = _fmt(10.0 ** t) if logx else _fmt(t)
        parts.append(f'<line x1="{sx:.1f}" y1="{_MT + ph}" x2="{sx:.1f}" '
                     f'y2="{_MT + ph + 5}" stroke="black"/>')
        parts.append(f'<text x="{sx:.1f}" y="{_MT + ph + 18}" '
                     f'text-anchor="middle">{lab}</text>')
    for t in _ticks(y0, y1):
        sy = py(t)
        parts.append(f'<line x1="{_ML - 5}" y1="{sy:.1f}" x2="{_ML}" '
                     f'y2="{sy:.1f}" stroke="black"/>')
        parts.append(f'<text x="{_ML - 8}" y="{sy + 4:.1f}" '
                     f'text-anchor="end">{_fmt(t)}</text>')
    parts.append(f'<text x="{_ML + pw / 2}" y="{_H - 10}" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="18" y="{_MT + ph / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 18 {_MT + ph / 2})">{ylabel}</text>')
    for k, (label, xs, ys) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys)
                       if math.isfinite(y))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     'stroke-width="1.5"/>')
        ly = _MT + 16 + 16 * k
        parts.append(f'<line x1="{_ML + pw - 120}" y1="{ly}" x2="{_ML + pw - 100}" '
                     f'y2="{ly}" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{_ML + pw - 95}" y="{ly + 4}">{label}</text>')
    parts.append("</svg>\n")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def heatmap(path, matrix, x_values, y_values, title="", xlabel="", ylabel=""):
    """Diverging blue/white/red heatmap centered at zero; NaN cells grey.
    matrix[i][j] maps to row y_values[i], column x_values[j]."""
    rows = [list(map(float, r)) for r in matrix]
    ny, nx = len(rows), len(rows[0])
    finite = [v for r in rows for v in r if math.isfinite(v)]
    vmax = max((abs(v) for v in finite), default=1.0) or 1.0
    pw, ph = _W - _ML - _MR, _H - _MT - _MB
    cw, ch = pw / nx, ph / ny
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
             f'font-family="sans-serif" font-size="12">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>',
             f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>']
    for i in range(ny):
        for j in range(nx):
            v = rows[i][j]
            if not math.isfinite(v):
                fill = "#bbbbbb"
            else:
                t = max(-1.0, min(1.0, v / vmax))
                if t >= 0:  # white -> red
                    g = int(round(255 * (1 - t)))
                    fill = f"rgb(255,{g},{g})"
                else:       # white -> blue
                    g = int(round(255 * (1 + t)))
                    fill = f"rgb({g},{g},255)"
            x = _ML + j * cw
            y = _MT + ph - (i + 1) * ch  # row 0 at the bottom
            parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw:.2f}" '
                         f'height="{ch:.2f}" fill="{fill}" stroke="#888" '
                         'stroke-width="0.5"/>')
    for j, xv in enumerate(x_values):
        parts.append(f'<text x="{_ML + (j + 0.5) * cw:.1f}" y="{_MT + ph + 16}" '
                     f'text-anchor="middle">{_fmt(float(xv))}</text>')
    for i, yv in enumerate(y_values):
        parts.append(f'<text x="{_ML - 6}" y="{_MT + ph - (i + 0.5) * ch + 4:.1f}" '
                     f'text-anchor="end">{_fmt(float(yv))}</text>')
    parts.append(f'<text x="{_ML + pw / 2}" y="{_H - 10}" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="18" y="{_MT + ph / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 18 {_MT + ph / 2})">{ylabel}</text>')
    parts.append("</svg>\n")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
