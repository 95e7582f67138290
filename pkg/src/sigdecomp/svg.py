"""Static SVG emission: line plots and grid heat maps.

Hand-rolled on purpose: no plotting dependency, and the output is a
deterministic function of the inputs (fixed float formatting, fixed
palette, no timestamps), so identical calls give byte-identical files.
Series gaps (NaN) are rendered as breaks, never interpolated across.
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import DataError

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)

_RAMP = ((68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37))


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.6g}"


def _nice_step(span: float) -> float:
    if span <= 0:
        return 1.0
    raw = span / 5.0
    mag = 10.0 ** math.floor(math.log10(raw))
    for m in (1.0, 2.0, 5.0, 10.0):
        if raw <= m * mag:
            return m * mag
    return 10.0 * mag


def _ticks(lo: float, hi: float):
    step = _nice_step(hi - lo)
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-9 * step:
        out.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return out


def line_plot(
    series,
    path=None,
    title: str | None = None,
    ylabel: str | None = None,
    xlabel: str | None = None,
    log_y: bool = False,
    width: int = 900,
    height: int = 300,
) -> str:
    """Render ``series`` = [(label, values), ...] as one SVG line chart.

    All series share an index x axis.  With ``log_y`` the values are
    plotted on a log10 scale (nonpositive entries become gaps) and the
    ticks fall on decades.
    """
    if not series:
        raise DataError("line_plot needs at least one series")
    prepared = []
    for label, vals in series:
        vals = np.asarray(vals, dtype=float).ravel()
        if log_y:
            vals = np.where(vals > 0, vals, np.nan)
            vals = np.log10(vals, out=np.full_like(vals, np.nan), where=vals > 0)
        prepared.append((str(label), vals))
    n = max(v.size for _, v in prepared)
    finite = np.concatenate([v[np.isfinite(v)] for _, v in prepared]) if n else np.array([])
    if finite.size == 0:
        lo, hi = 0.0, 1.0
    else:
        lo, hi = float(finite.min()), float(finite.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        else:
            pad = 0.05 * (hi - lo)
            lo, hi = lo - pad, hi + pad
    left, right, top, bottom = 64, 16, 28, 36
    pw, ph = width - left - right, height - top - bottom

    def xm(i):
        return left + (pw * i / max(n - 1, 1))

    def ym(v):
        return top + ph * (1.0 - (v - lo) / (hi - lo))

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">'
    )
    out.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    if title:
        out.append(f'<text x="{left}" y="16" font-size="13">{_esc(title)}</text>')
    if log_y:
        yticks = [t for t in range(math.floor(lo), math.ceil(hi) + 1)]
        ylabels = [f"1e{t}" for t in yticks]
    else:
        yticks = _ticks(lo, hi)
        ylabels = [_tick_label(t) for t in yticks]
    for t, lab in zip(yticks, ylabels):
        y = _fmt(ym(t))
        out.append(
            f'<line x1="{left}" y1="{y}" x2="{left + pw}" y2="{y}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(f'<text x="{left - 6}" y="{y}" text-anchor="end" dy="4">{lab}</text>')
    for t in _ticks(0, max(n - 1, 1)):
        if t != int(t):
            continue
        x = _fmt(xm(t))
        out.append(
            f'<line x1="{x}" y1="{top + ph}" x2="{x}" y2="{top + ph + 4}" '
            f'stroke="#444444" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{x}" y="{top + ph + 16}" text-anchor="middle">{int(t)}</text>'
        )
    out.append(
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" '
        f'fill="none" stroke="#444444" stroke-width="1"/>'
    )
    if ylabel:
        out.append(
            f'<text x="14" y="{top + ph / 2:.2f}" '
            f'transform="rotate(-90 14 {top + ph / 2:.2f})" '
            f'text-anchor="middle">{_esc(ylabel)}</text>'
        )
    if xlabel:
        out.append(
            f'<text x="{left + pw / 2:.2f}" y="{height - 6}" text-anchor="middle">'
            f"{_esc(xlabel)}</text>"
        )
    for si, (label, vals) in enumerate(prepared):
        color = PALETTE[si % len(PALETTE)]
        runs = _finite_runs(vals)
        for start, stop in runs:
            if stop - start == 1:
                out.append(
                    f'<circle cx="{_fmt(xm(start))}" cy="{_fmt(ym(vals[start]))}" '
                    f'r="1.5" fill="{color}"/>'
                )
            else:
                pts = " ".join(
                    f"{_fmt(xm(i))},{_fmt(ym(vals[i]))}" for i in range(start, stop)
                )
                out.append(
                    f'<polyline points="{pts}" fill="none" stroke="{color}" '
                    f'stroke-width="1.2"/>'
                )
        lx = left + pw - 150
        ly = top + 14 + 14 * si
        out.append(f'<rect x="{lx}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{lx + 14}" y="{ly}">{_esc(label)}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def _finite_runs(vals):
    runs = []
    start = None
    for i, v in enumerate(vals):
        if np.isfinite(v):
            if start is None:
                start = i
        elif start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(vals)))
    return runs


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _ramp_color(u: float) -> str:
    u = min(max(u, 0.0), 1.0)
    pos = u * (len(_RAMP) - 1)
    i = min(int(pos), len(_RAMP) - 2)
    f = pos - i
    r, g, b = (
        round(_RAMP[i][c] + f * (_RAMP[i + 1][c] - _RAMP[i][c])) for c in range(3)
    )
    return f"#{r:02x}{g:02x}{b:02x}"


def heat_map(
    values,
    x_labels,
    y_labels,
    path=None,
    title: str | None = None,
    xlabel: str | None = None,
    ylabel: str | None = None,
    mark_min: bool = True,
    cell: int = 18,
) -> str:
    """Render a matrix as a colored-cell heat map.

    ``values[i, j]`` maps to row i (y axis, top to bottom) and column j
    (x axis).  Non-finite cells are drawn grey; the minimum cell gets an
    outline when ``mark_min``.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise DataError(f"heat map needs a 2-D matrix, got shape {values.shape}")
    ny, nx = values.shape
    if len(x_labels) != nx or len(y_labels) != ny:
        raise DataError("heat map label counts do not match the matrix shape")
    finite = values[np.isfinite(values)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 1.0
    span = hi - lo if hi > lo else 1.0
    left, top, right, bottom = 86, 40, 16, 56
    width = left + nx * cell + right
    height = top + ny * cell + bottom
    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">'
    )
    out.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    if title:
        out.append(f'<text x="{left}" y="16" font-size="13">{_esc(title)}</text>')
    argmin = None
    if mark_min and finite.size:
        argmin = np.unravel_index(int(np.nanargmin(np.where(np.isfinite(values), values, np.inf))), values.shape)
    for i in range(ny):
        for j in range(nx):
            v = values[i, j]
            color = "#cccccc" if not np.isfinite(v) else _ramp_color((v - lo) / span)
            out.append(
                f'<rect x="{left + j * cell}" y="{top + i * cell}" '
                f'width="{cell}" height="{cell}" fill="{color}"/>'
            )
    if argmin is not None:
        i, j = argmin
        out.append(
            f'<rect x="{left + j * cell}" y="{top + i * cell}" width="{cell}" '
            f'height="{cell}" fill="none" stroke="#ff0000" stroke-width="2"/>'
        )
    xstride = max(1, math.ceil(nx / 8))
    for j in range(0, nx, xstride):
        x = left + j * cell + cell / 2
        out.append(
            f'<text x="{x:.2f}" y="{top + ny * cell + 14}" text-anchor="middle">'
            f"{_esc(_tick_label(float(x_labels[j])))}</text>"
        )
    ystride = max(1, math.ceil(ny / 10))
    for i in range(0, ny, ystride):
        y = top + i * cell + cell / 2
        out.append(
            f'<text x="{left - 6}" y="{y:.2f}" text-anchor="end" dy="4">'
            f"{_esc(_tick_label(float(y_labels[i])))}</text>"
        )
    if xlabel:
        out.append(
            f'<text x="{left + nx * cell / 2:.2f}" y="{height - 8}" '
            f'text-anchor="middle">{_esc(xlabel)}</text>'
        )
    if ylabel:
        ymid = top + ny * cell / 2
        out.append(
            f'<text x="16" y="{ymid:.2f}" transform="rotate(-90 16 {ymid:.2f})" '
            f'text-anchor="middle">{_esc(ylabel)}</text>'
        )
    out.append(
        f'<text x="{left}" y="{top - 8}">min={_tick_label(lo)} max={_tick_label(hi)}</text>'
    )
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
