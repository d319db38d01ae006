"""A small self-contained SVG line-plot writer (axes, log scale, legend)."""
import math
from pathlib import Path

from fairpd.errors import ConfigurationError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f")


def _fmt(v):
    return f"{v:.2f}"


def _tick_label(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.0e}"
    return f"{v:.4g}"


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * abs(hi):
        ticks.append(round(t, 12))
        t += step
    return ticks


def line_plot(path, series, title="", xlabel="", ylabel="", logy=False, logx=False,
              width=640, height=420):
    """Write an SVG with one polyline per ``(label, xs, ys)`` in ``series``.

    Non-finite points (and non-positive ones on a log axis) are skipped.
    The output depends only on the inputs, so it is reproducible.
    """
    if not series:
        raise ConfigurationError("nothing to plot")

    def tx(v):
        return math.log10(v) if logx else v

    def ty(v):
        return math.log10(v) if logy else v

    cleaned = []
    for label, xs, ys in series:
        pts = [
            (tx(float(x)), ty(float(y)))
            for x, y in zip(xs, ys)
            if math.isfinite(x) and math.isfinite(y) and (not logy or y > 0) and (not logx or x > 0)
        ]
        cleaned.append((label, pts))
    allpts = [p for _, pts in cleaned for p in pts]
    if not allpts:
        raise ConfigurationError("no finite points to plot")
    x0, x1 = min(p[0] for p in allpts), max(p[0] for p in allpts)
    y0, y1 = min(p[1] for p in allpts), max(p[1] for p in allpts)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{left + pw / 2:.1f}" y="20" text-anchor="middle" '
                   f'font-size="13">{_escape(title)}</text>')
    for t in _nice_ticks(x0, x1):
        label = _tick_label(10**t) if logx else _tick_label(t)
        out.append(f'<line x1="{_fmt(px(t))}" y1="{top + ph}" x2="{_fmt(px(t))}" '
                   f'y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px(t))}" y="{top + ph + 16}" '
                   f'text-anchor="middle">{label}</text>')
    for t in _nice_ticks(y0, y1):
        label = _tick_label(10**t) if logy else _tick_label(t)
        out.append(f'<line x1="{left - 4}" y1="{_fmt(py(t))}" x2="{left}" '
                   f'y2="{_fmt(py(t))}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{_fmt(py(t) + 4)}" '
                   f'text-anchor="end">{label}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" '
                   f'text-anchor="middle">{_escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="15" y="{top + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 15 {top + ph / 2:.1f})">{_escape(ylabel)}</text>')
    for i, (label, pts) in enumerate(cleaned):
        color = PALETTE[i % len(PALETTE)]
        if pts:
            coords = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                       f'points="{coords}"/>')
        ly = top + 14 + 16 * i
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly + 4}">{_escape(label)}</text>')
    out.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")
    return path


def _escape(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
