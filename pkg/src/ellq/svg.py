"""Minimal hand-emitted SVG line plots (log axes, legends, marker lines, bands)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
DASHES = {"solid": None, "dashed": "6,4", "dashdot": "8,3,2,3", "dotted": "2,3"}


@dataclass
class Series:
    label: str
    x: list
    y: list
    markers: bool = False


@dataclass
class Plot:
    title: str
    xlabel: str
    ylabel: str
    logx: bool = False
    logy: bool = False
    width: int = 640
    height: int = 420
    series: list = field(default_factory=list)
    vlines: list = field(default_factory=list)  # (x, style, label)
    hlines: list = field(default_factory=list)  # (y, style, label)
    hbands: list = field(default_factory=list)  # (x, y_lo, y_hi) segments of one band

    def add(self, label, x, y, markers=False):
        self.series.append(Series(label, [float(v) for v in x], [float(v) for v in y], markers))

    def vline(self, x, style="dashed", label=""):
        self.vlines.append((float(x), style, label))

    def hline(self, y, style="dashed", label=""):
        self.hlines.append((float(y), style, label))

    def band(self, x, lo, hi):
        self.hbands.append(([float(v) for v in x], [float(v) for v in lo], [float(v) for v in hi]))

    def render(self) -> str:
        return _render(self)

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.render())
        return path


def _usable(v, log):
    return math.isfinite(v) and (v > 0 if log else True)


def _range(values, log):
    vals = [v for v in values if _usable(v, log)]
    if not vals:
        return (1.0, 10.0) if log else (0.0, 1.0)
    lo, hi = min(vals), max(vals)
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
        lo, hi = math.floor(lo), math.ceil(hi)
        if hi <= lo:
            hi = lo + 1
        return lo, hi
    if hi == lo:
        pad = abs(lo) or 1.0
        return lo - pad, hi + pad
    pad = 0.04 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo, hi, log):
    if log:
        step = max(1, math.ceil((hi - lo) / 8))
        return [(e, f"1e{e:d}") for e in range(int(lo), int(hi) + 1, step)]
    raw = (hi - lo) / 6
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * step:
        out.append((v, f"{v:g}"))
        v += step
    return out


def _fmt(v):
    return f"{v:.2f}"


def _dash(style):
    d = DASHES.get(style)
    return f' stroke-dasharray="{d}"' if d else ""


def _render(p: Plot) -> str:
    left, right, top, bottom = 70, 150, 36, 50
    pw, ph = p.width - left - right, p.height - top - bottom
    xs = [v for s in p.series for v in s.x] + [v[0] for v in p.vlines]
    ys = [v for s in p.series for v in s.y] + [v[0] for v in p.hlines]
    for bx, blo, bhi in p.hbands:
        xs += bx
        ys += blo + bhi
    x0, x1 = _range(xs, p.logx)
    y0, y1 = _range(ys, p.logy)

    def tx(v):
        u = math.log10(v) if p.logx else v
        return left + (u - x0) / (x1 - x0) * pw

    def ty(v):
        u = math.log10(v) if p.logy else v
        u = min(max(u, y0 - 0.05 * (y1 - y0)), y1 + 0.05 * (y1 - y0))
        return top + ph - (u - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{p.width}" height="{p.height}" '
        f'viewBox="0 0 {p.width} {p.height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{p.width}" height="{p.height}" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(p.title)}</text>',
        f'<defs><clipPath id="plot"><rect x="{left}" y="{top}" width="{pw}" height="{ph}"/></clipPath></defs>',
    ]
    for u, lab in _ticks(x0, x1, p.logx):
        x = left + (u - x0) / (x1 - x0) * pw
        out.append(f'<line x1="{_fmt(x)}" y1="{top}" x2="{_fmt(x)}" y2="{top + ph}" stroke="#eee"/>')
        out.append(f'<text x="{_fmt(x)}" y="{top + ph + 15}" text-anchor="middle">{lab}</text>')
    for u, lab in _ticks(y0, y1, p.logy):
        y = top + ph - (u - y0) / (y1 - y0) * ph
        out.append(f'<line x1="{left}" y1="{_fmt(y)}" x2="{left + pw}" y2="{_fmt(y)}" stroke="#eee"/>')
        out.append(f'<text x="{left - 6}" y="{_fmt(y + 4)}" text-anchor="end">{lab}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{p.height - 12}" text-anchor="middle">{escape(p.xlabel)}</text>')
    out.append(f'<text transform="translate(16,{top + ph / 2:.1f}) rotate(-90)" text-anchor="middle">'
               f'{escape(p.ylabel)}</text>')
    out.append('<g clip-path="url(#plot)">')
    for bx, blo, bhi in p.hbands:
        pts = [(bx[i], bhi[i]) for i in range(len(bx)) if _usable(bx[i], p.logx) and _usable(bhi[i], p.logy)]
        pts += [(bx[i], blo[i]) for i in reversed(range(len(bx))) if _usable(bx[i], p.logx) and _usable(blo[i], p.logy)]
        if pts:
            path = " ".join(f"{_fmt(tx(a))},{_fmt(ty(b))}" for a, b in pts)
            out.append(f'<polygon points="{path}" fill="#1f77b4" fill-opacity="0.15" stroke="none"/>')
    for i, s in enumerate(p.series):
        color = PALETTE[i % len(PALETTE)]
        pts = [(a, b) for a, b in zip(s.x, s.y) if _usable(a, p.logx) and _usable(b, p.logy)]
        if pts:
            path = " ".join(f"{_fmt(tx(a))},{_fmt(ty(b))}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            if s.markers:
                out += [f'<circle cx="{_fmt(tx(a))}" cy="{_fmt(ty(b))}" r="2.5" fill="{color}"/>' for a, b in pts]
    for v, style, _ in p.vlines:
        if _usable(v, p.logx):
            out.append(f'<line x1="{_fmt(tx(v))}" y1="{top}" x2="{_fmt(tx(v))}" y2="{top + ph}" '
                       f'stroke="black"{_dash(style)}/>')
    for v, style, _ in p.hlines:
        if _usable(v, p.logy):
            out.append(f'<line x1="{left}" y1="{_fmt(ty(v))}" x2="{left + pw}" y2="{_fmt(ty(v))}" '
                       f'stroke="gray"{_dash(style)}/>')
    out.append("</g>")
    entries = [(PALETTE[i % len(PALETTE)], "solid", s.label) for i, s in enumerate(p.series)]
    entries += [("black", st, lab) for _, st, lab in p.vlines if lab]
    entries += [("gray", st, lab) for _, st, lab in p.hlines if lab]
    lx = left + pw + 12
    for j, (color, style, lab) in enumerate(entries):
        y = top + 10 + 16 * j
        out.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 22}" y2="{y}" stroke="{color}" stroke-width="1.5"{_dash(style)}/>')
        out.append(f'<text x="{lx + 28}" y="{y + 4}">{escape(lab)}</text>')
    out.append("</svg>\n")
    return "\n".join(out)
