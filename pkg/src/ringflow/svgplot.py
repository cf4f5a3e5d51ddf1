"""Minimal self-contained SVG line/scatter chart emitter.

Plots are acceptance artifacts regenerable from their data files, so this
stays dependency-free: axes, ticks, polylines, points, legend.
"""

from __future__ import annotations

import math

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 70, 20, 40, 55


def _nice_ticks(lo, hi, n=6):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / max(n - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 2.5, 5, 10):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * span:
        if t >= lo - 1e-9 * span:
            ticks.append(round(t, 10))
        t += step
    return ticks


def _fmt(v):
    return f"{v:g}"


class Chart:
    """A single x/y chart accumulating line and point series."""

    def __init__(self, title="", xlabel="", ylabel=""):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.series = []  # (kind, xs, ys, label)

    def line(self, xs, ys, label=""):
        self.series.append(("line", list(xs), list(ys), label))
        return self

    def points(self, xs, ys, label=""):
        self.series.append(("points", list(xs), list(ys), label))
        return self

    def _bounds(self):
        xs = [x for _, sx, _, _ in self.series for x in sx]
        ys = [y for _, _, sy, _ in self.series for y in sy]
        if not xs:
            return 0.0, 1.0, 0.0, 1.0
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if x0 == x1:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y0 == y1:
            y0, y1 = y0 - 0.5, y1 + 0.5
        pad = 0.04 * (y1 - y0)
        return x0, x1, y0 - pad, y1 + pad

    def render(self):
        x0, x1, y0, y1 = self._bounds()
        pw = _W - _ML - _MR
        ph = _H - _MT - _MB

        def px(x):
            return _ML + (x - x0) / (x1 - x0) * pw

        def py(y):
            return _MT + ph - (y - y0) / (y1 - y0) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
            f'height="{_H}" viewBox="0 0 {_W} {_H}">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W / 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="16">{self.title}</text>',
        ]
        # axes frame
        out.append(
            f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" '
            'fill="none" stroke="#333" stroke-width="1"/>'
        )
        for t in _nice_ticks(x0, x1):
            if not x0 <= t <= x1:
                continue
            out.append(
                f'<line x1="{px(t):.1f}" y1="{_MT + ph}" x2="{px(t):.1f}" '
                f'y2="{_MT + ph + 5}" stroke="#333"/>'
                f'<text x="{px(t):.1f}" y="{_MT + ph + 20}" '
                f'text-anchor="middle" font-family="sans-serif" '
                f'font-size="11">{_fmt(t)}</text>'
            )
        for t in _nice_ticks(y0, y1):
            if not y0 <= t <= y1:
                continue
            out.append(
                f'<line x1="{_ML - 5}" y1="{py(t):.1f}" x2="{_ML}" '
                f'y2="{py(t):.1f}" stroke="#333"/>'
                f'<text x="{_ML - 8}" y="{py(t):.1f}" text-anchor="end" '
                f'dominant-baseline="middle" font-family="sans-serif" '
                f'font-size="11">{_fmt(t)}</text>'
            )
        out.append(
            f'<text x="{_ML + pw / 2}" y="{_H - 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{self.xlabel}</text>'
        )
        out.append(
            f'<text x="18" y="{_MT + ph / 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13" '
            f'transform="rotate(-90 18 {_MT + ph / 2})">{self.ylabel}</text>'
        )

        for i, (kind, xs, ys, _label) in enumerate(self.series):
            color = _COLORS[i % len(_COLORS)]
            pts = [
                (px(x), py(y))
                for x, y in zip(xs, ys)
                if math.isfinite(x) and math.isfinite(y)
            ]
            if kind == "line" and len(pts) >= 2:
                d = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
                out.append(
                    f'<polyline points="{d}" fill="none" stroke="{color}" '
                    'stroke-width="1.5"/>'
                )
            else:
                for x, y in pts:
                    out.append(
                        f'<circle cx="{x:.1f}" cy="{y:.1f}" r="1.6" '
                        f'fill="{color}"/>'
                    )
        # legend
        ly = _MT + 12
        for i, (_, _, _, label) in enumerate(self.series):
            if not label:
                continue
            color = _COLORS[i % len(_COLORS)]
            out.append(
                f'<line x1="{_ML + pw - 150}" y1="{ly}" '
                f'x2="{_ML + pw - 125}" y2="{ly}" stroke="{color}" '
                'stroke-width="2"/>'
                f'<text x="{_ML + pw - 118}" y="{ly + 4}" '
                f'font-family="sans-serif" font-size="12">{label}</text>'
            )
            ly += 17
        out.append("</svg>")
        return "\n".join(out)

    def write(self, path):
        with open(path, "w") as f:
            f.write(self.render())


def fundamental_diagram_chart(traces, title="Fundamental diagram"):
    """Density-flow chart from one or more FdTraces."""
    chart = Chart(title, "density (veh/km)", "flow (veh/h)")
    for trace in traces:
        chart.points(trace.density, trace.flow, label=trace.phase.value)
    return chart


def time_series_chart(trace, field="flow", dt=0.1, title=""):
    ys = getattr(trace, field)
    xs = trace.steps * dt
    label = {"flow": "flow (veh/h)", "mean_speed": "mean speed (m/s)",
             "density": "density (veh/km)"}[field]
    chart = Chart(title or label, "time (s)", label)
    chart.line(xs, ys, label=field)
    return chart


def trajectory_chart(rows, dt=0.1, title="Vehicle trajectories"):
    """Space-time scatter from TrajectoryRecorder rows (wrap-safe)."""
    chart = Chart(title, "time (s)", "position (m)")
    human_x, human_y, cav_x, cav_y = [], [], [], []
    for step_i, _vid, kind, pos, _v, _a in rows:
        if kind == "cav":
            cav_x.append(step_i * dt)
            cav_y.append(pos)
        else:
            human_x.append(step_i * dt)
            human_y.append(pos)
    if human_x:
        chart.points(human_x, human_y, label="human")
    if cav_x:
        chart.points(cav_x, cav_y, label="cav")
    return chart
