"""Deterministic CSV and SVG emission for sweep results.

Both artifacts are pure functions of the sweep result: fixed column order,
fixed float formatting, hand-rolled SVG with no timestamps or random ids,
so re-emitting identical results yields byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

from .harness import SweepPoint, SweepResult

CSV_HEADER = (
    "sweep_value,method,trials_ok,trials_failed,"
    "rmse_clock_ns,rmse_phase_deg,crb_clock_ns,crb_phase_deg"
)

_METHOD_COLORS = {
    "ghr": "#1f77b4",
    "ghr_fast": "#17becf",
    "gcc": "#d62728",
    "twme": "#2ca02c",
}


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.9g}"


def write_sweep_csv(result: SweepResult, path: str | Path):
    lines = [CSV_HEADER]
    for p in result.points:
        rmse_clock = None if p.rmse_clock_s is None else p.rmse_clock_s * 1e9
        rmse_phase = None if p.rmse_phase_rad is None else math.degrees(p.rmse_phase_rad)
        lines.append(
            ",".join(
                [
                    _fmt(p.sweep_value),
                    p.method,
                    str(p.trials_ok),
                    str(p.trials_failed),
                    _fmt(rmse_clock),
                    _fmt(rmse_phase),
                    _fmt(p.crb_clock_s * 1e9),
                    _fmt(math.degrees(p.crb_phase_rad)),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_sweep_csv(path: str | Path) -> SweepResult:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path} is not a sweep.csv (unexpected header)")
    points = []
    axis = "sweep_value"
    for line in lines[1:]:
        cells = line.split(",")
        sv, method, ok, failed, rc, rp, cc, cp = cells

        def opt(cell, scale):
            return None if cell == "" else float(cell) * scale

        points.append(
            SweepPoint(
                sweep_value=float(sv),
                method=method,
                trials_ok=int(ok),
                trials_failed=int(failed),
                rmse_clock_s=opt(rc, 1e-9),
                rmse_phase_rad=None if rp == "" else math.radians(float(rp)),
                crb_clock_s=float(cc) * 1e-9,
                crb_phase_rad=math.radians(float(cp)),
            )
        )
    return SweepResult(axis, points, [])


def _log_ticks(lo: float, hi: float) -> list[float]:
    first = math.floor(math.log10(lo))
    last = math.ceil(math.log10(hi))
    return [10.0**e for e in range(first, last + 1)]


class _Panel:
    def __init__(self, x0, y0, width, height, xs, title, ylabel, xlog):
        self.x0, self.y0, self.w, self.h = x0, y0, width, height
        self.title, self.ylabel = title, ylabel
        self.xlog = xlog
        self.xmin, self.xmax = min(xs), max(xs)
        if self.xlog:
            self.xmin, self.xmax = math.log10(self.xmin), math.log10(self.xmax)
        if self.xmax == self.xmin:
            self.xmax = self.xmin + 1.0
        self.ymin = math.inf
        self.ymax = -math.inf

    def feed(self, ys):
        for y in ys:
            if y is not None and y > 0 and math.isfinite(y):
                self.ymin = min(self.ymin, y)
                self.ymax = max(self.ymax, y)

    def finish(self):
        if not math.isfinite(self.ymin):
            self.ymin, self.ymax = 0.1, 10.0
        if self.ymin == self.ymax:
            self.ymax = self.ymin * 10.0

    def px(self, x):
        if self.xlog:
            x = math.log10(x)
        return self.x0 + (x - self.xmin) / (self.xmax - self.xmin) * self.w

    def py(self, y):
        ly = math.log10(y)
        lo, hi = math.log10(self.ymin), math.log10(self.ymax)
        if hi == lo:
            hi = lo + 1.0
        return self.y0 + self.h - (ly - lo) / (hi - lo) * self.h

    def polyline(self, xs, ys, color, dashed=False):
        segments, current = [], []
        for x, y in zip(xs, ys):
            if y is None or not math.isfinite(y) or y <= 0:
                if len(current) > 1:
                    segments.append(current)
                current = []
                continue
            current.append((self.px(x), self.py(y)))
        if len(current) > 1:
            segments.append(current)
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        out = []
        for seg in segments:
            pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in seg)
            out.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{pts}"/>'
            )
        return out

    def frame(self, axis_label):
        parts = [
            f'<rect x="{self.x0}" y="{self.y0}" width="{self.w}" height="{self.h}" '
            'fill="none" stroke="#444" stroke-width="1"/>',
            f'<text x="{self.x0 + self.w / 2:.0f}" y="{self.y0 - 8}" text-anchor="middle" '
            f'font-size="13" font-family="monospace">{self.title}</text>',
            f'<text x="{self.x0 + self.w / 2:.0f}" y="{self.y0 + self.h + 32}" '
            f'text-anchor="middle" font-size="11" font-family="monospace">{axis_label}</text>',
            f'<text x="{self.x0 - 52}" y="{self.y0 + self.h / 2:.0f}" text-anchor="middle" '
            f'font-size="11" font-family="monospace" '
            f'transform="rotate(-90 {self.x0 - 52} {self.y0 + self.h / 2:.0f})">{self.ylabel}</text>',
        ]
        for tick in _log_ticks(self.ymin, self.ymax):
            if tick < self.ymin / 1.0001 or tick > self.ymax * 1.0001:
                continue
            y = self.py(tick)
            parts.append(
                f'<line x1="{self.x0}" y1="{y:.2f}" x2="{self.x0 + self.w}" y2="{y:.2f}" '
                'stroke="#ddd" stroke-width="0.5"/>'
            )
            parts.append(
                f'<text x="{self.x0 - 6}" y="{y + 3:.2f}" text-anchor="end" font-size="9" '
                f'font-family="monospace">{tick:.0e}</text>'
            )
        return parts


def write_sweep_svg(result: SweepResult, path: str | Path, axis_label: str | None = None):
    """Two-panel (clock / phase) log-scale RMSE plot with bound overlays."""
    axis_label = axis_label or result.axis
    xs = sorted({p.sweep_value for p in result.points})
    if not xs:
        Path(path).write_text(
            '<svg xmlns="http://www.w3.org/2000/svg" width="820" height="580">\n'
            '<rect width="820" height="580" fill="white"/>\n'
            '<rect x="80" y="40" width="660" height="200" fill="none" stroke="#444"/>\n'
            '<rect x="80" y="320" width="660" height="200" fill="none" stroke="#444"/>\n'
            "</svg>\n",
            encoding="utf-8",
        )
        return
    methods = []
    for p in result.points:
        if p.method not in methods:
            methods.append(p.method)
    xlog = axis_label not in ("snr_db",) and (min(xs) > 0 and max(xs) / min(xs) > 20)

    def series(method, attr, scale):
        vals = {p.sweep_value: getattr(p, attr) for p in result.points if p.method == method}
        return [None if vals.get(x) is None else vals[x] * scale for x in xs]

    top = _Panel(80, 40, 660, 200, xs, "clock RMSE", "ns", xlog)
    bot = _Panel(80, 320, 660, 200, xs, "phase RMSE", "deg", xlog)
    for m in methods:
        top.feed(series(m, "rmse_clock_s", 1e9))
        bot.feed(series(m, "rmse_phase_rad", 180.0 / math.pi))
    top.feed(series(methods[0], "crb_clock_s", 1e9))
    bot.feed(series(methods[0], "crb_phase_rad", 180.0 / math.pi))
    top.finish()
    bot.finish()

    body = ['<svg xmlns="http://www.w3.org/2000/svg" width="820" height="580">']
    body.append('<rect width="820" height="580" fill="white"/>')
    for panel, attr, scale in ((top, "rmse_clock_s", 1e9), (bot, "rmse_phase_rad", 180.0 / math.pi)):
        body.extend(panel.frame(axis_label))
        for m in methods:
            color = _METHOD_COLORS.get(m, "#555555")
            body.extend(panel.polyline(xs, series(m, attr, scale), color))
        crb_attr = "crb_clock_s" if attr == "rmse_clock_s" else "crb_phase_rad"
        body.extend(panel.polyline(xs, series(methods[0], crb_attr, scale), "#888888", dashed=True))
    for i, m in enumerate(methods):
        color = _METHOD_COLORS.get(m, "#555555")
        y = 555
        x = 80 + i * 140
        body.append(f'<line x1="{x}" y1="{y}" x2="{x + 24}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        body.append(
            f'<text x="{x + 30}" y="{y + 4}" font-size="11" font-family="monospace">{m}</text>'
        )
    x = 80 + len(methods) * 140
    body.append(
        f'<line x1="{x}" y1="555" x2="{x + 24}" y2="555" stroke="#888888" '
        'stroke-width="2" stroke-dasharray="6,4"/>'
    )
    body.append(f'<text x="{x + 30}" y="559" font-size="11" font-family="monospace">sqrt(CRB)</text>')
    body.append("</svg>")
    Path(path).write_text("\n".join(body) + "\n", encoding="utf-8")


def emit_report(result: SweepResult, output_dir: str | Path) -> tuple[Path, Path]:
    """Write sweep.csv and sweep.svg into output_dir (created if needed)."""
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "sweep.csv"
        svg_path = out / "sweep.svg"
        write_sweep_csv(result, csv_path)
        write_sweep_svg(result, svg_path)
    except OSError as exc:
        raise OSError(f"cannot write report into {out}: {exc}") from exc
    return csv_path, svg_path
