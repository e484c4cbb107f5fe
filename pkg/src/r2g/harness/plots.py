"""Standalone SVG figures written directly, with no plotting dependency.

Three kinds: a joint-action trajectory scatter on the fixed square
``[-1, 1]^2`` coloured by epoch, per-agent learning curves, and response
maps of central actors.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from ..verify import TrajectoryLog, read_response_map

SIZE = 420
MARGIN = 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class PlotInputError(ValueError):
    """Raised when the data needed for a figure is missing or empty."""


def _epoch_colour(t: float) -> str:
    """Blue (early) to red (late) for ``t`` in [0, 1]."""
    r = int(round(40 + 200 * t))
    b = int(round(240 - 200 * t))
    return f"#{r:02x}50{b:02x}"


class _Canvas:
    def __init__(self, xlim: tuple[float, float], ylim: tuple[float, float], title: str,
                 xlabel: str, ylabel: str):
        self.xlim, self.ylim = xlim, ylim
        self.parts: list[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
            f'viewBox="0 0 {SIZE} {SIZE}">',
            f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>',
            f'<text x="{SIZE / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{SIZE / 2}" y="{SIZE - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
            f'<text x="14" y="{SIZE / 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 14 {SIZE / 2})">{escape(ylabel)}</text>',
        ]
        self._axes()

    def x(self, v: float) -> float:
        lo, hi = self.xlim
        return MARGIN + (v - lo) / (hi - lo) * (SIZE - 2 * MARGIN)

    def y(self, v: float) -> float:
        lo, hi = self.ylim
        return SIZE - MARGIN - (v - lo) / (hi - lo) * (SIZE - 2 * MARGIN)

    def _axes(self) -> None:
        x0, x1 = self.x(self.xlim[0]), self.x(self.xlim[1])
        y0, y1 = self.y(self.ylim[0]), self.y(self.ylim[1])
        self.parts.append(f'<rect x="{x0:.2f}" y="{y1:.2f}" width="{x1 - x0:.2f}" height="{y0 - y1:.2f}" '
                          'fill="none" stroke="black"/>')
        for v in np.linspace(*self.xlim, 5):
            self.parts.append(f'<text x="{self.x(v):.2f}" y="{y0 + 16:.2f}" text-anchor="middle" '
                              f'font-size="10">{v:g}</text>')
        for v in np.linspace(*self.ylim, 5):
            self.parts.append(f'<text x="{x0 - 6:.2f}" y="{self.y(v) + 3:.2f}" text-anchor="end" '
                              f'font-size="10">{v:.3g}</text>')

    def points(self, xs, ys, colours, r: float = 2.5) -> None:
        for a, b, c in zip(xs, ys, colours):
            self.parts.append(f'<circle cx="{self.x(a):.2f}" cy="{self.y(b):.2f}" r="{r}" fill="{c}"/>')

    def line(self, xs, ys, colour: str, label: str | None = None, slot: int = 0) -> None:
        pts = " ".join(f"{self.x(a):.2f},{self.y(b):.2f}" for a, b in zip(xs, ys) if np.isfinite(b))
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        if label:
            y = MARGIN + 14 * slot + 4
            self.parts.append(f'<text x="{SIZE - MARGIN - 4}" y="{y}" text-anchor="end" font-size="11" '
                              f'fill="{colour}">{escape(label)}</text>')

    def write(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(self.parts + ["</svg>"]) + "\n")
        return path


def _require(paths: Sequence[Path]) -> None:
    missing = [str(p) for p in paths if not Path(p).exists()]
    if missing:
        raise PlotInputError("missing input files: " + ", ".join(missing))


def trajectory_plot(log: TrajectoryLog, path: str | Path, title: str = "most-likely joint action") -> Path:
    """Scatter of (a1, a2) per logged epoch; one circle per row."""
    if len(log) == 0:
        raise PlotInputError("trajectory is empty")
    if log.actions.shape[1] < 2:
        raise PlotInputError("trajectory plot needs two action coordinates")
    c = _Canvas((-1.0, 1.0), (-1.0, 1.0), title, "a1", "a2")
    span = max(len(log) - 1, 1)
    c.points(log.actions[:, 0], log.actions[:, 1], [_epoch_colour(t / span) for t in range(len(log))])
    return c.write(Path(path))


def learning_curve_plot(returns_csv: str | Path, path: str | Path, title: str = "mean return") -> Path:
    _require([Path(returns_csv)])
    series: dict[int, list[tuple[int, float]]] = {}
    with open(returns_csv, newline="") as fh:
        for row in csv.DictReader(fh):
            series.setdefault(int(row["agent_id"]), []).append((int(row["epoch"]), float(row["mean_return"])))
    if not series:
        raise PlotInputError(f"{returns_csv} has no rows")
    vals = np.array([v for s in series.values() for _, v in s if np.isfinite(v)])
    epochs = [e for s in series.values() for e, _ in s]
    lo, hi = (float(vals.min()), float(vals.max())) if len(vals) else (0.0, 1.0)
    if hi - lo < 1e-9:
        lo, hi = lo - 1.0, hi + 1.0
    c = _Canvas((float(min(epochs)), float(max(max(epochs), min(epochs) + 1))), (lo, hi), title, "epoch", "return")
    for slot, (agent, pts) in enumerate(sorted(series.items())):
        c.line([e for e, _ in pts], [v for _, v in pts], PALETTE[slot % len(PALETTE)], f"agent {agent}", slot)
    return c.write(Path(path))


def response_map_plot(response_csv: str | Path, path: str | Path, title: str = "central actor response") -> Path:
    _require([Path(response_csv)])
    rows = read_response_map(response_csv)
    if not rows:
        raise PlotInputError(f"{response_csv} has no rows")
    c = _Canvas((-1.0, 1.0), (-1.0, 1.0), title, "opponent action", "response")
    for slot, agent in enumerate(sorted({r[1] for r in rows})):
        pts = [(o, r) for o, i, r in rows if i == agent]
        c.line([o for o, _ in pts], [r for _, r in pts], PALETTE[slot % len(PALETTE)], f"agent {agent}", slot)
    return c.write(Path(path))


def emit_plots(run_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Write every figure the run directory has inputs for.

    The trajectory and returns CSVs are required; the response map is
    plotted only when ``response_map.csv`` exists.
    """
    run_dir = Path(run_dir)
    out = Path(out_dir) if out_dir is not None else run_dir / "plots"
    _require([run_dir / "trajectory.csv", run_dir / "returns.csv"])
    written = [
        trajectory_plot(TrajectoryLog.from_csv(run_dir / "trajectory.csv"), out / "trajectory.svg"),
        learning_curve_plot(run_dir / "returns.csv", out / "returns.svg"),
    ]
    if (run_dir / "response_map.csv").exists():
        written.append(response_map_plot(run_dir / "response_map.csv", out / "response_map.svg"))
    return written
