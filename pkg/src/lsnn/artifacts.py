"""CSV and checkpoint emission for training runs."""

from __future__ import annotations

import csv
import json
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import builtin_problem
from .metrics import FIGURE_LINES, CrossSection, cross_section
from .network import BreakingLine, breaking_lines, param_count_paper, save_checkpoint

HISTORY_HEADER = ["iteration", "interior", "boundary", "total", "lr"]
METRICS_HEADER = ["problem", "network", "seed", "rel_l2", "rel_vbeta", "loss_ratio",
                  "params_paper", "params_raw", "final_loss", "iterations", "status"]
CROSS_HEADER = ["t", "x", "y", "exact", "approx"]
LINES_HEADER = ["layer", "neuron", "polyline", "x1", "y1", "x2", "y2"]


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_history(history, path) -> None:
    _write_csv(Path(path), HISTORY_HEADER, [[int(r[0])] + [repr(float(v)) for v in r[1:]] for r in history])


def metrics_row(report) -> list:
    m = report.metrics
    vals = [m.rel_l2, m.rel_vbeta, m.loss_ratio] if m else [float("nan")] * 3
    return [report.problem, str(report.arch), report.seed, *vals, param_count_paper(report.arch),
            report.arch.n_params, report.loss.total, report.iterations, report.status]


def write_cross_section(section: CrossSection, path) -> None:
    rows = zip(section.t, section.points[:, 0], section.points[:, 1], section.exact, section.approx)
    _write_csv(Path(path), CROSS_HEADER, rows)


def write_breaking_lines(lines: list[BreakingLine], path) -> None:
    rows = []
    for pid, bl in enumerate(lines):
        p = bl.points
        for a, b in zip(p[:-1], p[1:]):
            rows.append([bl.layer, bl.neuron, pid, a[0], a[1], b[0], b[1]])
    _write_csv(Path(path), LINES_HEADER, rows)


def write_run(report, out_dir, line: str | None = None) -> Path:
    """Checkpoint, loss history, metrics row, cross section and breaking lines of one run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(report.params, out / "checkpoint.ckpt")
    write_history(report.history, out / "history.csv")
    _write_csv(out / "metrics.csv", METRICS_HEADER, [metrics_row(report)])
    problem = builtin_problem(report.problem)
    line = line or FIGURE_LINES.get(report.problem.split(":")[0], "x=0")
    write_cross_section(cross_section(report.params, problem, line), out / "cross_section.csv")
    write_breaking_lines(breaking_lines(report.params, problem.domain), out / "breaking_lines.csv")
    summary = {
        "problem": report.problem,
        "arch": str(report.arch),
        "seed": report.seed,
        "schedule": str(report.schedule),
        "iterations": report.iterations,
        "h": report.h,
        "rho": report.cfg.rho,
        "boundary_weight": report.cfg.boundary_weight,
        "scale_by_speed": report.cfg.scale_by_speed,
        "status": report.status,
        "wall_clock_s": report.wall_clock,
        "final_loss": {"interior": report.loss.interior, "boundary": report.loss.boundary,
                       "total": report.loss.total},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return out


def manifest(config_text: str, extra: dict | None = None) -> dict:
    import scipy

    data = {
        "lsnn_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "config": config_text,
    }
    if extra:
        data.update(extra)
    return data
