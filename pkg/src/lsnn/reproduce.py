"""Presets for the seven published result tables and a side-by-side report."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path

from .artifacts import METRICS_HEADER, metrics_row
from .continuation import DEFAULT_PLAN, run_continuation
from .network import Architecture, param_count_paper
from .trainer import RunSpec, Schedule, best_of_seeds

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TableRow:
    spec: RunSpec
    k: int  # best of k seeds
    paper: tuple[float, float, float, int]  # rel_l2, rel_vbeta, loss_ratio, parameters


def _rows(problem, iterations, schedule, entries, k=1, **kw):
    return [TableRow(RunSpec(problem, arch, iterations, schedule, **kw), kk or k, vals)
            for arch, vals, kk in entries]


TABLES: dict[int, list[TableRow]] = {
    1: _rows("vline", 20000, "fixed:0.003", [
        ("2-4-1", (0.058046, 0.058304, 0.050491, 13), None),
        ("2-200-1", (0.058745, 0.058926, 0.048537, 601), None),
    ], k=3),
    2: _rows("diagonal", 20000, "fixed:0.003", [
        ("2-4-1", (0.393864, 0.393871, 0.126095, 13), None),
        ("2-6-1", (0.073534, 0.073826, 0.067531, 19), None),
    ], k=3),
    3: _rows("smooth", 30000, "fixed:0.003", [
        ("2-20-1", (0.110745, 0.110754, 0.035571, 61), None),
        ("2-30-1", (0.107525, 0.107641, 0.013568, 91), None),
        ("2-40-1", (0.101411, 0.101413, 0.003509, 121), None),
    ]),
    4: _rows("twojump", 80000, "step:0.01,0.002,20000", [
        ("2-20-1", (0.363573, 0.392153, 0.393907, 61), None),
        ("2-30-1", (0.147767, 0.152132, 0.132542, 91), None),
        ("2-34-1", (0.117451, 0.120213, 0.112463, 103), None),
    ]),
    5: _rows("twosector", 50000, "fixed:0.003", [
        ("2-30-1", (0.487306, 0.556949, 0.386919, 91), None),
        ("2-200-1", (0.317839, 0.402699, 0.259592, 601), None),
        ("2-5-5-1", (0.086122, 0.086131, 0.016945, 46), 5),
    ]),
    6: _rows("rotational", 150000, "halving:0.005,50000", [
        ("2-40-40-1", (0.146226, 0.187823, 0.108551, 1761), None),
        ("2-30-30-30-1", (0.109266, 0.122252, 0.039993, 1951), None),
    ], k=3),
}

# n, network, rel_l2 (u_n), rel_vbeta (u_n), rel_l2 (u), loss_ratio, parameters
TABLE7_PAPER = {
    "sectors:3": (0.075817, 0.080026, 0.244483, 0.059422, 61),
    "sectors:4": (0.104372, 0.110954, 0.216481, 0.064744, 61),
    "sectors:5": (0.097836, 0.109648, 0.135606, 0.049938, 97),
    "rotational": (0.141261, 0.187616, 0.141261, 0.077233, 726),
}

COMPARE_HEADER = ["table", "problem", "network", "seed", "paper_rel_l2", "rel_l2",
                  "paper_rel_vbeta", "rel_vbeta", "paper_loss_ratio", "loss_ratio",
                  "paper_u_rel_l2", "u_rel_l2", "paper_params", "params"]


def scale_spec(spec: RunSpec, factor: float) -> RunSpec:
    """Shorten (or lengthen) a run; schedule periods scale with the iteration count."""
    if factor == 1.0:
        return spec
    sched = Schedule.parse(spec.schedule)
    if sched.every:
        sched = replace(sched, every=max(1, round(sched.every * factor)))
    return replace(spec, iterations=max(1, round(spec.iterations * factor)), schedule=str(sched))


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def reproduce(table: int, out_dir, iters_scale: float = 1.0, base_seed: int = 0,
              n_jobs: int = 1) -> Path:
    """Run every row of ``table`` and write ``comparison.csv`` and ``metrics.csv`` under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    compare, metrics = [], []
    if table == 7:
        plan = DEFAULT_PLAN.scaled(iters_scale) if iters_scale != 1.0 else DEFAULT_PLAN
        results = run_continuation(plan, seed=base_seed, out_dir=out)
        for res in results:
            m, r = res.metrics, res.report
            paper = TABLE7_PAPER.get(res.stage.problem)
            p = paper if paper else ("",) * 5
            compare.append([7, res.stage.problem, res.stage.arch, r.seed, p[0], m.rel_l2, p[1], m.rel_vbeta,
                            p[3], m.loss_ratio, p[2], res.target_rel_l2, p[4], m.param_count_paper])
            metrics.append(metrics_row(r))
    elif table in TABLES:
        for row in TABLES[table]:
            spec = scale_spec(row.spec, iters_scale)
            run_dir = out / spec.arch
            best, allr = best_of_seeds(spec, row.k, base_seed=base_seed, out_dir=run_dir, n_jobs=n_jobs)
            m = best.metrics
            p = row.paper
            compare.append([table, spec.problem, spec.arch, best.seed, p[0], m.rel_l2, p[1], m.rel_vbeta,
                            p[2], m.loss_ratio, "", "", p[3], param_count_paper(Architecture.parse(spec.arch))])
            metrics.extend(metrics_row(r) for r in allr)
            log.info("table %d %s: rel_l2 %.4f (paper %.4f)", table, spec.arch, m.rel_l2, p[0])
    else:
        raise ValueError(f"no table {table}; choose 1-7")
    _write(out / "comparison.csv", COMPARE_HEADER, compare)
    _write(out / "metrics.csv", METRICS_HEADER, metrics)
    return out
