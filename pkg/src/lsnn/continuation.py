"""Model continuation over chord approximations of a curved velocity field.

Each stage trains on its own field; the next stage starts from the previous
network, widened with fresh neurons, and re-solves the output layer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .benchmarks import builtin_problem, exact_solution_sectors  # noqa: F401  (re-export)
from .geometry import Domain, build_mesh
from .initializer import random_hyperplanes, random_layer, solve_output_layer
from .loss import LossPlan
from .metrics import ErrorMetrics, rel_l2_error
from .network import Architecture, Parameters
from .trainer import RunSpec, Schedule, TrainingReport, train

log = logging.getLogger(__name__)


def grow_and_transplant(small: Parameters, big_arch: Architecture, seed: int, domain: Domain,
                        resolve_with: LossPlan | None = None) -> Parameters:
    """Embed ``small`` into the wider ``big_arch``.

    Old weights keep their positions; new first-layer neurons get random lines
    through the domain, new deeper neurons get uniform random weights. Weights
    from new neurons into old ones are zero, and new neurons start with zero
    output weight, so before the output re-solve the grown network equals the
    small one everywhere.
    """
    if not big_arch.dominates(small.arch):
        raise ValueError(f"{big_arch} does not dominate {small.arch} layerwise")
    rng = np.random.default_rng(seed)
    big = Parameters(big_arch)
    L = big_arch.depth
    for l in range(L):
        r_old, c_old = small.arch.layer_shapes[l]
        r_new, c_new = big_arch.layer_shapes[l]
        W, b = big.W(l), big.b(l)
        W[:r_old, :c_old] = small.W(l)
        b[:r_old] = small.b(l)
        if r_new > r_old:
            if l == 0:
                extra = random_hyperplanes(rng, domain, r_new - r_old)
                W[r_old:], b[r_old:] = extra.omegas, extra.offsets
            else:
                W[r_old:], b[r_old:] = random_layer(rng, r_new - r_old, c_new)
    if resolve_with is not None:
        big = solve_output_layer(big, resolve_with)
    return big


@dataclass(frozen=True)
class ContinuationStage:
    problem: str  # "sectors:<n>" or "rotational"
    arch: str
    iterations: int
    schedule: str

    def __post_init__(self):
        if not (self.problem.startswith("sectors:") or self.problem == "rotational"):
            raise ValueError(f"continuation stage must use a sector field or 'rotational', got {self.problem}")


@dataclass(frozen=True)
class ContinuationPlan:
    stages: tuple[ContinuationStage, ...]
    target: str = "rotational"

    def __post_init__(self):
        if not self.stages:
            raise ValueError("empty continuation plan")
        if self.stages[-1].problem != self.target:
            raise ValueError("the last stage must use the target field")
        for a, b in zip(self.stages, self.stages[1:]):
            if not Architecture.parse(b.arch).dominates(Architecture.parse(a.arch)):
                raise ValueError(f"stage widths must not shrink: {a.arch} -> {b.arch}")

    def scaled(self, factor: float) -> ContinuationPlan:
        """Same plan with iteration counts and schedule periods multiplied by ``factor``."""
        out = []
        for s in self.stages:
            sched = Schedule.parse(s.schedule)
            if sched.every:
                sched = replace(sched, every=max(1, round(sched.every * factor)))
            out.append(replace(s, iterations=max(1, round(s.iterations * factor)), schedule=str(sched)))
        return replace(self, stages=tuple(out))

    @classmethod
    def parse(cls, records: list[str]) -> ContinuationPlan:
        """Each record is ``<field> <arch> <iterations> <schedule>``."""
        stages = []
        for rec in records:
            parts = rec.split()
            if len(parts) != 4:
                raise ValueError(f"bad continuation record {rec!r}")
            pid = parts[0] if parts[0] != "curve" else "rotational"
            stages.append(ContinuationStage(pid, parts[1], int(parts[2]), parts[3]))
        return cls(tuple(stages))


DECAY = "decay:0.01,0.2,50000"
DEFAULT_PLAN = ContinuationPlan((
    ContinuationStage("sectors:2", "2-5-5-1", 50000, "fixed:0.003"),
    ContinuationStage("sectors:3", "2-6-6-1", 100000, DECAY),
    ContinuationStage("sectors:4", "2-6-6-1", 100000, DECAY),
    ContinuationStage("sectors:5", "2-8-8-1", 100000, DECAY),
    ContinuationStage("rotational", "2-25-25-1", 150000, DECAY),
))


@dataclass
class StageResult:
    stage: ContinuationStage
    report: TrainingReport
    metrics: ErrorMetrics  # against the stage's own exact solution
    target_rel_l2: float  # against the target (curved-field) solution


def run_continuation(plan: ContinuationPlan = DEFAULT_PLAN, seed: int = 0, h: float = 0.01,
                     stop_after: int | None = None, out_dir: Path | None = None) -> list[StageResult]:
    """Train the stages in order; ``stop_after`` limits how many stages run."""
    target = builtin_problem(plan.target)
    results = []
    prev = None
    stages = plan.stages if stop_after is None else plan.stages[:stop_after]
    for i, stage in enumerate(stages):
        problem = builtin_problem(stage.problem)
        mesh = build_mesh(problem.domain, h, problem.beta)
        spec = RunSpec(stage.problem, stage.arch, stage.iterations, stage.schedule, h=h)
        cfg = spec.loss_config(problem)
        arch = Architecture.parse(stage.arch)
        stage_seed = seed + 1000 * i
        init = None
        if prev is not None:
            plan_ = LossPlan(mesh, problem, cfg)
            init = grow_and_transplant(prev, arch, stage_seed, problem.domain, resolve_with=plan_)
        report = train(problem, arch, mesh, cfg, Schedule.parse(stage.schedule), stage.iterations,
                       seed=stage_seed, init=init)
        if not report.ok:
            raise RuntimeError(f"continuation stage {i} ({stage.problem}) diverged")
        u_err = rel_l2_error(report.params, target.exact_u, mesh)
        log.info("stage %d %s %s: rel_l2=%.4f target=%.4f", i, stage.problem, stage.arch,
                 report.metrics.rel_l2, u_err)
        results.append(StageResult(stage, report, report.metrics, u_err))
        if out_dir is not None:
            from .artifacts import write_run

            write_run(report, Path(out_dir) / f"stage_{i}_{stage.problem.replace(':', '')}")
        prev = report.params
    return results
