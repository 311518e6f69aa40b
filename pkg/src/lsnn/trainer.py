"""Full-batch Adam minimization of the discrete least-squares functional."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .benchmarks import BenchmarkProblem, builtin_problem
from .geometry import build_mesh
from .initializer import initialize_network
from .loss import LossConfig, LossPlan, LossValue, NumericError
from .metrics import ErrorMetrics, error_metrics
from .network import Architecture, Parameters

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
RECORD_EVERY = 100
DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class Schedule:
    """Learning-rate schedule; ``lr_at(t)`` is the rate used for 0-based step t.

    kinds: ``fixed`` (lr0), ``step`` (lr0 - delta * floor(t/every)),
    ``halving`` (lr0 / 2**floor(t/every)), ``decay`` (lr0 * (1-fraction)**floor(t/every)).
    """

    kind: str
    lr0: float
    every: int = 0
    delta: float = 0.0
    fraction: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fixed", "step", "halving", "decay"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if not self.lr0 > 0:
            raise ValueError("learning rate must be positive")
        if self.kind != "fixed" and self.every <= 0:
            raise ValueError("schedule period must be positive")

    def lr_at(self, t: int) -> float:
        if self.kind == "fixed":
            return self.lr0
        k = t // self.every
        if self.kind == "step":
            lr = self.lr0 - self.delta * k
        elif self.kind == "halving":
            lr = self.lr0 * 0.5 ** k
        else:
            lr = self.lr0 * (1.0 - self.fraction) ** k
        if not lr > 0:
            raise ValueError(f"schedule {self} reaches a non-positive rate at step {t}")
        return lr

    def check(self, iterations: int) -> None:
        if iterations > 0:
            self.lr_at(iterations - 1)

    @classmethod
    def parse(cls, text: str) -> Schedule:
        """``fixed:LR``, ``step:LR0,DELTA,EVERY``, ``halving:LR0,EVERY`` or ``decay:LR0,FRACTION,EVERY``."""
        kind, _, rest = text.strip().partition(":")
        vals = [v for v in rest.split(",") if v]
        try:
            if kind == "fixed" and len(vals) == 1:
                return cls("fixed", float(vals[0]))
            if kind == "step" and len(vals) == 3:
                return cls("step", float(vals[0]), every=int(vals[2]), delta=float(vals[1]))
            if kind == "halving" and len(vals) == 2:
                return cls("halving", float(vals[0]), every=int(vals[1]))
            if kind == "decay" and len(vals) == 3:
                return cls("decay", float(vals[0]), every=int(vals[2]), fraction=float(vals[1]))
        except ValueError as exc:
            raise ValueError(f"bad schedule {text!r}: {exc}") from None
        raise ValueError(f"bad schedule {text!r}")

    def __str__(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.lr0!r}"
        if self.kind == "step":
            return f"step:{self.lr0!r},{self.delta!r},{self.every}"
        if self.kind == "halving":
            return f"halving:{self.lr0!r},{self.every}"
        return f"decay:{self.lr0!r},{self.fraction!r},{self.every}"


@dataclass
class TrainState:
    params: Parameters
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    seed: int = 0
    history: list = field(default_factory=list)

    @classmethod
    def fresh(cls, params: Parameters, seed: int = 0) -> TrainState:
        n = params.arch.n_params
        return cls(params, np.zeros(n), np.zeros(n), 0, seed)


def adam_step(state: TrainState, gradient: np.ndarray, lr: float) -> TrainState:
    """One bias-corrected Adam update; returns a new state."""
    g = np.asarray(gradient, dtype=float)
    if g.shape != state.m.shape:
        raise ValueError(f"gradient length {g.shape} does not match {state.m.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite gradient at step {state.t} (index {int(np.argmin(np.isfinite(g)))})")
    t = state.t + 1
    m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * g
    v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * g * g
    m_hat = m / (1.0 - ADAM_BETA1 ** t)
    v_hat = v / (1.0 - ADAM_BETA2 ** t)
    theta = state.params.theta - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return replace(state, params=Parameters(state.params.arch, theta), m=m, v=v, t=t)


@dataclass
class TrainingReport:
    problem: str
    arch: Architecture
    params: Parameters
    loss: LossValue
    history: list  # rows (iteration, interior, boundary, total, lr)
    seed: int
    schedule: Schedule
    iterations: int
    wall_clock: float
    cfg: LossConfig
    h: float
    status: str = "ok"
    metrics: ErrorMetrics | None = None
    initial_params: Parameters | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def train(problem: BenchmarkProblem, arch: Architecture, mesh, cfg: LossConfig, schedule: Schedule,
          iterations: int, seed: int = 0, init: Parameters | None = None,
          output_init: str = "solve", workers: int = 1, record_every: int = RECORD_EVERY,
          compute_metrics: bool = True) -> TrainingReport:
    """Run exactly ``iterations`` full-batch Adam steps from the initializer (or ``init``)."""
    schedule.check(iterations)
    start = time.perf_counter()
    plan = LossPlan(mesh, problem, cfg, workers=workers)
    if init is None:
        init = initialize_network(arch, problem, mesh, cfg, seed=seed, output_init=output_init, plan=plan)
    elif init.arch != arch:
        raise ValueError(f"initial parameters have architecture {init.arch}, expected {arch}")
    state = TrainState.fresh(init.copy(), seed)
    status = "ok"
    first = None
    for t in range(iterations):
        value, grad = plan.value_and_grad(state.params)
        if first is None:
            first = value.total
        lr = schedule.lr_at(t)
        if t % record_every == 0:
            state.history.append((t, value.interior, value.boundary, value.total, lr))
        if not math.isfinite(value.total) or value.total > DIVERGENCE_FACTOR * max(first, 1e-12):
            log.warning("%s %s seed %d diverged at step %d (loss %.3e)", problem.id, arch, seed, t, value.total)
            status = "diverged"
            break
        state = adam_step(state, grad, lr)
    final = plan.value(state.params)
    state.history.append((state.t, final.interior, final.boundary, final.total,
                          schedule.lr_at(max(state.t - 1, 0))))
    report = TrainingReport(problem.id, arch, state.params, final, state.history, seed, schedule,
                            state.t, time.perf_counter() - start, cfg, mesh.h, status,
                            initial_params=init)
    if compute_metrics and status == "ok":
        report.metrics = error_metrics(state.params, problem, mesh, cfg)
    return report


@dataclass(frozen=True)
class RunSpec:
    """Everything needed to reproduce one training run except the seed."""

    problem: str
    arch: str
    iterations: int
    schedule: str
    h: float = 0.01
    rho: float | None = None  # absolute; default problem.rho_factor * h
    boundary_weight: float | None = None
    output_init: str = "solve"
    scale_by_speed: bool = True

    def loss_config(self, problem: BenchmarkProblem) -> LossConfig:
        kw = {"scale_by_speed": self.scale_by_speed}
        if self.boundary_weight is not None:
            kw["boundary_weight"] = self.boundary_weight
        cfg = LossConfig.for_problem(problem, self.h, **kw)
        return replace(cfg, rho=self.rho) if self.rho is not None else cfg


def run_spec(spec: RunSpec, seed: int, workers: int = 1) -> TrainingReport:
    problem = builtin_problem(spec.problem)
    mesh = build_mesh(problem.domain, spec.h, problem.beta)
    return train(problem, Architecture.parse(spec.arch), mesh, spec.loss_config(problem),
                 Schedule.parse(spec.schedule), spec.iterations, seed=seed,
                 output_init=spec.output_init, workers=workers)


def seed_independent(spec: RunSpec) -> bool:
    """Two-layer nets with a solved output layer have a fully deterministic initialization."""
    return Architecture.parse(spec.arch).depth == 2 and spec.output_init == "solve"


def best_of_seeds(spec: RunSpec, k: int, base_seed: int = 0, out_dir: Path | None = None,
                  n_jobs: int = 1) -> tuple[TrainingReport, list[TrainingReport]]:
    """Train seeds base_seed..base_seed+k-1 and return (best, all) by final total loss."""
    if k < 1:
        raise ValueError("k must be at least 1")
    seeds = [base_seed + i for i in range(k)]
    if seed_independent(spec):
        # the run never touches the generator: train once, relabel
        first = run_spec(spec, seeds[0])
        reports = [first] + [replace(first, seed=s) for s in seeds[1:]]
    elif n_jobs == 1:
        reports = [run_spec(spec, s) for s in seeds]
    else:
        from joblib import Parallel, delayed

        reports = Parallel(n_jobs=n_jobs)(delayed(run_spec)(spec, s) for s in seeds)
    if out_dir is not None:
        from .artifacts import write_run

        for r in reports:
            write_run(r, Path(out_dir) / f"seed_{r.seed}")
    good = [r for r in reports if r.ok]
    if not good:
        raise RuntimeError(f"all {k} runs of {spec.problem} {spec.arch} aborted")
    best = min(good, key=lambda r: r.loss.total)
    return best, reports
