"""Flat ``key = value`` run configuration.

One key per line, ``#`` starts a comment. ``stage`` may repeat; every other
key appears at most once. Example::

    mode = train
    problem = vline
    arch = 2-4-1
    iterations = 20000
    schedule = fixed:0.003
    rho = h/2
    seeds = 0,1,2
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .benchmarks import builtin_problem
from .geometry import ConfigurationError, build_uniform_mesh
from .network import Architecture
from .trainer import RunSpec, Schedule

MODES = ("train", "continuation", "verify", "report")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    mode: str = "train"
    problem: str = "vline"
    arch: str = "2-4-1"
    iterations: int = 20000
    schedule: str = "fixed:0.003"
    rho: str | None = None  # absolute ("0.005") or h-relative ("h/2"); default per problem
    boundary_weight: float | None = None
    h: float = 0.01
    seeds: tuple[int, ...] = (0,)
    k: int | None = None  # best-of-k; defaults to len(seeds)
    output_dir: str = "runs/default"
    output_init: str = "solve"
    scale_by_speed: bool = True
    workers: int = 1
    eval_h: float | None = None
    checkpoint: str | None = None  # report mode
    stages: list[str] = field(default_factory=list)  # continuation mode
    text: str = ""  # original file contents, echoed in the manifest

    def rho_value(self) -> float | None:
        return resolve_rho(self.rho, self.h)

    def run_spec(self) -> RunSpec:
        return RunSpec(self.problem, self.arch, self.iterations, self.schedule, h=self.h,
                       rho=self.rho_value(), boundary_weight=self.boundary_weight,
                       output_init=self.output_init, scale_by_speed=self.scale_by_speed)

    def seed_list(self) -> list[int]:
        if self.k is None:
            return list(self.seeds)
        base = self.seeds[0] if self.seeds else 0
        return [base + i for i in range(self.k)]

    def validate(self) -> RunConfig:
        """Check every field without doing any compute beyond building one mesh."""
        if self.mode not in MODES:
            raise ConfigError("mode", f"must be one of {', '.join(MODES)}")
        if not self.h > 0:
            raise ConfigError("h", "must be positive")
        if self.k is not None and self.k < 1:
            raise ConfigError("k", "must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers", "must be at least 1")
        if self.eval_h is not None and not self.eval_h > 0:
            raise ConfigError("eval_h", "must be positive")
        if self.output_init not in ("solve", "random"):
            raise ConfigError("output_init", "must be 'solve' or 'random'")
        if self.mode in ("verify",):
            return self
        if self.mode == "continuation":
            from .continuation import ContinuationPlan

            try:
                plan = ContinuationPlan.parse(self.stages) if self.stages else None
            except ValueError as exc:
                raise ConfigError("stage", str(exc)) from None
            if plan is not None:
                for s in plan.stages:
                    self._check_rho(builtin_problem(s.problem))
            return self
        try:
            problem = builtin_problem(self.problem)
        except (KeyError, ValueError) as exc:
            raise ConfigError("problem", str(exc)) from None
        try:
            Architecture.parse(self.arch)
        except ValueError as exc:
            raise ConfigError("arch", str(exc)) from None
        if self.mode == "report":
            if not self.checkpoint:
                raise ConfigError("checkpoint", "report mode needs a checkpoint path")
            return self
        if self.iterations < 0:
            raise ConfigError("iterations", "must be non-negative")
        try:
            Schedule.parse(self.schedule).check(self.iterations)
        except ValueError as exc:
            raise ConfigError("schedule", str(exc)) from None
        if self.boundary_weight is not None and not self.boundary_weight > 0:
            raise ConfigError("boundary_weight", "must be positive")
        try:
            build_uniform_mesh(problem.domain, self.h)
        except ConfigurationError as exc:
            raise ConfigError("h", str(exc)) from None
        self._check_rho(problem)
        return self

    def _check_rho(self, problem) -> None:
        try:
            rho = self.rho_value()
        except ValueError as exc:
            raise ConfigError("rho", str(exc)) from None
        if rho is None:
            rho = problem.rho_factor * self.h
        if not 0 < rho < self.h:
            raise ConfigError("rho", f"must satisfy 0 < rho < h, got rho={rho!r}, h={self.h!r}")


def resolve_rho(spec: str | None, h: float) -> float | None:
    """``None`` -> None, ``"0.005"`` -> 0.005, ``"h/2"`` -> h/2, ``"0.1h"`` or ``"h*0.1"`` -> h/10."""
    if spec is None:
        return None
    s = spec.replace(" ", "").lower()
    if "h" not in s:
        return float(s)
    if s == "h":
        return h
    if s.startswith("h/"):
        return h / float(s[2:])
    if s.startswith("h*"):
        return h * float(s[2:])
    if s.endswith("*h"):
        return float(Fraction(s[:-2])) * h
    if s.endswith("h"):
        return float(Fraction(s[:-1])) * h
    raise ValueError(f"cannot parse rho {spec!r}")


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(" ", "").split(",") if v)


_OPTIONAL_FLOAT = lambda s: None if s.lower() in ("", "none", "default") else float(s)  # noqa: E731

_CONVERTERS = {
    "mode": str,
    "problem": str,
    "arch": str,
    "iterations": int,
    "schedule": str,
    "rho": lambda s: None if s.lower() in ("", "none", "default") else s,
    "boundary_weight": _OPTIONAL_FLOAT,
    "h": float,
    "seeds": _int_list,
    "seed": lambda s: (int(s),),
    "k": int,
    "output_dir": str,
    "output_init": str,
    "scale_by_speed": _bool,
    "workers": int,
    "eval_h": _OPTIONAL_FLOAT,
    "checkpoint": str,
}


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig(text=text)
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if not eq:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        if key == "stage":
            cfg.stages.append(value)
            continue
        if key not in _CONVERTERS:
            raise ConfigError(key, f"unknown key (line {lineno})")
        if key in seen:
            raise ConfigError(key, f"given twice (line {lineno})")
        seen.add(key)
        try:
            converted = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigError(key, f"bad value {value!r}: {exc}") from None
        setattr(cfg, "seeds" if key == "seed" else key, converted)
    return cfg


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text()).validate()
