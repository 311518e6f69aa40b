"""Error norms, cross-section traces and overshoot measurement."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .benchmarks import BenchmarkProblem
from .fields import unit_vectors
from .geometry import Domain, IntegrationMesh
from .loss import LossConfig, LossPlan
from .network import Parameters, forward, param_count_paper


@dataclass(frozen=True)
class ErrorMetrics:
    rel_l2: float
    rel_vbeta: float
    loss_ratio: float
    param_count_paper: int


def _ratio(num: float, den: float, what: str) -> float:
    if den <= 0:
        raise ZeroDivisionError(f"zero reference norm in {what}")
    return math.sqrt(num / den)


def rel_l2_error(params: Parameters, exact, mesh: IntegrationMesh) -> float:
    xk = mesh.cell_centroids
    u = exact(xk)
    d = u - forward(params, xk)
    w = mesh.cell_measures
    return _ratio(float(np.sum(w * d * d)), float(np.sum(w * u * u)), "relative L2 error")


def error_metrics(params: Parameters, problem: BenchmarkProblem, eval_mesh: IntegrationMesh,
                  cfg: LossConfig) -> ErrorMetrics:
    """Relative L2 and V_beta errors by centroid quadrature, plus the loss ratio.

    The network's directional derivative is the same scaled backward quotient
    used in training; the exact one is analytic.
    """
    xk = eval_mesh.cell_centroids
    w = eval_mesh.cell_measures
    unit, speed = unit_vectors(problem.beta, xk)
    scale = speed if cfg.scale_by_speed else np.ones_like(speed)
    v = forward(params, xk)
    v_beta = scale * (v - forward(params, xk - cfg.rho * unit)) / cfg.rho
    u = problem.exact_u(xk)
    u_beta = problem.exact_u_beta(xk)
    d, db = u - v, u_beta - v_beta
    rel_l2 = _ratio(float(np.sum(w * d * d)), float(np.sum(w * u * u)), "relative L2 error")
    rel_vbeta = _ratio(float(np.sum(w * (d * d + db * db))), float(np.sum(w * (u * u + u_beta * u_beta))),
                       "relative V_beta error")
    full = LossPlan(eval_mesh, problem, cfg, check_rho=False).value(params).total
    homog = LossPlan(eval_mesh, problem, cfg, homogeneous=True, check_rho=False).value(params).total
    return ErrorMetrics(rel_l2, rel_vbeta, _ratio(full, homog, "loss ratio"), param_count_paper(params.arch))


# cross sections

@dataclass(frozen=True)
class Line:
    """Either the vertical line x = c (slope None) or y = slope * x + intercept."""

    slope: float | None
    intercept: float
    text: str = ""

    @classmethod
    def parse(cls, text: str) -> Line:
        s = text.replace(" ", "").lower()
        lhs, eq, rhs = s.partition("=")
        if not eq or lhs not in ("x", "y") or not rhs or rhs[-1] in "+-*":
            raise ValueError(f"cannot parse line {text!r}; use 'x=<c>' or 'y=<a>*x+<b>'")
        if lhs == "x":
            return cls(None, float(rhs), text)
        slope = intercept = 0.0
        for term in re.findall(r"[+-]?[^+-]+", rhs):
            if term.endswith("x"):
                coef = term[:-1].rstrip("*")
                slope += float(coef + "1") if coef in ("", "+", "-") else float(coef)
            else:
                intercept += float(term)
        return cls(slope, intercept, text)

    def clip(self, domain: Domain) -> tuple[float, float] | None:
        """Parameter range (x for sloped lines, y for vertical) inside the closed domain."""
        if self.slope is None:
            if not domain.x_lo <= self.intercept <= domain.x_hi:
                return None
            return domain.y_lo, domain.y_hi
        lo, hi = domain.x_lo, domain.x_hi
        m, c = self.slope, self.intercept
        if m != 0:
            xa, xb = sorted(((domain.y_lo - c) / m, (domain.y_hi - c) / m))
            lo, hi = max(lo, xa), min(hi, xb)
        elif not domain.y_lo <= c <= domain.y_hi:
            return None
        return (lo, hi) if lo <= hi else None

    def points(self, t: np.ndarray) -> np.ndarray:
        if self.slope is None:
            return np.column_stack([np.full_like(t, self.intercept), t])
        return np.column_stack([t, self.slope * t + self.intercept])


@dataclass(frozen=True)
class CrossSection:
    t: np.ndarray
    points: np.ndarray
    exact: np.ndarray
    approx: np.ndarray


def cross_section(params: Parameters, problem: BenchmarkProblem, line: Line | str,
                  samples: int = 401) -> CrossSection:
    if isinstance(line, str):
        line = Line.parse(line)
    rng_ = line.clip(problem.domain)
    if rng_ is None:
        raise ValueError(f"line {line.text!r} misses the domain of {problem.id}")
    t = np.linspace(rng_[0], rng_[1], samples)
    pts = line.points(t)
    return CrossSection(t, pts, problem.exact_u(pts), forward(params, pts))


def overshoot_measure(section: CrossSection) -> float:
    over = max(0.0, float(section.approx.max() - section.exact.max()))
    under = max(0.0, float(section.exact.min() - section.approx.min()))
    return over + under


# trace lines used in the figures of each benchmark
FIGURE_LINES = {
    "vline": "y=1",
    "diagonal": "y=-x",
    "smooth": "y=1-x",
    "twojump": "y=0.8",
    "twosector": "x=0",
    "rotational": "x=0",
}
