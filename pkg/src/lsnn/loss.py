"""Discrete least-squares functional and its parameter gradient.

Interior residuals use a backward difference along the unit advection
direction, rescaled by the local speed |beta| so the quotient approximates
beta . grad v. The inflow term is the |beta.n|-weighted squared mismatch at
edge centroids.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .benchmarks import BenchmarkProblem
from .fields import unit_vectors
from .geometry import ConfigurationError, IntegrationMesh, build_mesh
from .network import Parameters, forward, value_and_vjp

CHUNK_CELLS = 32768


class NumericError(FloatingPointError):
    pass


@dataclass(frozen=True)
class LossConfig:
    rho: float
    boundary_weight: float = 1.0
    scale_by_speed: bool = True

    def __post_init__(self):
        if not self.rho > 0:
            raise ConfigurationError(f"rho must be positive, got {self.rho}")
        if not self.boundary_weight > 0:
            raise ConfigurationError(f"boundary_weight must be positive, got {self.boundary_weight}")

    @classmethod
    def for_problem(cls, problem: BenchmarkProblem, h: float, **kw) -> LossConfig:
        kw.setdefault("boundary_weight", problem.boundary_weight)
        return cls(rho=problem.rho_factor * h, **kw)


@dataclass(frozen=True)
class LossValue:
    interior: float
    boundary: float
    total: float


def fd_directional_derivative(evaluate, x, beta_unit, rho: float):
    x = np.asarray(x, dtype=float)
    beta_unit = np.asarray(beta_unit, dtype=float)
    return (evaluate(x) - evaluate(x - rho * beta_unit)) / rho


class LossPlan:
    """Quadrature data of the functional for one (mesh, problem, config) triple.

    The interior residual at cell K is ``a_K v(x_K) + b_K v(x_K - rho e_K) - f_K``.
    With ``homogeneous=True`` the data f and g are replaced by zero.
    """

    def __init__(self, mesh: IntegrationMesh, problem: BenchmarkProblem, cfg: LossConfig,
                 homogeneous: bool = False, workers: int = 1, check_rho: bool = True):
        if check_rho and cfg.rho >= mesh.h:
            raise ConfigurationError(f"rho={cfg.rho} must be smaller than h={mesh.h}")
        if mesh.n_edges == 0:
            raise ConfigurationError(f"{problem.id}: empty inflow boundary, problem is ill-posed")
        self.mesh, self.problem, self.cfg, self.workers = mesh, problem, cfg, workers
        xk = mesh.cell_centroids
        unit, speed = unit_vectors(problem.beta, xk)
        scale = speed if cfg.scale_by_speed else np.ones_like(speed)
        self.x_cells = xk
        self.x_back = xk - cfg.rho * unit
        self.a = scale / cfg.rho + problem.reaction(xk)
        self.b = -scale / cfg.rho
        self.f = np.zeros(len(xk)) if homogeneous else problem.f(xk)
        self.w_cells = mesh.cell_measures
        self.x_edges = mesh.edge_centroids
        self.g = np.zeros(mesh.n_edges) if homogeneous else problem.g(self.x_edges)
        self.w_edges = mesh.edge_weights * mesh.edge_measures
        n = len(xk)
        bounds = list(range(0, n, CHUNK_CELLS)) + [n]
        self.chunks = [(bounds[i], bounds[i + 1], i == len(bounds) - 2) for i in range(len(bounds) - 1)]
        self._stacks = [self._stack(*c) for c in self.chunks]

    def _stack(self, lo, hi, with_edges):
        parts = [self.x_cells[lo:hi], self.x_back[lo:hi]]
        if with_edges:
            parts.append(self.x_edges)
        return np.ascontiguousarray(np.concatenate(parts).T)

    def _chunk(self, params: Parameters, k: int, need_grad: bool):
        lo, hi, with_edges = self.chunks[k]
        m = hi - lo
        X = self._stacks[k]
        a, b, f, w = self.a[lo:hi], self.b[lo:hi], self.f[lo:hi], self.w_cells[lo:hi]
        alpha = self.cfg.boundary_weight
        sums = {}

        def upstream(out):
            r = a * out[:m] + b * out[m:2 * m] - f
            if not np.all(np.isfinite(r)):
                i = lo + int(np.argmin(np.isfinite(r)))
                raise NumericError(f"non-finite residual at cell {i} {tuple(self.x_cells[i])}")
            sums["interior"] = float(np.sum(w * r * r))
            wr = 2.0 * w * r
            parts = [wr * a, wr * b]
            if with_edges:
                e = out[2 * m:] - self.g
                if not np.all(np.isfinite(e)):
                    i = int(np.argmin(np.isfinite(e)))
                    raise NumericError(f"non-finite residual at inflow edge {i} {tuple(self.x_edges[i])}")
                sums["boundary"] = float(np.sum(self.w_edges * e * e))
                parts.append(2.0 * alpha * self.w_edges * e)
            else:
                sums["boundary"] = 0.0
            return np.concatenate(parts)

        if need_grad:
            _, _, grad = value_and_vjp(params, X, upstream)
        else:
            upstream(forward(params, X.T))
            grad = None
        return sums["interior"], sums["boundary"], grad

    def _run(self, params, need_grad):
        ks = range(len(self.chunks))
        if self.workers > 1 and len(self.chunks) > 1:
            with ThreadPoolExecutor(self.workers) as ex:
                results = list(ex.map(lambda k: self._chunk(params, k, need_grad), ks))
        else:
            results = [self._chunk(params, k, need_grad) for k in ks]
        interior = boundary = 0.0
        grad = None
        for i_, b_, g_ in results:  # fixed order regardless of worker count
            interior += i_
            boundary += b_
            if need_grad:
                grad = g_.copy() if grad is None else grad + g_
        value = LossValue(interior, boundary, interior + self.cfg.boundary_weight * boundary)
        return value, grad

    def value(self, params: Parameters) -> LossValue:
        return self._run(params, need_grad=False)[0]

    def value_and_grad(self, params: Parameters) -> tuple[LossValue, np.ndarray]:
        return self._run(params, need_grad=True)

    def residuals(self, params: Parameters) -> tuple[np.ndarray, np.ndarray]:
        """Interior and inflow residual vectors."""
        vk = forward(params, self.x_cells)
        vb = forward(params, self.x_back)
        ve = forward(params, self.x_edges)
        return self.a * vk + self.b * vb - self.f, ve - self.g


def discrete_loss(params: Parameters, mesh: IntegrationMesh, problem: BenchmarkProblem,
                  cfg: LossConfig) -> LossValue:
    return LossPlan(mesh, problem, cfg).value(params)


def loss_gradient(params: Parameters, mesh: IntegrationMesh, problem: BenchmarkProblem,
                  cfg: LossConfig) -> np.ndarray:
    return LossPlan(mesh, problem, cfg).value_and_grad(params)[1]


def continuous_loss(params: Parameters, problem: BenchmarkProblem, fine_h: float, cfg: LossConfig,
                    homogeneous: bool = False) -> LossValue:
    """Functional on a refined mesh with the same rho (rho may exceed fine_h here)."""
    mesh = build_mesh(problem.domain, fine_h, problem.beta)
    return LossPlan(mesh, problem, cfg, homogeneous=homogeneous, check_rho=False).value(params)
