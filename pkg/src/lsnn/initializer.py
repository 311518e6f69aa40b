"""Initialization of ReLU networks for the least-squares functional.

The first layer gets axis-aligned breaking lines that partition the domain
uniformly. For two-layer networks the output layer solves the Galerkin
system of the least-squares bilinear form on the basis {1, relu(w_i.x - b_i)}.
For deeper networks the intermediate layers are random and the output layer
minimizes the discrete functional over the frozen last-hidden-layer basis.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .benchmarks import BenchmarkProblem
from .geometry import Domain, IntegrationMesh
from .loss import LossConfig, LossPlan
from .network import Architecture, Parameters, hidden_features

log = logging.getLogger(__name__)


class DegenerateBasisError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class BasisSet:
    """Hyperplanes w_i.x = b_i; the constant function is implicit."""

    omegas: np.ndarray  # (n1, 2)
    offsets: np.ndarray  # (n1,)

    def __len__(self):
        return len(self.offsets)

    def check_distinct(self, tol: float = 1e-12) -> None:
        keys = []
        for w, b in zip(self.omegas, self.offsets):
            nrm = np.hypot(*w)
            if nrm == 0:
                raise DegenerateBasisError("hyperplane with zero normal")
            w, b = w / nrm, b / nrm
            lead = w[0] if abs(w[0]) > tol else w[1]
            if lead < 0:
                w, b = -w, -b
            for k in keys:
                if np.all(np.abs(k - (w[0], w[1], b)) <= tol):
                    raise DegenerateBasisError(f"duplicate hyperplane {tuple(w)}.x = {b}")
            keys.append(np.array([w[0], w[1], b]))


def uniform_hyperplanes(domain: Domain, n1: int) -> BasisSet:
    """ceil(n1/2) equally spaced vertical lines, then floor(n1/2) horizontal ones."""
    if n1 < 1:
        raise ValueError("need at least one neuron")
    nv, nh = (n1 + 1) // 2, n1 // 2
    xs = domain.x_lo + np.arange(1, nv + 1) * domain.width / (nv + 1)
    ys = domain.y_lo + np.arange(1, nh + 1) * domain.height / (nh + 1)
    omegas = np.vstack([np.tile([1.0, 0.0], (nv, 1)), np.tile([0.0, 1.0], (nh, 1))])
    return BasisSet(omegas, np.concatenate([xs, ys]))


@dataclass(frozen=True)
class GalerkinSystem:
    A: np.ndarray
    F: np.ndarray


def _basis_values(basis: BasisSet, pts: np.ndarray) -> np.ndarray:
    z = basis.omegas @ pts.T - basis.offsets[:, None]
    return np.vstack([np.ones(len(pts)), np.maximum(z, 0.0)]), z


def assemble_system(basis: BasisSet, mesh: IntegrationMesh, problem: BenchmarkProblem,
                    boundary_weight: float = 1.0) -> GalerkinSystem:
    """A_ij = (L phi_j, L phi_i) + <phi_j, phi_i>_-beta with L v = v_beta + gamma_hat v.

    Directional derivatives are exact: (beta . w_i) on {w_i . x > b_i}.
    """
    basis.check_distinct()
    xk = mesh.cell_centroids
    phi, z = _basis_values(basis, xk)
    beta = problem.beta(xk)
    slope = (basis.omegas @ beta.T) * (z > 0.0)
    Lphi = problem.reaction(xk) * phi
    Lphi[1:] += slope
    wk = mesh.cell_measures
    phi_e, _ = _basis_values(basis, mesh.edge_centroids)
    we = boundary_weight * mesh.edge_weights * mesh.edge_measures
    A = (Lphi * wk) @ Lphi.T + (phi_e * we) @ phi_e.T
    A = 0.5 * (A + A.T)
    F = (Lphi * wk) @ problem.f(xk) + (phi_e * we) @ problem.g(mesh.edge_centroids)
    return GalerkinSystem(A, F)


def smallest_pivot(A: np.ndarray) -> float:
    _, d, _ = scipy.linalg.ldl(A)
    return float(np.min(np.diag(d)))


def solve_output_weights(system: GalerkinSystem) -> np.ndarray:
    """Solve A c = F by Cholesky; raises DegenerateBasisError if A is not numerically SPD."""
    A, F = system.A, system.F
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise DegenerateBasisError(
            f"Cholesky failed, smallest pivot {smallest_pivot(A):.3e}") from exc
    piv = np.diag(factor[0]) ** 2
    if piv.min() <= 1e-12 * piv.max():
        raise DegenerateBasisError(f"near-degenerate basis, smallest pivot {piv.min():.3e}")
    c = scipy.linalg.cho_solve(factor, F)
    # one step of iterative refinement
    c += scipy.linalg.cho_solve(factor, F - A @ c)
    return c


def minimize_quadratic(system: GalerkinSystem) -> np.ndarray:
    """Cholesky solve, or the minimum-norm minimizer when the quadrature makes A singular.

    Distinct hyperplanes can still coincide on the quadrature points (two lines
    between the same rows of centroids), which leaves A only semidefinite.
    """
    try:
        return solve_output_weights(system)
    except DegenerateBasisError as exc:
        log.warning("%s; using the minimum-norm least-squares solution", exc)
        return scipy.linalg.lstsq(system.A, system.F, cond=1e-12)[0]


def quadratic_objective(system: GalerkinSystem, c: np.ndarray) -> float:
    return 0.5 * c @ system.A @ c - system.F @ c


def solve_output_layer(params: Parameters, plan: LossPlan, dead_tol: float = 1e-12) -> Parameters:
    """Replace the output layer by the minimizer of the discrete functional with
    all hidden layers frozen. Features that vanish on every quadrature point get
    a zero weight."""
    Hk = hidden_features(params, plan.x_cells)
    Hb = hidden_features(params, plan.x_back)
    He = hidden_features(params, plan.x_edges)
    # design rows for v = H w + c0
    R = np.hstack([plan.a[:, None] * Hk + plan.b[:, None] * Hb, (plan.a + plan.b)[:, None]])
    B = np.hstack([He, np.ones((len(He), 1))])
    wk = plan.w_cells
    we = plan.cfg.boundary_weight * plan.w_edges
    G = (R.T * wk) @ R + (B.T * we) @ B
    rhs = (R.T * wk) @ plan.f + (B.T * we) @ plan.g
    G = 0.5 * (G + G.T)
    scale = np.abs(np.vstack([Hk, He])).max(axis=0, initial=0.0)
    live = np.concatenate([scale > dead_tol, [True]])
    coef = np.zeros(len(rhs))
    coef[live] = minimize_quadratic(GalerkinSystem(G[np.ix_(live, live)], rhs[live]))
    out = params.copy()
    L = params.arch.depth
    out.W(L - 1)[0] = coef[:-1]
    out.b(L - 1)[0] = -coef[-1]
    return out


def random_layer(rng: np.random.Generator, rows: int, cols: int) -> tuple[np.ndarray, np.ndarray]:
    """Weights and biases uniform on [-1/sqrt(cols), 1/sqrt(cols)]."""
    s = math.sqrt(1.0 / cols)
    return rng.uniform(-s, s, (rows, cols)), rng.uniform(-s, s, rows)


def random_hyperplanes(rng: np.random.Generator, domain: Domain, n: int) -> BasisSet:
    """Lines with uniformly random direction through uniformly random domain points."""
    ang = rng.uniform(0.0, 2.0 * math.pi, n)
    omegas = np.column_stack([np.cos(ang), np.sin(ang)])
    pts = np.column_stack([rng.uniform(domain.x_lo, domain.x_hi, n),
                           rng.uniform(domain.y_lo, domain.y_hi, n)])
    return BasisSet(omegas, np.einsum("ij,ij->i", omegas, pts))


def initialize_network(arch: Architecture, problem: BenchmarkProblem, mesh: IntegrationMesh,
                       cfg: LossConfig, seed: int = 0, output_init: str = "solve",
                       plan: LossPlan | None = None) -> Parameters:
    if output_init not in ("solve", "random"):
        raise ValueError(f"output_init must be 'solve' or 'random', got {output_init!r}")
    rng = np.random.default_rng(seed)
    params = Parameters(arch)
    basis = uniform_hyperplanes(problem.domain, arch.widths[1])
    params.W(0)[...] = basis.omegas
    params.b(0)[...] = basis.offsets
    L = arch.depth
    for l in range(1, L - 1):
        r, c = arch.layer_shapes[l]
        params.W(l)[...], params.b(l)[...] = random_layer(rng, r, c)
    if output_init == "random":
        r, c = arch.layer_shapes[-1]
        params.W(L - 1)[...], params.b(L - 1)[...] = random_layer(rng, r, c)
        return params
    if L == 2:
        c = minimize_quadratic(assemble_system(basis, mesh, problem, cfg.boundary_weight))
        params.W(1)[0] = c[1:]
        params.b(1)[0] = -c[0]
        return params
    if plan is None:
        plan = LossPlan(mesh, problem, cfg)
    return solve_output_layer(params, plan)
