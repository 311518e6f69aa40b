"""Property suites: analytic constructions, gradient exactness, SPD initialization
and the transplant embedding identity. Each check returns a ``Check`` record."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .benchmarks import A_RADIUS, XI1, XI2, builtin_problem
from .fields import unit_vectors
from .geometry import IntegrationMesh, build_mesh, diameter
from .initializer import BasisSet, assemble_system, random_hyperplanes, solve_output_weights
from .loss import LossConfig, LossPlan
from .network import (Architecture, Parameters, construct_lemma32, construct_lemma51, forward,
                      kink_margin)


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    detail: str


# constructions

def lemma32_error(eps: float, n: int = 2_000_000) -> float:
    """||chi - p||_0 on (0,2)x(0,1) for the ramp across x = pi/3.

    Both functions depend on x only, so a fine 1-D midpoint rule in x times the
    unit height is exact up to the single cell holding the jump.
    """
    c = math.pi / 3
    net = construct_lemma32((1.0, 0.0), c, 0.0, 1.0, eps)
    x = (np.arange(n) + 0.5) * (2.0 / n)
    p = forward(net, np.column_stack([x, np.full(n, 0.5)]))
    chi = (x > c).astype(float)
    return math.sqrt(float(np.sum((chi - p) ** 2)) * 2.0 / n)


def lemma32_bound(eps: float) -> float:
    D = diameter(builtin_problem("vline").domain)
    return math.sqrt(D) * math.sqrt(eps) / math.sqrt(6.0)


def lemma51_net(eps: float) -> Parameters:
    return construct_lemma51(XI1, XI2, A_RADIUS, -1.0, 1.0, eps)


def lemma51_error(eps: float, n: int = 2000) -> float:
    """||chi - p||_0 on (0,1)^2 against the two-sector exact solution, n x n midpoint rule."""
    problem = builtin_problem("twosector")
    t = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(t, t)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    d = problem.exact_u(pts) - forward(lemma51_net(eps), pts)
    return math.sqrt(float(np.sum(d * d)) / (n * n))


def lemma51_bound(eps: float) -> float:
    D = diameter(builtin_problem("twosector").domain)
    return math.sqrt(2.0 / 3.0) * math.sqrt(D) * 2.0 * math.sqrt(eps)


def ramp(xi, a, alpha1, alpha2, eps, pts):
    s = pts @ np.asarray(xi, float)
    k = (alpha2 - alpha1) / (2 * eps)
    return alpha1 + k * (np.maximum(s - a + eps, 0) - np.maximum(s - a - eps, 0))


def construction_checks(rng: np.random.Generator) -> list[Check]:
    out = []
    epss = [0.2, 0.1, 0.05, 0.025]
    errs = [lemma32_error(e) for e in epss]
    for e, err in zip(epss, errs):
        ref = math.sqrt(e / 6.0)
        rel = abs(err - ref) / ref
        out.append(Check("construction", f"lemma32 eps={e} matches sqrt(eps/6)", rel <= 1e-3,
                         f"err={err:.6g} ref={ref:.6g} rel={rel:.2e}"))
        b = lemma32_bound(e)
        out.append(Check("construction", f"lemma32 eps={e} within bound", err <= b, f"err={err:.6g} bound={b:.6g}"))
    slope = float(np.polyfit(np.log(epss), np.log(errs), 1)[0])
    out.append(Check("construction", "lemma32 error ~ sqrt(eps)", abs(slope - 0.5) <= 0.02, f"slope={slope:.4f}"))

    pts = rng.uniform(-1.5, 1.5, (10_000, 2))
    for eps in (0.1, 0.05):
        net = lemma51_net(eps)
        ref = np.maximum(ramp(XI1, A_RADIUS, -1, 1, eps, pts), ramp(XI2, A_RADIUS, -1, 1, eps, pts))
        dev = float(np.max(np.abs(forward(net, pts) - ref)))
        out.append(Check("construction", f"lemma51 eps={eps} equals max of ramps", dev <= 1e-14, f"maxdev={dev:.2e}"))
        err, b = lemma51_error(eps), lemma51_bound(eps)
        out.append(Check("construction", f"lemma51 eps={eps} within bound", err <= b, f"err={err:.6g} bound={b:.6g}"))
    return out


# gradients

def random_params(rng: np.random.Generator, arch: Architecture, domain) -> Parameters:
    p = Parameters(arch)
    hp = random_hyperplanes(rng, domain, arch.widths[1])
    p.W(0)[...], p.b(0)[...] = hp.omegas, hp.offsets
    for l in range(1, arch.depth):
        r, c = arch.layer_shapes[l]
        p.W(l)[...] = rng.normal(0, 1 / math.sqrt(c), (r, c))
        p.b(l)[...] = rng.normal(0, 0.3, r)
    return p


def fd_gradient(plan: LossPlan, params: Parameters, step: float = 1e-6) -> np.ndarray:
    g = np.empty(params.arch.n_params)
    for i in range(len(g)):
        up, dn = params.copy(), params.copy()
        up.theta[i] += step
        dn.theta[i] -= step
        g[i] = (plan.value(up).total - plan.value(dn).total) / (2 * step)
    return g


def kink_free_mesh(params: Parameters, mesh: IntegrationMesh, problem, cfg: LossConfig,
                   margin: float = 1e-4) -> IntegrationMesh:
    """Sub-mesh keeping cells whose centroid and back point, and edges whose
    centroid, have every pre-activation at least ``margin`` away from zero."""
    unit, _ = unit_vectors(problem.beta, mesh.cell_centroids)
    back = mesh.cell_centroids - cfg.rho * unit
    keep = (kink_margin(params, mesh.cell_centroids) > margin) & (kink_margin(params, back) > margin)
    keep_e = kink_margin(params, mesh.edge_centroids) > margin
    return replace(mesh, cell_centroids=mesh.cell_centroids[keep], cell_measures=mesh.cell_measures[keep],
                   edge_centroids=mesh.edge_centroids[keep_e], edge_measures=mesh.edge_measures[keep_e],
                   edge_normals=mesh.edge_normals[keep_e], edge_weights=mesh.edge_weights[keep_e])


GRADIENT_CASES = (("vline", "2-4-1"), ("diagonal", "2-5-5-1"), ("twosector", "2-6-6-1"))


def gradient_checks(rng: np.random.Generator, nets: int = 5, h: float = 0.02) -> list[Check]:
    out = []
    for pid, arch_text in GRADIENT_CASES:
        problem = builtin_problem(pid)
        mesh = build_mesh(problem.domain, h, problem.beta)
        cfg = LossConfig.for_problem(problem, h)
        arch = Architecture.parse(arch_text)
        for j in range(nets):
            params = random_params(rng, arch, problem.domain)
            plan = LossPlan(kink_free_mesh(params, mesh, problem, cfg), problem, cfg)
            _, g = plan.value_and_grad(params)
            fd = fd_gradient(plan, params)
            rel = float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-300))
            out.append(Check("gradient", f"{pid} {arch_text} net {j}", rel <= 1e-5, f"rel={rel:.2e}"))
    return out


# SPD initialization

def one_basis_c0(h: float) -> float:
    problem = builtin_problem("vline")
    mesh = build_mesh(problem.domain, h, problem.beta)
    system = assemble_system(BasisSet(np.zeros((0, 2)), np.zeros(0)), mesh, problem)
    return float(solve_output_weights(system)[0])


def spd_checks(rng: np.random.Generator, bases: int = 50) -> list[Check]:
    out = []
    meshes = {}
    for pid in ("vline", "diagonal"):
        pr = builtin_problem(pid)
        meshes[pid] = (pr, build_mesh(pr.domain, 0.01, pr.beta))
    fails = []
    for j in range(bases):
        pr, mesh = meshes[("vline", "diagonal")[j % 2]]
        basis = random_hyperplanes(rng, pr.domain, int(rng.integers(2, 21)))
        A = assemble_system(basis, mesh, pr).A
        try:
            scipy.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            fails.append(j)
    out.append(Check("spd", f"{bases} random bases factorize", not fails, f"failed={fails}"))
    exact = 1.0 - math.pi / 6.0
    for h, tol in ((0.01, 1e-2), (0.001, 1e-6)):
        c0 = one_basis_c0(h)
        out.append(Check("spd", f"one-basis c0 at h={h} within {tol:g}", abs(c0 - exact) <= tol,
                         f"c0={c0:.9f} exact={exact:.9f} diff={abs(c0 - exact):.2e}"))
    return out


# embedding identity

def embedding_checks(rng: np.random.Generator) -> list[Check]:
    from .continuation import grow_and_transplant

    problem = builtin_problem("twosector")
    small = random_params(rng, Architecture.parse("2-5-5-1"), problem.domain)
    big = grow_and_transplant(small, Architecture.parse("2-6-6-1"), 7, problem.domain)
    pts = rng.uniform(0, 1, (1000, 2))
    dev = float(np.max(np.abs(forward(big, pts) - forward(small, pts))))
    return [Check("embedding", "grown net equals small net before re-solve", dev == 0.0, f"maxdev={dev:.2e}")]


SUITES = {
    "construction": construction_checks,
    "gradient": gradient_checks,
    "spd": spd_checks,
    "embedding": embedding_checks,
}


def run_verify(seed: int = 0, suites=None) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks = []
    for name in suites or SUITES:
        checks.extend(SUITES[name](rng))
    return checks
