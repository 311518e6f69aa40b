"""Built-in advection-reaction test problems with exact solutions.

Each problem is a bundle of vectorized callables on ``(N, 2)`` point arrays.
Discontinuities are resolved one-sided by the strict inequalities used in
the definitions below; no value is ever averaged across an interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fields import SQRT2, VelocityField, sector_angles, sector_index
from .geometry import Domain

PointFn = Callable[[np.ndarray], np.ndarray]

A_RADIUS = 43.0 / 64.0
XI1 = np.array([1.0, SQRT2 - 1.0])
XI2 = np.array([SQRT2 - 1.0, 1.0])


@dataclass(frozen=True)
class BenchmarkProblem:
    id: str
    domain: Domain
    beta: VelocityField
    gamma_hat: float
    f: PointFn
    g: PointFn
    exact_u: PointFn
    exact_u_beta: PointFn
    interface_distance: PointFn
    rho_factor: float = 0.5
    boundary_weight: float = 1.0
    # interfaces pass through the centroid grid of the default mesh
    interfaces_on_grid: bool = False

    def reaction(self, pts) -> np.ndarray:
        return np.full(len(np.atleast_2d(pts)), float(self.gamma_hat))


def _xy(pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    return pts[:, 0], pts[:, 1]


def _zero(pts):
    return np.zeros(len(np.atleast_2d(pts)))


def _vline_u(pts):
    x, _ = _xy(pts)
    return np.where(x > math.pi / 3, 1.0, 0.0)


def _diag_u(pts):
    x, y = _xy(pts)
    return np.where(y > x, 1.0, 0.0)


def _smooth_u(pts):
    x, y = _xy(pts)
    return np.where(y > x, np.sin(y - x), np.cos(x - y))


def _twojump_u(pts):
    x, y = _xy(pts)
    s = x - y
    bump = (s > -0.9) & (s < -0.6)
    step = (s > -0.2) & (s < 0.1)
    return np.where(bump, np.sin(math.pi * (s + 0.9) / 0.3), np.where(step, -1.0, 0.0))


def _twosector_u(pts):
    x, y = _xy(pts)
    lower = y < x
    inside = np.where(lower, XI1[0] * x + XI1[1] * y < A_RADIUS, XI2[0] * x + XI2[1] * y < A_RADIUS)
    return np.where(inside, -1.0, 1.0)


def _twosector_dist(pts):
    x, y = _xy(pts)
    lower = y < x
    d1 = np.abs(XI1[0] * x + XI1[1] * y - A_RADIUS) / np.linalg.norm(XI1)
    d2 = np.abs(XI2[0] * x + XI2[1] * y - A_RADIUS) / np.linalg.norm(XI2)
    return np.where(lower, d1, d2)


def _rot_u(pts):
    x, y = _xy(pts)
    return np.where(x * x + y * y < A_RADIUS ** 2, -1.0, 1.0)


def _inflow_bottom_split(pts):
    """-1 on the bottom for x < a, +1 elsewhere on the inflow boundary."""
    x, y = _xy(pts)
    return np.where((y <= 0.0) & (x < A_RADIUS), -1.0, 1.0)


def exact_solution_sectors(n: int, a: float = A_RADIUS) -> PointFn:
    """Exact solution for the n-chord field: -1 inside the chord polygon of radius a, +1 outside."""
    if n < 2 or not 0 < a < 1:
        raise ValueError("need n >= 2 and 0 < a < 1")
    t = sector_angles(n)
    mid = 0.5 * (t[1:] + t[:-1])
    normals = np.column_stack([np.cos(mid), np.sin(mid)])
    level = a * math.cos(math.pi / (4 * n))

    def u(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        i = sector_index(n, pts)
        proj = np.einsum("ij,ij->i", normals[i], pts)
        return np.where(proj < level, -1.0, 1.0)

    def dist(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        i = sector_index(n, pts)
        return np.abs(np.einsum("ij,ij->i", normals[i], pts) - level)

    u.interface_distance = dist
    return u


def _sectors_problem(n: int) -> BenchmarkProblem:
    u = exact_solution_sectors(n)
    return BenchmarkProblem(
        f"sectors:{n}", Domain(0, 1, 0, 1), VelocityField.sectors(n), 0.0,
        _zero, _inflow_bottom_split, u, _zero, u.interface_distance,
    )


def builtin_problem(pid: str) -> BenchmarkProblem:
    """Look up one of vline, diagonal, smooth, twojump, twosector, rotational, sectors:<n>."""
    if pid.startswith("sectors:"):
        return _sectors_problem(int(pid.split(":", 1)[1]))
    diag = VelocityField.constant(1 / SQRT2, 1 / SQRT2)
    if pid == "vline":
        return BenchmarkProblem(
            "vline", Domain(0, 2, 0, 1), VelocityField.constant(0, 1), 0.0,
            _zero, _vline_u, _vline_u, _zero, lambda p: np.abs(_xy(p)[0] - math.pi / 3),
        )
    if pid == "diagonal":
        return BenchmarkProblem(
            "diagonal", Domain(-1, 1, -1, 1), diag, 1.0,
            _diag_u, _diag_u, _diag_u, _zero,
            lambda p: np.abs(_xy(p)[0] - _xy(p)[1]) / SQRT2, interfaces_on_grid=True,
        )
    if pid == "smooth":
        return BenchmarkProblem(
            "smooth", Domain(0, 1, 0, 1), diag, 0.0,
            _zero, _smooth_u, _smooth_u, _zero,
            lambda p: np.abs(_xy(p)[0] - _xy(p)[1]) / SQRT2, interfaces_on_grid=True,
        )
    if pid == "twojump":
        def dist(p):
            s = _xy(p)[0] - _xy(p)[1]
            return np.minimum(np.abs(s + 0.2), np.abs(s - 0.1)) / SQRT2
        return BenchmarkProblem(
            "twojump", Domain(-1, 1, 0, 1), diag, 1.0,
            _twojump_u, _twojump_u, _twojump_u, _zero, dist,
            boundary_weight=10.0, interfaces_on_grid=True,
        )
    if pid == "twosector":
        return BenchmarkProblem(
            "twosector", Domain(0, 1, 0, 1), VelocityField.two_sector(), 0.0,
            _zero, _inflow_bottom_split, _twosector_u, _zero, _twosector_dist,
        )
    if pid == "rotational":
        return BenchmarkProblem(
            "rotational", Domain(0, 1, 0, 1), VelocityField.rotational(), 0.0,
            _zero, _inflow_bottom_split, _rot_u, _zero,
            lambda p: np.abs(np.hypot(*_xy(p)) - A_RADIUS), rho_factor=0.1,
        )
    raise KeyError(f"unknown problem {pid!r}")


BUILTIN_IDS = ("vline", "diagonal", "smooth", "twojump", "twosector", "rotational")


def check_interface_clearance(problem: BenchmarkProblem, pts, tol: float = 1e-9) -> int:
    """Number of quadrature points within ``tol`` of a discontinuity.

    Raises for problems whose interfaces are supposed to miss the grid.
    """
    count = int(np.sum(problem.interface_distance(pts) <= tol))
    if count and not problem.interfaces_on_grid:
        raise ValueError(f"{problem.id}: {count} quadrature points lie on an interface")
    return count
