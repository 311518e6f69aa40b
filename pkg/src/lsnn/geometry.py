"""Rectangular domains, uniform midpoint meshes and inflow-boundary partitions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Raised for inconsistent run or mesh configuration."""


@dataclass(frozen=True)
class Domain:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ConfigurationError(f"degenerate domain {self}")

    @property
    def width(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def height(self) -> float:
        return self.y_hi - self.y_lo

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, pts: np.ndarray, closed: bool = True) -> np.ndarray:
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        if closed:
            return (x >= self.x_lo) & (x <= self.x_hi) & (y >= self.y_lo) & (y <= self.y_hi)
        return (x > self.x_lo) & (x < self.x_hi) & (y > self.y_lo) & (y < self.y_hi)


def diameter(domain: Domain) -> float:
    return math.hypot(domain.width, domain.height)


@dataclass(frozen=True)
class Cell:
    centroid: tuple[float, float]
    measure: float


@dataclass(frozen=True)
class BoundaryEdge:
    centroid: tuple[float, float]
    measure: float
    outward_normal: tuple[float, float]
    inflow_weight: float


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class IntegrationMesh:
    """Midpoint quadrature data stored column-wise.

    ``cell_centroids`` is row-major: x varies fastest, rows of increasing y.
    Edge arrays are empty until :func:`build_inflow_partition` fills them.
    """

    domain: Domain
    h: float
    cell_centroids: np.ndarray
    cell_measures: np.ndarray
    edge_centroids: np.ndarray = field(default_factory=lambda: _frozen(np.zeros((0, 2))))
    edge_measures: np.ndarray = field(default_factory=lambda: _frozen(np.zeros(0)))
    edge_normals: np.ndarray = field(default_factory=lambda: _frozen(np.zeros((0, 2))))
    edge_weights: np.ndarray = field(default_factory=lambda: _frozen(np.zeros(0)))

    @property
    def n_cells(self) -> int:
        return len(self.cell_measures)

    @property
    def n_edges(self) -> int:
        return len(self.edge_measures)

    @property
    def cells(self) -> list[Cell]:
        return [Cell((float(c[0]), float(c[1])), float(m))
                for c, m in zip(self.cell_centroids, self.cell_measures)]

    @property
    def inflow_edges(self) -> list[BoundaryEdge]:
        return [
            BoundaryEdge((float(c[0]), float(c[1])), float(m), (float(n[0]), float(n[1])), float(w))
            for c, m, n, w in zip(self.edge_centroids, self.edge_measures, self.edge_normals,
                                  self.edge_weights)
        ]


def _divisions(length: float, h: float, name: str) -> int:
    n = round(length / h)
    if n < 1 or abs(n * h - length) > 1e-9 * length:
        raise ConfigurationError(f"{name} side length {length} is not a multiple of h={h}")
    return n


def build_uniform_mesh(domain: Domain, h: float) -> IntegrationMesh:
    if not h > 0:
        raise ConfigurationError(f"mesh size h must be positive, got {h}")
    nx = _divisions(domain.width, h, "x")
    ny = _divisions(domain.height, h, "y")
    hx = domain.width / nx
    hy = domain.height / ny
    xs = domain.x_lo + (np.arange(nx) + 0.5) * hx
    ys = domain.y_lo + (np.arange(ny) + 0.5) * hy
    X, Y = np.meshgrid(xs, ys)  # rows of constant y
    centroids = np.column_stack([X.ravel(), Y.ravel()])
    measures = np.full(nx * ny, hx * hy)
    return IntegrationMesh(domain, h, _frozen(centroids), _frozen(measures))


def _boundary_segments(domain: Domain, h: float):
    """All boundary edges in bottom, right, top, left order, increasing coordinate."""
    nx = _divisions(domain.width, h, "x")
    ny = _divisions(domain.height, h, "y")
    hx = domain.width / nx
    hy = domain.height / ny
    xs = domain.x_lo + (np.arange(nx) + 0.5) * hx
    ys = domain.y_lo + (np.arange(ny) + 0.5) * hy
    sides = [
        (np.column_stack([xs, np.full(nx, domain.y_lo)]), hx, (0.0, -1.0)),
        (np.column_stack([np.full(ny, domain.x_hi), ys]), hy, (1.0, 0.0)),
        (np.column_stack([xs, np.full(nx, domain.y_hi)]), hx, (0.0, 1.0)),
        (np.column_stack([np.full(ny, domain.x_lo), ys]), hy, (-1.0, 0.0)),
    ]
    cents = np.concatenate([s[0] for s in sides])
    meas = np.concatenate([np.full(len(s[0]), s[1]) for s in sides])
    norms = np.concatenate([np.tile(s[2], (len(s[0]), 1)) for s in sides])
    return cents, meas, norms


def build_inflow_partition(mesh: IntegrationMesh, beta) -> IntegrationMesh:
    """Attach the inflow edges of ``beta`` (classified by the sign of beta.n at the centroid)."""
    cents, meas, norms = _boundary_segments(mesh.domain, mesh.h)
    bn = np.einsum("ij,ij->i", beta(cents), norms)
    keep = bn < 0.0
    return IntegrationMesh(
        mesh.domain,
        mesh.h,
        mesh.cell_centroids,
        mesh.cell_measures,
        _frozen(cents[keep]),
        _frozen(meas[keep]),
        _frozen(norms[keep]),
        _frozen(-bn[keep]),
    )


def build_mesh(domain: Domain, h: float, beta) -> IntegrationMesh:
    return build_inflow_partition(build_uniform_mesh(domain, h), beta)
