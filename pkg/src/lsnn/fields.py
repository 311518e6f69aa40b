"""Advection velocity fields.

All fields are evaluated on arrays of points with shape ``(N, 2)`` and return
``(N, 2)`` arrays. Scalar helpers :func:`eval_beta` and :func:`unit_beta`
wrap the vectorized call for single points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)


class SingularFieldError(ValueError):
    pass


@dataclass(frozen=True)
class VelocityField:
    """One of ``constant``, ``two-sector``, ``rotational`` or ``sectors``.

    ``two-sector`` is the piecewise field split by the diagonal y = x;
    ``sectors`` with ``n`` segments is the chord approximation of the
    counterclockwise rotation on the unit quarter disc.
    """

    kind: str
    vector: tuple[float, float] | None = None
    n: int | None = None

    def __post_init__(self):
        if self.kind == "constant":
            if self.vector is None or (self.vector[0] == 0 and self.vector[1] == 0):
                raise ValueError("constant field needs a nonzero vector")
        elif self.kind == "sectors":
            if self.n is None or self.n < 2:
                raise ValueError("sector approximation needs n >= 2")
        elif self.kind not in ("two-sector", "rotational"):
            raise ValueError(f"unknown field kind {self.kind!r}")

    @classmethod
    def constant(cls, bx: float, by: float) -> VelocityField:
        return cls("constant", vector=(float(bx), float(by)))

    @classmethod
    def two_sector(cls) -> VelocityField:
        return cls("two-sector")

    @classmethod
    def rotational(cls) -> VelocityField:
        return cls("rotational")

    @classmethod
    def sectors(cls, n: int) -> VelocityField:
        return cls("sectors", n=int(n))

    @property
    def is_piecewise_constant(self) -> bool:
        return self.kind != "rotational"

    @property
    def name(self) -> str:
        if self.kind == "constant":
            return f"constant:{self.vector[0]!r},{self.vector[1]!r}"
        if self.kind == "sectors":
            return f"sectors:{self.n}"
        return self.kind

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        if self.kind == "constant":
            return np.tile(np.asarray(self.vector, dtype=float), (len(pts), 1))
        if self.kind == "rotational":
            return np.column_stack([-y, x])
        if self.kind == "two-sector":
            lower = y < x
            out = np.empty_like(pts)
            out[lower] = (1.0 - SQRT2, 1.0)
            out[~lower] = (-1.0, SQRT2 - 1.0)
            return out
        idx = sector_index(self.n, pts)
        return sector_vectors(self.n)[idx]


def sector_angles(n: int) -> np.ndarray:
    return np.arange(n + 1) * math.pi / (2 * n)


def sector_vectors(n: int) -> np.ndarray:
    t = sector_angles(n)
    return np.column_stack([np.cos(t[1:]) - np.cos(t[:-1]), np.sin(t[1:]) - np.sin(t[:-1])])


def sector_index(n: int, pts: np.ndarray) -> np.ndarray:
    """0-based sector of each point.

    Sector i holds sin(t_i) x < cos(t_i) y and sin(t_{i+1}) x >= cos(t_{i+1}) y.
    Points on a ray go to the lower sector; the ray t=0 and the origin go to 0.
    """
    pts = np.atleast_2d(pts)
    x, y = pts[:, 0], pts[:, 1]
    t = sector_angles(n)
    idx = np.zeros(len(pts), dtype=np.intp)
    for k in range(1, n):
        idx += (math.sin(t[k]) * x < math.cos(t[k]) * y)
    return idx


def eval_beta(field: VelocityField, x) -> np.ndarray:
    return field(np.asarray(x, dtype=float).reshape(1, 2))[0]


def unit_vectors(field: VelocityField, pts) -> tuple[np.ndarray, np.ndarray]:
    """Return (unit directions, magnitudes) of the field at ``pts``."""
    b = field(pts)
    mag = np.hypot(b[:, 0], b[:, 1])
    if np.any(mag == 0.0):
        bad = np.atleast_2d(pts)[np.argmax(mag == 0.0)]
        raise SingularFieldError(f"{field.name} vanishes at {tuple(bad)}")
    return b / mag[:, None], mag


def unit_beta(field: VelocityField, x) -> np.ndarray:
    return unit_vectors(field, np.asarray(x, dtype=float).reshape(1, 2))[0][0]


def parse_field(spec: str) -> VelocityField:
    """Parse ``constant:<bx>,<by>``, ``two-sector``, ``rotational`` or ``sectors:<n>``."""
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    if head == "constant":
        parts = rest.split(",")
        if len(parts) != 2:
            raise ValueError(f"bad constant field {spec!r}")
        return VelocityField.constant(float(parts[0]), float(parts[1]))
    if head == "sectors":
        return VelocityField.sectors(int(rest))
    if head in ("two-sector", "rotational") and not rest:
        return VelocityField(head)
    raise ValueError(f"unknown velocity field {spec!r}")
