"""Scalar-output ReLU multilayer perceptrons.

Layer l maps x to sigma(W_l x - b_l); the bias is subtracted, and the last
layer is affine with no activation. Parameters live in one flat vector
ordered layer by layer, each layer as W (row-major) followed by b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Domain


class ConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class Architecture:
    widths: tuple[int, ...]

    def __post_init__(self):
        w = tuple(int(v) for v in self.widths)
        object.__setattr__(self, "widths", w)
        if len(w) < 3:
            raise ValueError("need at least one hidden layer")
        if w[-1] != 1 or any(v < 1 for v in w):
            raise ValueError(f"invalid widths {w}")

    @classmethod
    def parse(cls, text: str) -> Architecture:
        return cls(tuple(int(t) for t in text.strip().split("-")))

    def __str__(self) -> str:
        return "-".join(str(v) for v in self.widths)

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        return [(self.widths[i + 1], self.widths[i]) for i in range(self.depth)]

    @property
    def n_params(self) -> int:
        return sum(r * (c + 1) for r, c in self.layer_shapes)

    def dominates(self, other: Architecture) -> bool:
        return len(self.widths) == len(other.widths) and all(
            a >= b for a, b in zip(self.widths, other.widths)
        ) and self.widths[0] == other.widths[0]


def param_count_raw(arch: Architecture) -> int:
    return arch.n_params


def param_count_paper(arch: Architecture) -> int:
    """Count with first-layer weights on the unit sphere: d-1 direction parameters plus a bias."""
    d = arch.widths[0]
    n1 = arch.widths[1]
    return n1 * d + sum(r * (c + 1) for r, c in arch.layer_shapes[1:])


class Parameters:
    """Weights and biases of a network backed by a single flat vector."""

    def __init__(self, arch: Architecture, theta: np.ndarray | None = None):
        self.arch = arch
        if theta is None:
            theta = np.zeros(arch.n_params)
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (arch.n_params,):
            raise ValueError(f"expected {arch.n_params} parameters, got {theta.shape}")
        self.theta = theta
        self._offsets = []
        off = 0
        for r, c in arch.layer_shapes:
            self._offsets.append((off, off + r * c, off + r * c + r))
            off += r * (c + 1)

    @classmethod
    def from_layers(cls, weights, biases) -> Parameters:
        weights = [np.atleast_2d(np.asarray(w, dtype=float)) for w in weights]
        widths = (weights[0].shape[1],) + tuple(w.shape[0] for w in weights)
        p = cls(Architecture(widths))
        for l, (w, b) in enumerate(zip(weights, biases)):
            p.W(l)[...] = w
            p.b(l)[...] = np.asarray(b, dtype=float).reshape(-1)
        return p

    def W(self, l: int) -> np.ndarray:
        a, b_, _ = self._offsets[l]
        r, c = self.arch.layer_shapes[l]
        return self.theta[a:b_].reshape(r, c)

    def b(self, l: int) -> np.ndarray:
        _, a, b_ = self._offsets[l]
        return self.theta[a:b_]

    @property
    def weights(self) -> list[np.ndarray]:
        return [self.W(l) for l in range(self.arch.depth)]

    @property
    def biases(self) -> list[np.ndarray]:
        return [self.b(l) for l in range(self.arch.depth)]

    def copy(self) -> Parameters:
        return Parameters(self.arch, self.theta.copy())

    def __eq__(self, other) -> bool:
        return (isinstance(other, Parameters) and self.arch == other.arch
                and np.array_equal(self.theta, other.theta))

    def __repr__(self) -> str:
        return f"Parameters({self.arch})"

    def __call__(self, pts) -> np.ndarray:
        return forward(self, pts)


def relu(t):
    return np.maximum(t, 0.0)


def _forward_cache(params: Parameters, XT: np.ndarray):
    """Forward sweep in feature-major layout: ``XT`` has shape (d, N)."""
    acts = [XT]
    pre = []
    a = XT
    L = params.arch.depth
    for l in range(L - 1):
        z = params.W(l) @ a
        z -= params.b(l)[:, None]
        pre.append(z)
        a = np.maximum(z, 0.0)
        acts.append(a)
    out = params.W(L - 1)[0] @ a - params.b(L - 1)[0]
    return out, acts, pre


def _as_feature_major(pts) -> np.ndarray:
    X = np.atleast_2d(np.asarray(pts, dtype=float))
    return np.ascontiguousarray(X.T)


def forward(params: Parameters, pts) -> np.ndarray | float:
    """Network values at one point (returns float) or at an (N, 2) array."""
    X = np.asarray(pts, dtype=float)
    out, _, _ = _forward_cache(params, _as_feature_major(X))
    return float(out[0]) if X.ndim == 1 else out


def kink_margin(params: Parameters, pts) -> np.ndarray:
    """Per point, the smallest |pre-activation| over all hidden neurons."""
    _, _, pre = _forward_cache(params, _as_feature_major(pts))
    return np.min(np.abs(np.vstack(pre)), axis=0)


def hidden_features(params: Parameters, pts) -> np.ndarray:
    """Activations of the last hidden layer, shape (N, n_{L-1})."""
    _, acts, _ = _forward_cache(params, _as_feature_major(pts))
    return acts[-1].T


def value_and_vjp(params: Parameters, XT: np.ndarray, upstream_fn):
    """Evaluate the network on feature-major points ``XT`` (shape (2, N)) and
    return the parameter gradient of sum(u * N(X)).

    ``upstream_fn`` maps the network values to the weights ``u``; this lets
    callers form residuals before the backward sweep. Returns
    ``(values, u, flat_gradient)``. The ReLU derivative at 0 is taken as 0.
    """
    out, acts, pre = _forward_cache(params, XT)
    u = upstream_fn(out)
    grad = np.empty(params.arch.n_params)
    L = params.arch.depth
    g = Parameters(params.arch, grad)
    g.W(L - 1)[0] = acts[-1] @ u
    g.b(L - 1)[0] = -u.sum()
    delta = np.multiply.outer(params.W(L - 1)[0], u)
    for l in range(L - 2, -1, -1):
        delta *= pre[l] > 0.0
        g.W(l)[...] = delta @ acts[l].T
        g.b(l)[...] = -delta.sum(axis=1)
        if l > 0:
            delta = params.W(l).T @ delta
    return out, u, grad


def grad_params(params: Parameters, x) -> np.ndarray:
    """Flat gradient of N(x) with respect to all parameters at a single point."""
    XT = np.asarray(x, dtype=float).reshape(-1, 1)
    return value_and_vjp(params, XT, lambda out: np.ones(1))[2]


# analytic constructions

def construct_lemma32(xi, c: float, alpha1: float, alpha2: float, eps: float) -> Parameters:
    """Two-neuron ramp equal to alpha1 below xi.x = c - eps and alpha2 above xi.x = c + eps."""
    if not eps > 0:
        raise ConstructionError(f"eps must be positive, got {eps}")
    xi = np.asarray(xi, dtype=float)
    k = (alpha2 - alpha1) / (2.0 * eps)
    return Parameters.from_layers(
        [np.vstack([xi, xi]), [[k, -k]]],
        [[c - eps, c + eps], [-alpha1]],
    )


MAX_GADGET_W = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
MAX_GADGET_V = 0.5 * np.array([1.0, -1.0, 1.0, 1.0])


def max_gadget(a, b):
    """max(a, b) through one ReLU layer of four neurons."""
    z = MAX_GADGET_W @ np.vstack([np.asarray(a, float).ravel(), np.asarray(b, float).ravel()])
    return MAX_GADGET_V @ relu(z)


def construct_lemma51(xi1, xi2, a: float, alpha1: float, alpha2: float, eps: float) -> Parameters:
    """2-4-4-1 network realizing max of the two ramps along xi1 and xi2 (threshold a)."""
    if not eps > 0:
        raise ConstructionError(f"eps must be positive, got {eps}")
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    k = (alpha2 - alpha1) / (2.0 * eps)
    W1 = np.vstack([xi1, xi1, xi2, xi2])
    b1 = np.array([a - eps, a + eps, a - eps, a + eps])
    # ramp i = alpha1 + M[i] . h
    M = np.array([[k, -k, 0.0, 0.0], [0.0, 0.0, k, -k]])
    W2 = MAX_GADGET_W @ M
    b2 = -MAX_GADGET_W @ np.array([alpha1, alpha1])
    return Parameters.from_layers([W1, W2, MAX_GADGET_V[None, :]], [b1, b2, [0.0]])


# checkpoints

CKPT_MAGIC = "LSNN-CKPT 1"


def save_checkpoint(params: Parameters, path) -> None:
    lines = [CKPT_MAGIC, "arch " + " ".join(str(w) for w in params.arch.widths)]
    for l in range(params.arch.depth):
        lines.append(f"layer {l + 1}")
        W, b = params.W(l), params.b(l)
        for i in range(W.shape[0]):
            row = list(W[i]) + [b[i]]
            lines.append(" ".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> Parameters:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    head = lines[1].split()
    if head[0] != "arch":
        raise ValueError(f"{path}: missing arch line")
    arch = Architecture(tuple(int(v) for v in head[1:]))
    params = Parameters(arch)
    pos = 2
    for l, (r, c) in enumerate(arch.layer_shapes):
        if lines[pos] != f"layer {l + 1}":
            raise ValueError(f"{path}: expected 'layer {l + 1}', got {lines[pos]!r}")
        pos += 1
        for i in range(r):
            vals = [float(v) for v in lines[pos].split()]
            if len(vals) != c + 1:
                raise ValueError(f"{path}: layer {l + 1} row {i} has {len(vals)} entries")
            params.W(l)[i] = vals[:c]
            params.b(l)[i] = vals[c]
            pos += 1
    return params


# breaking lines

def _clip_line(w, b, domain: Domain):
    """Segment of {w.x = b} inside the closed rectangle, or None."""
    x0, x1, y0, y1 = domain.x_lo, domain.x_hi, domain.y_lo, domain.y_hi
    pts = []
    if w[1] != 0:
        for x in (x0, x1):
            y = (b - w[0] * x) / w[1]
            if y0 <= y <= y1:
                pts.append((x, y))
    if w[0] != 0:
        for y in (y0, y1):
            x = (b - w[1] * y) / w[0]
            if x0 <= x <= x1:
                pts.append((x, y))
    uniq = []
    for p in pts:
        if not any(math.isclose(p[0], q[0], abs_tol=1e-12) and math.isclose(p[1], q[1], abs_tol=1e-12)
                   for q in uniq):
            uniq.append(p)
    if len(uniq) < 2:
        return None
    uniq.sort()
    return uniq[0], uniq[-1]


@dataclass(frozen=True)
class BreakingLine:
    layer: int  # 1-based hidden layer
    neuron: int
    points: np.ndarray  # (k, 2) polyline vertices


def breaking_lines(params: Parameters, domain: Domain, resolution: int = 400) -> list[BreakingLine]:
    """Zero sets of hidden-neuron pre-activations inside the domain.

    First-layer lines are clipped exactly; deeper layers are contoured on a
    ``resolution`` x ``resolution`` grid.
    """
    out = []
    for i in range(params.arch.widths[1]):
        seg = _clip_line(params.W(0)[i], params.b(0)[i], domain)
        if seg is not None:
            out.append(BreakingLine(1, i, np.array(seg)))
    if params.arch.depth <= 2:
        return out
    from skimage.measure import find_contours

    xs = np.linspace(domain.x_lo, domain.x_hi, resolution)
    ys = np.linspace(domain.y_lo, domain.y_hi, resolution)
    X, Y = np.meshgrid(xs, ys)
    _, _, pre = _forward_cache(params, np.vstack([X.ravel(), Y.ravel()]))
    for l in range(1, params.arch.depth - 1):
        for i in range(params.arch.widths[l + 1]):
            z = pre[l][i].reshape(resolution, resolution)
            if z.min() >= 0 or z.max() <= 0:
                continue
            for c in find_contours(z, 0.0):
                rows, cols = c[:, 0], c[:, 1]
                px = np.interp(cols, np.arange(resolution), xs)
                py = np.interp(rows, np.arange(resolution), ys)
                out.append(BreakingLine(l + 1, i, np.column_stack([px, py])))
    return out
