"""P1 finite element spaces on the interval, the unit square and a radial ball.

All three kinds are reduced to the same data: a list of sparse element-gradient
operators, element weights for the gradient integrals and lumped nodal weights
for the zeroth-order integrals. Everything downstream (energy, residual,
preconditioners) only ever touches these arrays.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

KINDS = ("interval", "square", "radial-ball")


@dataclass(frozen=True)
class DomainDescriptor:
    """Geometric description of the domain.

    ``size`` is the interval length, the square side or the ball radius.
    ``n`` is only used by the radial ball (dimension of the ball).
    """

    kind: str = "radial-ball"
    size: float = 1.0
    n: int = 3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unsupported domain kind {self.kind!r}; expected one of {KINDS}")
        if not self.size > 0:
            raise ValueError("domain size must be positive")

    @classmethod
    def interval(cls, length: float = 1.0) -> "DomainDescriptor":
        return cls("interval", length)

    @classmethod
    def square(cls, side: float = 1.0) -> "DomainDescriptor":
        return cls("square", side)

    @classmethod
    def ball(cls, radius: float = 1.0, n: int = 3) -> "DomainDescriptor":
        return cls("radial-ball", radius, n)

    def measure(self) -> float:
        """Exact Lebesgue measure of the continuum domain."""
        if self.kind == "interval":
            return self.size
        if self.kind == "square":
            return self.size**2
        return sphere_area(self.n) * self.size**self.n / self.n


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    domain: DomainDescriptor
    resolution: int
    node_coords: np.ndarray  # (N, dim)
    boundary_mask: np.ndarray  # (N,) bool
    elements: np.ndarray  # (E, dim+1) vertex indices
    grad_ops: tuple  # dim sparse (E, N) matrices
    elem_weight: np.ndarray  # (E,) measure used for gradient integrals
    node_weight: np.ndarray  # (N,) lumped mass
    radial_weight: np.ndarray | None = None  # r^(n-1) at the nodes, radial only
    quadrature: str = "midpoint/lumped"
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def kind(self) -> str:
        return self.domain.kind

    @property
    def n_nodes(self) -> int:
        return self.node_coords.shape[0]

    @property
    def dim(self) -> int:
        return len(self.grad_ops)

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary_mask

    @property
    def measure(self) -> float:
        return float(self.node_weight.sum())

    @property
    def radii(self) -> np.ndarray:
        """Distance of every node from the origin (the ball centre) or the domain centre."""
        if self.kind == "radial-ball":
            return self.node_coords[:, 0]
        centre = 0.5 * self.domain.size
        return np.sqrt(((self.node_coords - centre) ** 2).sum(axis=1))

    def gradients(self, u: np.ndarray) -> np.ndarray:
        """Element gradients, shape (E, dim)."""
        check_field(self, u)
        return np.stack([G @ u for G in self.grad_ops], axis=1)

    def integrate(self, values: np.ndarray) -> float:
        """Lumped (nodal) quadrature of a nodal function."""
        return float(self.node_weight @ values)

    def zero(self) -> np.ndarray:
        return np.zeros(self.n_nodes)


def check_field(space: DiscreteSpace, u: np.ndarray) -> None:
    if np.ndim(u) != 1 or len(u) != space.n_nodes:
        raise ValueError(f"field has shape {np.shape(u)}, space has {space.n_nodes} nodes")


def build_space(domain: DomainDescriptor, resolution: int) -> DiscreteSpace:
    """Build a P1 space with ``resolution`` nodes per axis."""
    if resolution < 3:
        raise ValueError("resolution must be at least 3 nodes per axis")
    if domain.kind == "interval":
        return _interval_space(domain, resolution)
    if domain.kind == "square":
        return _square_space(domain, resolution)
    if domain.kind == "radial-ball":
        return _radial_space(domain, resolution)
    raise ValueError(f"unsupported domain kind {domain.kind!r}")


def _segment_ops(x: np.ndarray):
    n = len(x)
    h = np.diff(x)
    rows = np.repeat(np.arange(n - 1), 2)
    cols = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1).ravel()
    vals = np.stack([-1.0 / h, 1.0 / h], axis=1).ravel()
    G = sp.csr_matrix((vals, (rows, cols)), shape=(n - 1, n))
    elements = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
    return h, G, elements


def _interval_space(domain, resolution):
    x = np.linspace(0.0, domain.size, resolution)
    h, G, elements = _segment_ops(x)
    node_w = np.zeros(resolution)
    node_w[:-1] += 0.5 * h
    node_w[1:] += 0.5 * h
    mask = np.zeros(resolution, dtype=bool)
    mask[[0, -1]] = True
    return DiscreteSpace(domain, resolution, x[:, None], mask, elements, (G,), h, node_w)


def _radial_space(domain, resolution):
    n = domain.n
    r = np.linspace(0.0, domain.size, resolution)
    h, G, elements = _segment_ops(r)
    omega = sphere_area(n)
    a, b = r[:-1], r[1:]
    elem_w = omega * (b**n - a**n) / n
    # exact integrals of omega r^(n-1) against the two hat functions of each element
    right = omega * ((b ** (n + 1) - a ** (n + 1)) / (n + 1) - a * (b**n - a**n) / n) / h
    left = elem_w - right
    node_w = np.zeros(resolution)
    node_w[:-1] += left
    node_w[1:] += right
    mask = np.zeros(resolution, dtype=bool)
    mask[-1] = True
    return DiscreteSpace(domain, resolution, r[:, None], mask, elements, (G,), elem_w, node_w,
                         radial_weight=r ** (n - 1))


def _square_space(domain, resolution):
    """Crisscross triangulation: each grid cell is split into 4 triangles through its centre."""
    m = resolution
    L = domain.size
    s = np.linspace(0.0, L, m)
    X, Y = np.meshgrid(s, s, indexing="ij")
    grid = np.stack([X.ravel(), Y.ravel()], axis=1)
    c = 0.5 * (s[:-1] + s[1:])
    CX, CY = np.meshgrid(c, c, indexing="ij")
    centres = np.stack([CX.ravel(), CY.ravel()], axis=1)
    coords = np.vstack([grid, centres])

    def gid(i, j):
        return i * m + j

    I, J = np.meshgrid(np.arange(m - 1), np.arange(m - 1), indexing="ij")
    I, J = I.ravel(), J.ravel()
    cid = m * m + I * (m - 1) + J
    v00, v10, v11, v01 = gid(I, J), gid(I + 1, J), gid(I + 1, J + 1), gid(I, J + 1)
    tris = np.concatenate([
        np.stack([v00, v10, cid], axis=1),
        np.stack([v10, v11, cid], axis=1),
        np.stack([v11, v01, cid], axis=1),
        np.stack([v01, v00, cid], axis=1),
    ])
    P = coords[tris]  # (E, 3, 2)
    d1 = P[:, 1] - P[:, 0]
    d2 = P[:, 2] - P[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * np.abs(det)
    # gradients of the barycentric coordinates
    inv = np.empty((len(tris), 2, 2))
    inv[:, 0, 0] = d2[:, 1] / det
    inv[:, 0, 1] = -d2[:, 0] / det
    inv[:, 1, 0] = -d1[:, 1] / det
    inv[:, 1, 1] = d1[:, 0] / det
    g1 = inv[:, 0, :]
    g2 = inv[:, 1, :]
    g0 = -(g1 + g2)
    E = len(tris)
    rows = np.repeat(np.arange(E), 3)
    cols = tris.ravel()
    ops = []
    for d in range(2):
        vals = np.stack([g0[:, d], g1[:, d], g2[:, d]], axis=1).ravel()
        ops.append(sp.csr_matrix((vals, (rows, cols)), shape=(E, len(coords))))
    node_w = np.bincount(tris.ravel(), weights=np.repeat(area / 3.0, 3), minlength=len(coords))
    tol = 1e-12 * L
    mask = np.zeros(len(coords), dtype=bool)
    mask[: m * m] = (
        (np.abs(grid[:, 0]) < tol) | (np.abs(grid[:, 0] - L) < tol)
        | (np.abs(grid[:, 1]) < tol) | (np.abs(grid[:, 1] - L) < tol)
    )
    return DiscreteSpace(domain, resolution, coords, mask, tris, tuple(ops), area, node_w)


@dataclass(frozen=True)
class FiberingProfile:
    """The four integrals that determine the fibering map of a field.

    A = int |grad u|^p, B = int |grad u|^q, C = int |u|^(1-delta), D = int |u|^r.
    """

    A: float
    B: float
    C: float
    D: float

    def __post_init__(self):
        for name in "ABCD":
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"profile component {name}={v} must be finite and >= 0")

    def scaled(self, t: float, spec) -> "FiberingProfile":
        """Profile of t*u given the profile of u."""
        return FiberingProfile(
            t**spec.p * self.A, t**spec.q * self.B, t ** (1 - spec.delta) * self.C, t**spec.r * self.D
        )

    def as_tuple(self):
        return (self.A, self.B, self.C, self.D)

    @property
    def is_zero(self) -> bool:
        return self.A == 0 and self.B == 0 and self.C == 0 and self.D == 0


def gradient_power(space: DiscreteSpace, u: np.ndarray, s: float) -> float:
    """int |grad u|^s with exact element integration for P1 fields."""
    g = space.gradients(u)
    mag = np.sqrt((g**2).sum(axis=1))
    return float(space.elem_weight @ mag**s)


def power_difference(b: np.ndarray, d: np.ndarray, s: float) -> np.ndarray:
    """(b + d)^s - b^s for b >= 0, b + d >= 0, accurate even when |d| << b."""
    b = np.asarray(b, dtype=float)
    d = np.asarray(d, dtype=float)
    out = np.empty(np.broadcast(b, d).shape)
    pos = b > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(pos, d / np.where(pos, b, 1.0), 0.0)
        out = np.where(pos, b**s * np.expm1(s * np.log1p(np.maximum(rel, -1.0))),
                       np.maximum(b + d, 0.0) ** s)
    return out


def gradient_power_difference(space: DiscreteSpace, u: np.ndarray, v: np.ndarray, s: float) -> float:
    """int |grad v|^s - int |grad u|^s without cancellation between the two integrals."""
    gu = space.gradients(u)
    gd = space.gradients(v - u)
    gv = gu + gd
    mu = np.sqrt((gu**2).sum(axis=1))
    mv = np.sqrt((gv**2).sum(axis=1))
    tot = mu + mv
    with np.errstate(divide="ignore", invalid="ignore"):
        dm = np.where(tot > 0, (gd * (gu + gv)).sum(axis=1) / np.where(tot > 0, tot, 1.0), 0.0)
    return float(space.elem_weight @ power_difference(mu, dm, s))


def norms_profile(spec, space: DiscreteSpace, u: np.ndarray) -> FiberingProfile:
    check_field(space, u)
    g = space.gradients(u)
    mag = np.sqrt((g**2).sum(axis=1))
    au = np.abs(u)
    return FiberingProfile(
        float(space.elem_weight @ mag**spec.p),
        float(space.elem_weight @ mag**spec.q),
        float(space.node_weight @ au ** (1.0 - spec.delta)),
        float(space.node_weight @ au**spec.r),
    )


def interpolate(space: DiscreteSpace, f: Callable, conforming: bool = True) -> np.ndarray:
    """Nodal interpolation of ``f``.

    ``f`` receives the coordinates as separate arrays (x for 1D, x and y for the
    square, r for the radial ball).
    """
    X = space.node_coords
    vals = np.asarray(f(*[X[:, d] for d in range(X.shape[1])]), dtype=float)
    vals = np.broadcast_to(vals, (space.n_nodes,)).copy()
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise ValueError(f"interpolant is not finite at node {bad} ({X[bad]})")
    if conforming:
        vals[space.boundary_mask] = 0.0
    return vals


def is_conforming(space: DiscreteSpace, u: np.ndarray) -> bool:
    return len(u) == space.n_nodes and bool(np.all(u[space.boundary_mask] == 0.0))


def stiffness_hessian(space: DiscreteSpace, u: np.ndarray, s: float, coef: float = 1.0,
                      rel_floor: float = 1e-8) -> sp.csr_matrix:
    """Hessian of coef/s * int |grad u|^s with respect to the nodal values.

    Gradient magnitudes below ``rel_floor * max|grad u|`` are floored; only
    matters for s < 2 where the exact Hessian blows up on flat elements.
    """
    g = space.gradients(u)
    mag = np.sqrt((g**2).sum(axis=1))
    floor = rel_floor * max(float(mag.max(initial=0.0)), 1e-30)
    m = np.sqrt(mag**2 + floor**2)
    base = coef * space.elem_weight * m ** (s - 2.0)
    ghat = g / m[:, None]
    K = None
    for a in range(space.dim):
        for b in range(space.dim):
            c = base * ((1.0 if a == b else 0.0) + (s - 2.0) * ghat[:, a] * ghat[:, b])
            term = space.grad_ops[a].T @ sp.diags(c) @ space.grad_ops[b]
            K = term if K is None else K + term
    return sp.csr_matrix(K)


def laplacian_matrix(space: DiscreteSpace) -> sp.csr_matrix:
    """Weighted stiffness matrix of the linear Laplacian (cached)."""
    if "lap" not in space._cache:
        K = None
        for G in space.grad_ops:
            term = G.T @ sp.diags(space.elem_weight) @ G
            K = term if K is None else K + term
        space._cache["lap"] = sp.csr_matrix(K)
    return space._cache["lap"]


# --- serialization -----------------------------------------------------------

def write_field_csv(path, space: DiscreteSpace, u: np.ndarray) -> None:
    check_field(space, u)
    dims = ["r"] if space.kind == "radial-ball" else (["x"] if space.dim == 1 else ["x", "y"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", *dims, "value"])
        for i in range(space.n_nodes):
            w.writerow([i, *(format(c, ".17g") for c in space.node_coords[i]), format(u[i], ".17g")])


def read_field_csv(path, space: DiscreteSpace | None = None) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[0] != "node" or header[-1] != "value":
        raise ValueError(f"{path}: expected columns node,...,value; got {header}")
    vals = np.array([float(r[-1]) for r in body])
    idx = np.array([int(r[0]) for r in body])
    if not np.array_equal(idx, np.arange(len(idx))):
        raise ValueError(f"{path}: node indices must be 0..N-1 in order")
    if space is not None:
        check_field(space, vals)
    return vals


def field_to_json(u: np.ndarray) -> str:
    return "[" + ", ".join(format(float(v), ".17g") for v in u) + "]"


def field_from_json(text: str) -> np.ndarray:
    return np.asarray(json.loads(text), dtype=float)


def refine_measure_errors(domain: DomainDescriptor, f: Callable, exact: float,
                          resolutions: Sequence[int]) -> list[float]:
    """Quadrature errors of integrate(f) along a sequence of resolutions."""
    out = []
    for res in resolutions:
        V = build_space(domain, res)
        out.append(abs(V.integrate(interpolate(V, f, conforming=False)) - exact))
    return out
