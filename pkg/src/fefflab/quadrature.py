"""Tensor-product quadrature grids.

Every grid carries ``points`` (real coordinates, shape (N, d)) and positive
``weights``.  Grids on S^3 and on the ball of C^2 also expose complex
``z``/``w`` arrays.  ``refined()`` rebuilds the grid with every axis doubled,
which is what the one-step error estimates use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss


def gauss_legendre(n: int, a: float, b: float):
    x, w = leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def periodic_trapezoid(n: int, start: float = 0.0):
    return start + 2 * np.pi * np.arange(n) / n, np.full(n, 2 * np.pi / n)


def closed_trapezoid(n: int, a: float, b: float):
    x = np.linspace(a, b, n)
    w = np.full(n, (b - a) / (n - 1))
    w[0] = w[-1] = 0.5 * (b - a) / (n - 1)
    return x, w


@dataclass(frozen=True)
class QuadratureGrid:
    kind: str
    counts: Tuple[int, ...]
    points: np.ndarray
    weights: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def z(self):
        return self.points[:, 0] + 1j * self.points[:, 1]

    @property
    def w(self):
        return self.points[:, 2] + 1j * self.points[:, 3]

    def integrate(self, values) -> float | complex:
        return np.sum(self.weights * values)

    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def refined(self, factor: int = 2) -> "QuadratureGrid":
        return make_grid(self.kind, tuple(factor * c for c in self.counts), **self.params)


def _check_counts(counts, k):
    if len(counts) != k or min(counts) < 2:
        raise ValueError(f"need {k} node counts, each >= 2 (got {counts})")


def make_sphere_grid(n_alpha: int, n_beta: int, n_gamma: int) -> QuadratureGrid:
    """Hopf coordinates z = cos(a) e^{ib}, w = sin(a) e^{ic}; measure cos a sin a da db dc."""
    _check_counts((n_alpha, n_beta, n_gamma), 3)
    a, wa = gauss_legendre(n_alpha, 0.0, np.pi / 2)
    b, wb = periodic_trapezoid(n_beta)
    c, wc = periodic_trapezoid(n_gamma)
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    W = (wa * np.cos(a) * np.sin(a))[:, None, None] * wb[None, :, None] * wc[None, None, :]
    z = np.cos(A) * np.exp(1j * B)
    w = np.sin(A) * np.exp(1j * C)
    pts = np.stack([z.real, z.imag, w.real, w.imag], axis=-1).reshape(-1, 4)
    return QuadratureGrid("sphere", (n_alpha, n_beta, n_gamma), pts, W.ravel())


def make_ball_grid(n_r: int, n_alpha: int, n_beta: int, n_gamma: int) -> QuadratureGrid:
    """Unit ball of C^2 as [0,1] x S^3 with radial weight r^3."""
    _check_counts((n_r, n_alpha, n_beta, n_gamma), 4)
    r, wr = gauss_legendre(n_r, 0.0, 1.0)
    s = make_sphere_grid(n_alpha, n_beta, n_gamma)
    pts = (r[:, None, None] * s.points[None, :, :]).reshape(-1, 4)
    W = ((wr * r**3)[:, None] * s.weights[None, :]).ravel()
    return QuadratureGrid("ball", (n_r, n_alpha, n_beta, n_gamma), pts, W)


def make_box_grid(bounds, counts, rule: str = "gauss") -> QuadratureGrid:
    """Tensor grid on a box in (x, y, u).

    ``rule="trapezoid"`` (closed) is the right choice for integrands that are
    smooth and flat to all orders at the box boundary, such as compactly
    supported bumps; it then converges faster than any power.
    """
    bounds = tuple(tuple(map(float, b)) for b in bounds)
    counts = tuple(int(c) for c in counts)
    _check_counts(counts, len(bounds))
    maker = gauss_legendre if rule == "gauss" else closed_trapezoid
    if rule not in ("gauss", "trapezoid"):
        raise ValueError(f"unknown rule {rule!r}")
    axes = [maker(n, lo, hi) for n, (lo, hi) in zip(counts, bounds)]
    mesh = np.meshgrid(*[x for x, _ in axes], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    W = axes[0][1]
    for _, wi in axes[1:]:
        W = np.multiply.outer(W, wi)
    return QuadratureGrid("box", counts, pts, W.ravel(), {"bounds": bounds, "rule": rule})


def _s2_rule(n_theta: int, n_phi: int):
    ct, wt = gauss_legendre(n_theta, -1.0, 1.0)
    ph, wp = periodic_trapezoid(n_phi)
    CT, PH = np.meshgrid(ct, ph, indexing="ij")
    st = np.sqrt(1 - CT**2)
    xi = np.stack([st * np.cos(PH), st * np.sin(PH), CT], axis=-1).reshape(-1, 3)
    return xi, np.multiply.outer(wt, wp).ravel()


def make_ball3_grid(radius: float, counts, center=(0.0, 0.0, 0.0)) -> QuadratureGrid:
    """Solid ball in (x, y, u) in spherical coordinates (radius, cos polar, azimuth)."""
    counts = tuple(int(c) for c in counts)
    _check_counts(counts, 3)
    r, wr = gauss_legendre(counts[0], 0.0, radius)
    xi, wxi = _s2_rule(counts[1], counts[2])
    pts = (r[:, None, None] * xi[None, :, :]).reshape(-1, 3) + np.asarray(center, dtype=float)
    W = ((wr * r**2)[:, None] * wxi[None, :]).ravel()
    return QuadratureGrid("ball3", counts, pts, W, {"radius": float(radius), "center": tuple(center)})


def make_cap_grid(half_angle: float, counts) -> QuadratureGrid:
    """Geodesic cap of S^3 around the bottom point (z, w) = (0, -i).

    A point is cos(phi) * (0,0,0,-1) + sin(phi) * xi with xi in the unit
    sphere of the (x, y, u) space; the measure is sin^2(phi) dphi dxi.
    """
    counts = tuple(int(c) for c in counts)
    _check_counts(counts, 3)
    ph, wph = gauss_legendre(counts[0], 0.0, half_angle)
    xi, wxi = _s2_rule(counts[1], counts[2])
    sp_, cp_ = np.sin(ph), np.cos(ph)
    pts = np.empty((counts[0], len(wxi), 4))
    pts[..., :3] = sp_[:, None, None] * xi[None, :, :]
    pts[..., 3] = -cp_[:, None]
    W = ((wph * sp_**2)[:, None] * wxi[None, :]).ravel()
    return QuadratureGrid("cap", counts, pts.reshape(-1, 4), W, {"half_angle": float(half_angle)})


def make_disk_grid(n_r: int, n_theta: int) -> QuadratureGrid:
    """Unit disk in polar coordinates; points are (Re w, Im w)."""
    _check_counts((n_r, n_theta), 2)
    r, wr = gauss_legendre(n_r, 0.0, 1.0)
    th, wt = periodic_trapezoid(n_theta)
    R, TH = np.meshgrid(r, th, indexing="ij")
    pts = np.stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()], axis=-1)
    return QuadratureGrid("disk", (n_r, n_theta), pts, np.multiply.outer(wr * r, wt).ravel())


def make_graded_disk_grid(n_panel: int, n_psi: int, r_min: float = 1e-12,
                          ratio: float = 0.7, min_panels: int = 40) -> QuadratureGrid:
    """Unit disk in polar coordinates centred at the boundary point w = 1.

    w = 1 + r e^{i psi}, psi in (pi/2, 3pi/2), 0 < r < -2 cos(psi).  The
    radial range is cut into geometric panels (ratio ``ratio``) accumulating
    at r = 0, each carrying ``n_panel`` Gauss nodes, so integrands peaked at
    w = 1 are resolved.  Angular nodes are Gauss-Legendre after a cosine
    map that clusters them at the two tangent directions.  The innermost
    disc of radius ``r_min`` around w = 1 is omitted.
    """
    _check_counts((n_panel, n_psi), 2)
    t, wt = gauss_legendre(n_psi, 0.0, 1.0)
    s = 0.5 * (1 - np.cos(np.pi * t))
    ds = 0.5 * np.pi * np.sin(np.pi * t)
    psi = np.pi / 2 + np.pi * s
    wpsi = wt * np.pi * ds
    x0, w0 = leggauss(n_panel)
    rows_pts, rows_w = [], []
    for p, wp in zip(psi, wpsi):
        rmax = -2 * np.cos(p)
        n_geo = max(min_panels, int(np.ceil(np.log(r_min / rmax) / np.log(ratio))))
        edges = rmax * ratio ** np.arange(n_geo + 1)
        edges = edges[edges > r_min]
        edges = np.append(edges, r_min)
        a, b = edges[1:], edges[:-1]
        r = (0.5 * (b - a)[:, None] * x0[None, :] + 0.5 * (b + a)[:, None]).ravel()
        wr = (0.5 * (b - a)[:, None] * w0[None, :]).ravel()
        rows_pts.append(np.stack([1 + r * np.cos(p), r * np.sin(p)], axis=-1))
        rows_w.append(wr * r * wp)
    pts = np.concatenate(rows_pts)
    W = np.concatenate(rows_w)
    return QuadratureGrid("graded-disk", (n_panel, n_psi), pts, W,
                          {"r_min": r_min, "ratio": ratio, "min_panels": min_panels})


_MAKERS = {
    "sphere": lambda counts, **kw: make_sphere_grid(*counts),
    "ball": lambda counts, **kw: make_ball_grid(*counts),
    "box": lambda counts, **kw: make_box_grid(kw["bounds"], counts, kw.get("rule", "gauss")),
    "ball3": lambda counts, **kw: make_ball3_grid(kw["radius"], counts, kw.get("center", (0, 0, 0))),
    "cap": lambda counts, **kw: make_cap_grid(kw["half_angle"], counts),
    "disk": lambda counts, **kw: make_disk_grid(*counts),
    "graded-disk": lambda counts, **kw: make_graded_disk_grid(*counts, **kw),
}


def make_grid(kind: str, counts, **params) -> QuadratureGrid:
    if kind not in _MAKERS:
        raise ValueError(f"unknown grid kind {kind!r}")
    return _MAKERS[kind](tuple(counts), **params)
