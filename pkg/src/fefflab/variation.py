"""First and second variations of the Fefferman measure.

The curvature invariant is computed from the first-variation operator in
graph form: inner flux expressions use exact 2-jets of F, outer derivatives
are central differences with one Richardson step.  Second variations are
checked against least-squares fits of the functional along eps-families.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import sphere_algebra as sa
from .core_calculus import Jet2Graph, ScalarField, graph_mu, jet_of
from .measures import (
    Box,
    _derivs_from_polynomial,
    GraphSurface,
    NotPseudoconvexError,
    RadialSurface,
    fefferman_radial,
    graph_density,
    iso_quotient,
    volume_radial,
)
from .quadrature import QuadratureGrid, make_box_grid

DEFAULT_EPS = tuple(s * k * 1e-2 for k in (1, 2, 3, 4) for s in (-1, 1))
KAPPA_FACTOR = 3 / 8


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get("FEFFLAB_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_tasks, limit))


# ---------------------------------------------------------------------------
# bumps


def _bump_1d(t):
    """exp(1 - 1/(1 - t^2)) on |t| < 1 with its first two derivatives."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1
    s = np.where(inside, 1 - t * t, 1.0)
    b = np.where(inside, np.exp(1 - 1 / s), 0.0)
    g1 = -2 * t / s**2
    g2 = -2 / s**2 - 8 * t * t / s**3
    return b, np.where(inside, b * g1, 0.0), np.where(inside, b * (g1 * g1 + g2), 0.0)


@dataclass(frozen=True)
class Bump:
    """amplitude * (1 + tilt . (p - center)) * prod_i b((p_i - center_i) / half_i)."""

    center: tuple
    half: tuple
    amplitude: float = 1.0
    tilt: tuple = (0.0, 0.0, 0.0)

    def real_jet(self, p):
        p = np.asarray(p, dtype=float)
        c = np.asarray(self.center, dtype=float)
        a = np.asarray(self.half, dtype=float)
        t = (p - c) / a
        vals = [_bump_1d(t[..., i]) for i in range(3)]
        b = [v[0] for v in vals]
        db = [v[1] / a[i] for i, v in enumerate(vals)]
        ddb = [v[2] / a[i] ** 2 for i, v in enumerate(vals)]
        P = b[0] * b[1] * b[2]
        gP = np.stack([db[0] * b[1] * b[2], b[0] * db[1] * b[2], b[0] * b[1] * db[2]], axis=-1)
        HP = np.empty(p.shape + (3,))
        for i in range(3):
            for j in range(3):
                f = [b[0], b[1], b[2]]
                if i == j:
                    f[i] = ddb[i]
                else:
                    f[i], f[j] = db[i], db[j]
                HP[..., i, j] = f[0] * f[1] * f[2]
        tv = np.asarray(self.tilt, dtype=float)
        g = 1 + np.sum((p - c) * tv, axis=-1)
        value = self.amplitude * g * P
        grad = self.amplitude * (tv * P[..., None] + g[..., None] * gP)
        hess = self.amplitude * (
            tv[:, None] * gP[..., None, :] + gP[..., :, None] * tv[None, :] + g[..., None, None] * HP
        )
        return value, grad, hess

    def support(self):
        return tuple((c - h, c + h) for c, h in zip(self.center, self.half))


@dataclass(frozen=True)
class BumpField:
    """Sum of separable C-infinity bumps with analytic 2-jets."""

    bumps: tuple

    @classmethod
    def single(cls, center=(0, 0, 0), half=(0.8, 0.8, 0.8), amplitude=1.0, tilt=(0, 0, 0)):
        return cls((Bump(tuple(center), tuple(half), amplitude, tuple(tilt)),))

    def scaled(self, c: float) -> "BumpField":
        return BumpField(tuple(Bump(b.center, b.half, b.amplitude * c, b.tilt) for b in self.bumps))

    def real_jet(self, p):
        parts = [b.real_jet(p) for b in self.bumps]
        return tuple(sum(x[k] for x in parts) for k in range(3))

    def jet(self, p) -> Jet2Graph:
        return Jet2Graph.from_real(*self.real_jet(p))

    def field(self) -> ScalarField:
        return ScalarField("graph", lambda p: self.real_jet(p)[0], lambda p: self.real_jet(p))

    def support(self):
        lo = np.min([[s[0] for s in b.support()] for b in self.bumps], axis=0)
        hi = np.max([[s[1] for s in b.support()] for b in self.bumps], axis=0)
        return tuple(zip(lo, hi))

    def check_inside(self, box: Box):
        for (lo, hi), (a, b) in zip(self.support(), box.bounds):
            if not (a < lo and hi < b):
                raise ValueError("bump support touches the boundary of the base")


# ---------------------------------------------------------------------------
# heisenberg vector fields


def heis_fields(jet: Jet2Graph, z):
    """(L Lbar F, L F, Lbar F, T F) for L = d_z + i zb d_u, Lbar = d_zb - i z d_u, T = d_u."""
    zb = np.conj(z)
    LF = jet.F_z + 1j * zb * jet.F_u
    LbF = jet.F_zb - 1j * z * jet.F_u
    LLbF = (
        jet.F_zzb - 1j * jet.F_u - 1j * z * jet.F_zu + 1j * zb * jet.F_zbu + np.abs(z) ** 2 * jet.F_uu
    )
    return LLbF, LF, LbF, jet.F_u


def _zcoord(points):
    return points[..., 0] + 1j * points[..., 1]


def support_grid(bump: BumpField, n: int = 64) -> QuadratureGrid:
    """Gauss-Legendre grid on the bounding box of the bump support.

    Outside this box the perturbed Heisenberg integrands equal their flat
    values, so integrals over a larger base only need a constant offset.
    """
    return make_box_grid(bump.support(), (n, n, n), "gauss")


def _grid_or_default(bump, grid, n):
    return support_grid(bump, n) if grid is None else grid


def _outside_volume(base: Optional[Box], grid: QuadratureGrid) -> float:
    return 0.0 if base is None else base.volume - grid.total_weight()


def heis_second_variation(bump: BumpField, grid: QuadratureGrid | None = None, n: int = 64) -> float:
    """-(1/9) * int (|L Lbar F|^2 + 6 |T F|^2) dV for the bump F.

    This is the commonly quoted closed form.  It does not agree with the
    eps^2 coefficient of the Fefferman measure; see
    ``heis_second_variation_exact`` for the form that does.
    """
    grid = _grid_or_default(bump, grid, n)
    LLbF, _, _, TF = heis_fields(bump.jet(grid.points), _zcoord(grid.points))
    return float(-np.sum(grid.weights * (np.abs(LLbF) ** 2 + 6 * TF**2)) / 9)


def heis_second_variation_exact(bump: BumpField, grid: QuadratureGrid | None = None, n: int = 64) -> float:
    """eps^2 coefficient of F(|z|^2 + eps*bump): -(2^{2/3}/9) int (|L Lbar F|^2 - 10 |T F|^2) dV.

    With mu = 1 + eps*m1 + eps^2*m2 + ..., m1 = Re(L Lbar F) and
    int m2 = 3 int F_u^2, so the coefficient is 2^{2/3} int (m2/3 - m1^2/9).
    """
    grid = _grid_or_default(bump, grid, n)
    LLbF, _, _, TF = heis_fields(bump.jet(grid.points), _zcoord(grid.points))
    return float(-(2 ** (2 / 3)) * np.sum(grid.weights * (np.abs(LLbF) ** 2 - 10 * TF**2)) / 9)


def heisenberg_mu(bump: BumpField, points, eps: float = 1.0):
    """mu(|z|^2 + eps * bump) at points."""
    x, y = points[..., 0], points[..., 1]
    zero = np.zeros_like(x)
    base = Jet2Graph(x * x + y * y, x - 1j * y, zero, np.ones_like(x), zero + 0j, zero)
    return graph_mu(base + bump.jet(points).scale(eps))


@dataclass(frozen=True)
class CubeReport:
    lhs: float  # int_B mu(F) dV
    rhs: float  # int_B (1 + (3 Ft_zzb - 1) Ft_u^2) dV
    rhs_exact: float  # int_B (1 + 3 (1 + Ft_zzb) Ft_u^2) dV

    @property
    def rel_diff(self) -> float:
        return abs(self.lhs - self.rhs) / abs(self.lhs)

    @property
    def rel_diff_exact(self) -> float:
        return abs(self.lhs - self.rhs_exact) / abs(self.lhs)


def cube_simp_check(bump: BumpField, base: Optional[Box] = None, grid: QuadratureGrid | None = None,
                    n: int = 64) -> CubeReport:
    """Both sides of the cubic integral identity for F = |z|^2 + Ft over the base.

    ``rhs`` is the quoted form; ``rhs_exact`` is what integration by parts
    actually gives with L Lbar - Lbar L = -2iT.
    """
    grid = _grid_or_default(bump, grid, n)
    if base is not None:
        bump.check_inside(base)
    out = _outside_volume(base, grid)
    j = bump.jet(grid.points)
    mu = heisenberg_mu(bump, grid.points)
    Fu2, Fzzb = j.F_u**2, j.F_zzb.real
    integ = lambda v: float(np.sum(grid.weights * np.real(v)))
    return CubeReport(
        out + integ(mu),
        out + integ(1 + (3 * Fzzb - 1) * Fu2),
        out + integ(1 + 3 * (1 + Fzzb) * Fu2),
    )


@dataclass(frozen=True)
class SemiGlobalReport:
    fefferman: float
    flat_value: float  # 2^{2/3} Vol(B)
    max_Ft_zzb: float
    hypothesis_holds: bool
    conclusion_holds: bool


def heis_semiglobal_check(bump: BumpField, base: Box, grid: QuadratureGrid | None = None,
                          n: int = 64) -> SemiGlobalReport:
    """Compare F(|z|^2 + Ft) with F of the flat patch, recording whether Ft_zzb <= 1/3."""
    grid = _grid_or_default(bump, grid, n)
    bump.check_inside(base)
    mu = heisenberg_mu(bump, grid.points)
    if np.any(mu <= 0):
        raise NotPseudoconvexError("perturbed Heisenberg patch is not strongly pseudoconvex")
    c = 2 ** (2 / 3)
    F = float(c * (_outside_volume(base, grid) + np.sum(grid.weights * np.cbrt(mu))))
    flat = c * base.volume
    m = float(np.max(bump.jet(grid.points).F_zzb.real))
    return SemiGlobalReport(F, flat, m, m <= 1 / 3, F <= flat * (1 + 1e-12))


# ---------------------------------------------------------------------------
# first variation operator and the curvature invariant


def _flux_terms(field: ScalarField, p):
    """Inner expressions of the first-variation operator, grouped by outer derivative."""
    j = jet_of(field, p)
    mu = graph_mu(j)
    if np.any(mu <= 0):
        raise NotPseudoconvexError("loss of pseudoconvexity inside the difference stencil")
    m = mu ** (-2 / 3)
    Fu, Fz, Fzb, Fzu, Fzbu = j.F_u, j.F_z, j.F_zb, j.F_zu, j.F_zbu
    return {
        "u": 2 * m * Fu * j.F_zzb - m * Fzu * Fzb - m * Fzbu * Fz,
        "z": -m * Fzbu * (Fu - 1j) + m * j.F_uu * Fzb,
        "zb": -m * Fzu * (Fu + 1j) + m * j.F_uu * Fz,
        "zzb": -m * (Fu**2 + 1),
        "zu": m * (Fu + 1j) * Fzb,
        "zbu": m * (Fu - 1j) * Fz,
        "uu": -m * Fz * Fzb,
    }


def _outer_combination(field: ScalarField, p, h: float):
    """Apply the outer derivatives with central differences of step h."""
    p = np.asarray(p, dtype=float)
    e = np.eye(3)
    cache = {}

    def T(offset):
        key = tuple(np.round(offset / h, 6))
        if key not in cache:
            cache[key] = _flux_terms(field, p + offset)
        return cache[key]

    c = T(np.zeros(3))
    d1 = {}
    d2 = {}
    for i in range(3):
        fp, fm = T(h * e[i]), T(-h * e[i])
        d1[i] = {k: (fp[k] - fm[k]) / (2 * h) for k in c}
        d2[i, i] = {k: (fp[k] - 2 * c[k] + fm[k]) / h**2 for k in c}
    for i, jx in ((0, 2), (1, 2)):
        pp, pm = T(h * (e[i] + e[jx])), T(h * (e[i] - e[jx]))
        mp, mm = T(h * (-e[i] + e[jx])), T(-h * (e[i] + e[jx]))
        d2[i, jx] = {k: (pp[k] - pm[k] - mp[k] + mm[k]) / (4 * h * h) for k in c}

    dz = lambda k: 0.5 * (d1[0][k] - 1j * d1[1][k])
    dzb = lambda k: 0.5 * (d1[0][k] + 1j * d1[1][k])
    return (
        d1[2]["u"]
        + dz("z")
        + dzb("zb")
        + 0.25 * (d2[0, 0]["zzb"] + d2[1, 1]["zzb"])
        + 0.5 * (d2[0, 2]["zu"] - 1j * d2[1, 2]["zu"])
        + 0.5 * (d2[0, 2]["zbu"] + 1j * d2[1, 2]["zbu"])
        + d2[2, 2]["uu"]
    )


def _richardson(fn: Callable[[float], complex], h: float):
    coarse, fine = fn(h), fn(h / 2)
    return (4 * fine - coarse) / 3, abs(fine - coarse)


def first_variation_operator(field: ScalarField, p, h: float = 1e-3):
    """L_1(F) at a single point p = (x, y, u)."""
    val, _ = _richardson(lambda s: _outer_combination(field, p, s), h)
    if abs(val.imag) > 1e-6 * max(1.0, abs(val.real)):
        raise ValueError(f"first-variation operator has imaginary part {val.imag:.3g}")
    return float(val.real)


def _base_scale(base) -> float:
    if isinstance(base, Box):
        return max(b - a for a, b in base.bounds)
    return 2 * getattr(base, "radius", 0.5)


def kappa_graph(Z: GraphSurface, p, h: float | None = None) -> float:
    """Curvature invariant kappa = (3/8) L_1(F) at p in the base of Z."""
    h = 1e-3 * _base_scale(Z.base) if h is None else h
    return KAPPA_FACTOR * first_variation_operator(Z.field, p, h)


def L1_rigid(field: ScalarField, p, h: float = 1e-3) -> float:
    """-(F_zzb^{-2/3})_{zzb} for a rigid height v = F(z); p = (x, y) or (x, y, u)."""
    p = np.asarray(p, dtype=float)
    p3 = np.array([p[0], p[1], p[2] if p.size > 2 else 0.0])

    def inner(q):
        fz = jet_of(field, q).F_zzb
        if np.any(fz <= 0):
            raise NotPseudoconvexError("F_zzb must be positive for a rigid hypersurface")
        return fz ** (-2 / 3)

    def lap(s):
        ex, ey = np.array([s, 0, 0]), np.array([0, s, 0])
        c = inner(p3)
        return 0.25 * (inner(p3 + ex) + inner(p3 - ex) + inner(p3 + ey) + inner(p3 - ey) - 4 * c) / s**2

    val, _ = _richardson(lap, h)
    return -float(val)


# ---------------------------------------------------------------------------
# perturbation families and eps fits


@dataclass
class PerturbationFamily:
    """eps -> surface, with F / V / Q evaluation on a fixed grid.

    ``base`` is a RadialSurface (direction: real SpherePolynomial G0,
    surface G + eps*G0) or a GraphSurface (direction: BumpField, height
    F + eps*bump).  Graph families only support the functional "F".
    """

    base: object
    direction: object
    grid: QuadratureGrid
    offset: float = 0.0  # contribution of the unperturbed region outside the grid
    _cache: dict = field(default_factory=dict, repr=False)

    def surface(self, eps: float):
        if eps == 0:
            return self.base
        if isinstance(self.base, RadialSurface):
            return _sum_radial(self.base, self.direction, eps)
        f0 = self.base.field
        bump = self.direction

        def jet_rule(p):
            v0, g0, h0 = f0.real_jet(p)
            v1, g1, h1 = bump.real_jet(p)
            return v0 + eps * v1, g0 + eps * g1, h0 + eps * h1

        fld = ScalarField("graph", lambda p: f0.func(p) + eps * bump.real_jet(p)[0], jet_rule, domain=f0.domain)
        return GraphSurface(fld, self.base.base, f"{self.base.name}+{eps}*bump")

    def _graph_jets(self):
        if "jets" not in self._cache:
            self._cache["jets"] = (jet_of(self.base.field, self.grid.points), self.direction.jet(self.grid.points))
        return self._cache["jets"]

    def evaluate(self, functional: str, eps: float) -> float:
        if isinstance(self.base, RadialSurface):
            Z = self.surface(eps)
            if functional == "F":
                return fefferman_radial(Z, self.grid)
            if functional == "V":
                return volume_radial(Z, self.grid)
            if functional == "Q":
                return iso_quotient(fefferman_radial(Z, self.grid), volume_radial(Z, self.grid))
            raise ValueError(f"unknown functional {functional!r}")
        if functional != "F":
            raise ValueError("graph families only support the Fefferman measure")
        j0, j1 = self._graph_jets()
        mu = graph_mu(j0 + j1.scale(eps))
        if np.any(mu <= 0):
            raise NotPseudoconvexError(f"family leaves the pseudoconvex class at eps = {eps}")
        return float(self.offset + 2 ** (2 / 3) * np.sum(self.grid.weights * np.cbrt(mu)))


def _sum_radial(base: RadialSurface, G0: sa.SpherePolynomial, eps: float) -> RadialSurface:
    """Surface with G = G_base + eps * G0; derivatives add."""
    d1 = _derivs_from_polynomial(G0, eps)

    def derivs(z, w):
        a, b = base.derivs(z, w), d1(z, w)
        return {k: a[k] + b[k] for k in a}

    return RadialSurface(derivs, f"{base.name}+{eps}*G0")


def sphere_family(G0: sa.SpherePolynomial, grid: QuadratureGrid) -> PerturbationFamily:
    return PerturbationFamily(RadialSurface.constant(0.0, "unit sphere"), G0, grid)


def heisenberg_family(bump: BumpField, base: Box, grid: QuadratureGrid | None = None,
                      n: int = 64) -> PerturbationFamily:
    """Heisenberg patch over ``base`` perturbed by the bump; grid covers the support."""
    from .measures import heisenberg_field

    bump.check_inside(base)
    grid = _grid_or_default(bump, grid, n)
    offset = 2 ** (2 / 3) * _outside_volume(base, grid)
    return PerturbationFamily(GraphSurface(heisenberg_field(), base, "heisenberg"), bump, grid, offset)


@dataclass(frozen=True)
class EpsFit:
    coefficients: np.ndarray  # c_0 .. c_degree
    residual: float  # rms of the fit residuals
    condition: float
    flagged: bool
    eps: tuple
    values: tuple

    def __getitem__(self, k):
        return float(self.coefficients[k])


def eps_fit_oracle(fam, functional: str = "F", eps_set: Sequence[float] = DEFAULT_EPS,
                   degree: int = 4) -> EpsFit:
    """Least-squares polynomial fit of eps -> functional(fam at eps).

    ``fam`` is a PerturbationFamily or any callable eps -> value.  Coefficient
    k approximates the k-th order term of the expansion in eps.
    """
    eps = np.asarray(eps_set, dtype=float)
    if degree > 4 or degree < 1:
        raise ValueError("degree must be between 1 and 4")
    if not np.allclose(np.sort(eps), np.sort(-eps)):
        raise ValueError("eps set must be symmetric about 0")
    evaluate = fam if callable(fam) and not isinstance(fam, PerturbationFamily) else (
        lambda e: fam.evaluate(functional, e)
    )
    with ThreadPoolExecutor(max_workers=worker_count(len(eps))) as pool:
        vals = np.array(list(pool.map(evaluate, eps)))
    V = npoly.polyvander(eps, degree)
    cond = float(np.linalg.cond(V))
    coef = npoly.polyfit(eps, vals, degree)
    resid = vals - npoly.polyval(eps, coef)
    rms = float(np.sqrt(np.mean(resid**2)))
    quad_term = abs(coef[2]) * np.max(np.abs(eps)) ** 2 if degree >= 2 else abs(coef[1]) * np.max(np.abs(eps))
    flagged = bool(rms >= 1e-3 * quad_term) or cond > 1e12
    return EpsFit(coef, rms, cond, flagged, tuple(eps.tolist()), tuple(vals.tolist()))
