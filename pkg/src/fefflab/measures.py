"""Fefferman measure, enclosed volume and isoperimetric quotient.

Surfaces come in three representations:

* :class:`GraphSurface` -- ``v = F(z, u)`` over a base region in (x, y, u);
* :class:`RadialSurface` -- ``e^G (|z|^2 + |w|^2) = 1`` with G homogeneous of
  degree 0, described by G and its tangential derivatives on S^3;
* :class:`CircularSurface` -- a radial surface with ``T G = 0``.

Radial surfaces never differentiate numerically on S^3: polynomial G gets
exact derivative polynomials from :mod:`fefflab.sphere_algebra`, closed-form
G gets symbolic derivatives through sympy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np
import sympy as sp

from .core_calculus import ScalarField, graph_mu, jet_of, graph_symbols
from .quadrature import (
    QuadratureGrid,
    make_ball3_grid,
    make_ball_grid,
    make_box_grid,
    make_cap_grid,
    make_sphere_grid,
)
from . import sphere_algebra as sa

CBRT2 = 2 ** (1 / 3)

DERIV_KEYS = ("G", "LG", "LbG", "TG", "LLbG", "LbLG", "LTG", "TTG")


class NotPseudoconvexError(ValueError):
    """Raised when a density that must be positive is not."""


# ---------------------------------------------------------------------------
# graph surfaces


@dataclass(frozen=True)
class Box:
    bounds: tuple  # ((x0, x1), (y0, y1), (u0, u1))

    @property
    def center(self):
        return np.array([0.5 * (a + b) for a, b in self.bounds])

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in self.bounds]))

    def grid(self, n, rule: str = "gauss") -> QuadratureGrid:
        counts = (n, n, n) if np.isscalar(n) else n
        return make_box_grid(self.bounds, counts, rule)


@dataclass(frozen=True)
class Ball3:
    radius: float
    center: tuple = (0.0, 0.0, 0.0)

    @property
    def volume(self) -> float:
        return 4 / 3 * math.pi * self.radius**3

    def grid(self, n, rule: str = "gauss") -> QuadratureGrid:
        counts = (n, n, n) if np.isscalar(n) else n
        return make_ball3_grid(self.radius, counts, self.center)


@dataclass(frozen=True)
class GraphSurface:
    field: ScalarField
    base: object
    name: str = "graph"

    @classmethod
    def from_branches(cls, branches: Sequence[ScalarField], base, name: str = "graph") -> "GraphSurface":
        """Pick the first candidate height function that is pseudoconvex at the base centre."""
        c = np.asarray(base.center, dtype=float)
        for f in branches:
            try:
                if graph_mu(jet_of(f, c)) > 0:
                    return cls(f, base, name)
            except (ValueError, FloatingPointError):
                continue
        raise NotPseudoconvexError("no branch is strongly pseudoconvex at the base centre")


def sphere_graph(radius: float = 1.0, patch: float = 0.6) -> GraphSurface:
    """Lower graph branch of |z|^2 + |w|^2 = R^2 over the ball of radius patch*R."""
    s = graph_symbols()
    r2 = radius**2 - s["x"] ** 2 - s["y"] ** 2 - s["u"] ** 2
    dom = lambda p: np.sum(np.asarray(p) ** 2, axis=-1) < radius**2
    branches = [ScalarField.from_sympy(sgn * sp.sqrt(r2), "graph", dom) for sgn in (1, -1)]
    return GraphSurface.from_branches(branches, Ball3(patch * radius), f"sphere(R={radius})")


def hyperboloid_graph(radius: float = 1.0, z0: float = 2.0, half: float = 0.2) -> GraphSurface:
    """A graph branch of |z|^2 - |w|^2 = R^2 over a box around (z, u) = (z0 R, 0)."""
    s = graph_symbols()
    r2 = s["x"] ** 2 + s["y"] ** 2 - s["u"] ** 2 - radius**2
    dom = lambda p: (np.asarray(p)[..., 0] ** 2 + np.asarray(p)[..., 1] ** 2 - np.asarray(p)[..., 2] ** 2) > radius**2
    c = z0 * radius
    box = Box(((c - half * radius, c + half * radius), (-half * radius, half * radius), (-half * radius, half * radius)))
    branches = [ScalarField.from_sympy(sgn * sp.sqrt(r2), "graph", dom) for sgn in (1, -1)]
    return GraphSurface.from_branches(branches, box, f"hyperboloid(R={radius})")


def heisenberg_field() -> ScalarField:
    s = graph_symbols()
    return ScalarField.from_sympy(s["x"] ** 2 + s["y"] ** 2, "graph")


def graph_density(Z: GraphSurface, grid: QuadratureGrid, jets=None):
    jets = jet_of(Z.field, grid.points) if jets is None else jets
    mu = np.atleast_1d(graph_mu(jets))
    bad = np.flatnonzero(mu <= 0)
    if bad.size:
        i = bad[0]
        raise NotPseudoconvexError(f"mu(F) = {mu[i]:.3g} <= 0 at node {i}, (x, y, u) = {grid.points[i]}")
    return mu


def fefferman_graph(Z: GraphSurface, grid: QuadratureGrid, jets=None) -> float:
    """2^{2/3} * sum_i w_i mu(F)(p_i)^{1/3}."""
    mu = graph_density(Z, grid, jets)
    return float(2 ** (2 / 3) * np.sum(grid.weights * np.cbrt(mu)))


# ---------------------------------------------------------------------------
# radial surfaces


def _derivs_from_polynomial(G: sa.SpherePolynomial, eps: float = 1.0):
    polys = {
        "G": G,
        "LG": sa.L(G),
        "LbG": sa.Lbar(G),
        "TG": sa.T(G),
        "LLbG": sa.L(sa.Lbar(G)),
        "LbLG": sa.Lbar(sa.L(G)),
        "LTG": sa.L(sa.T(G)),
        "TTG": sa.T(sa.T(G)),
    }

    def derivs(z, w):
        return {k: eps * p(z, w) for k, p in polys.items()}

    return derivs


def sphere_symbols():
    """Independent sympy symbols (z, w, zb, wb) for closed-form potentials G."""
    return sp.symbols("z w zb wb")


def tangential_fields_sympy(expr, symbols=None):
    z, w, zb, wb = symbols or sphere_symbols()
    Lop = lambda f: wb * sp.diff(f, z) - zb * sp.diff(f, w)
    Lbop = lambda f: w * sp.diff(f, zb) - z * sp.diff(f, wb)
    Top = lambda f: sp.I * (z * sp.diff(f, z) + w * sp.diff(f, w) - zb * sp.diff(f, zb) - wb * sp.diff(f, wb))
    TG = Top(expr)
    return {
        "G": expr,
        "LG": Lop(expr),
        "LbG": Lbop(expr),
        "TG": TG,
        "LLbG": Lop(Lbop(expr)),
        "LbLG": Lbop(Lop(expr)),
        "LTG": Lop(TG),
        "TTG": Top(TG),
    }


def _derivs_from_sympy(expr, symbols=None):
    symbols = symbols or sphere_symbols()
    exprs = tangential_fields_sympy(expr, symbols)
    funcs = {k: sp.lambdify(symbols, e, modules="numpy") for k, e in exprs.items()}

    def derivs(z, w):
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        args = (z, w, np.conj(z), np.conj(w))
        return {k: np.broadcast_to(np.asarray(f(*args), dtype=complex), z.shape) for k, f in funcs.items()}

    return derivs


@dataclass(frozen=True)
class RadialSurface:
    """Star-shaped surface e^G (|z|^2+|w|^2) = 1 with S G = 0.

    ``derivs(z, w)`` returns the dict of tangential derivatives
    (``DERIV_KEYS``) of G at points of S^3.
    """

    derivs: Callable
    name: str = "radial"
    polynomial: Optional[sa.SpherePolynomial] = None
    eps: float = 1.0
    expr: object = None

    @classmethod
    def from_polynomial(cls, G: sa.SpherePolynomial, eps: float = 1.0, name: str | None = None):
        if not G.is_real():
            raise ValueError("G must be real-valued on the sphere")
        return cls(_derivs_from_polynomial(G, eps), name or f"poly({sa.format_polynomial(G)})*{eps}", G, eps)

    @classmethod
    def from_sympy(cls, expr, name: str = "closed-form"):
        return cls(_derivs_from_sympy(expr), name, expr=expr)

    @classmethod
    def constant(cls, c: float, name: str | None = None):
        return cls(_derivs_from_polynomial(sa.ONE, float(c)), name or f"const({c})", sa.ONE, float(c))

    @classmethod
    def sphere(cls, radius: float = 1.0):
        """The sphere of the given radius: e^G = R^{-2}."""
        return cls.constant(-2 * math.log(radius), name=f"sphere(R={radius})")

    def rotated(self, U) -> "RadialSurface":
        """G o U for a unitary 2x2 matrix U (closed-form route)."""
        z, w, zb, wb = sphere_symbols()
        expr = self.expr if self.expr is not None else self.polynomial.to_sympy((z, w, zb, wb)) * self.eps
        U = np.asarray(U, dtype=complex)
        c = lambda x: sp.Float(x.real, 30) + sp.I * sp.Float(x.imag, 30)
        sub = {
            z: c(U[0, 0]) * z + c(U[0, 1]) * w,
            w: c(U[1, 0]) * z + c(U[1, 1]) * w,
            zb: c(U[0, 0].conjugate()) * zb + c(U[0, 1].conjugate()) * wb,
            wb: c(U[1, 0].conjugate()) * zb + c(U[1, 1].conjugate()) * wb,
        }
        return RadialSurface.from_sympy(sp.expand(expr.xreplace(sub)), name=f"{self.name}@U")


@dataclass(frozen=True)
class CircularSurface(RadialSurface):
    """Radial surface with T G = 0 (circular)."""

    def __post_init__(self):
        if self.polynomial is not None:
            if not sa.T(self.polynomial).is_zero():
                raise ValueError("circular surface needs T G = 0")
        else:
            rng = np.random.default_rng(0)
            v = rng.normal(size=(8, 4))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            d = self.derivs(v[:, 0] + 1j * v[:, 1], v[:, 2] + 1j * v[:, 3])
            if np.max(np.abs(d["TG"])) > 1e-10 * max(1.0, np.max(np.abs(d["G"]))):
                raise ValueError("circular surface needs T G = 0")

    @classmethod
    def linear_image(cls, matrix, name: str | None = None) -> "CircularSurface":
        """|a z + b w|^2 + |c z + d w|^2 = 1, i.e. a C-linear image of the unit sphere."""
        (a, b), (c, d) = np.asarray(matrix, dtype=complex)
        z, w, zb, wb = sphere_symbols()
        num = lambda x: sp.Float(x.real, 30) + sp.I * sp.Float(x.imag, 30)
        conj = lambda x: num(np.conj(x))
        e1 = (num(a) * z + num(b) * w) * (conj(a) * zb + conj(b) * wb)
        e2 = (num(c) * z + num(d) * w) * (conj(c) * zb + conj(d) * wb)
        expr = sp.log(sp.expand(e1 + e2) / (z * zb + w * wb))
        return cls(_derivs_from_sympy(expr), name or "linear-image", expr=expr)


def mas_bracket(d: Dict[str, np.ndarray]) -> np.ndarray:
    """e^{-3G} M(rho) on S^3 for S G = 0, from the tangential derivatives of G."""
    A = 0.5 * (d["LLbG"] + d["LbLG"])
    TG, LG, LbG, LTG, TTG = d["TG"], d["LG"], d["LbG"], d["LTG"], d["TTG"]
    val = (
        1 + A + 0.25 * TG**2 + np.imag(LbG * LTG)
        + 0.25 * (TG**2 * A + LG * LbG * TTG - 2 * np.real(LbG * TG * LTG))
    )
    return np.real(val)


def monge_ampere_sphere(Z: RadialSurface, z, w):
    """M(rho) at points of S^3 for rho = e^G (|z|^2+|w|^2) - 1."""
    d = Z.derivs(z, w)
    return np.exp(3 * np.real(d["G"])) * mas_bracket(d)


def _radial_density(Z: RadialSurface, grid: QuadratureGrid):
    d = Z.derivs(grid.z, grid.w)
    G = np.real(d["G"])
    br = mas_bracket(d)
    bad = np.flatnonzero(br <= 0)
    if bad.size:
        i = bad[0]
        raise NotPseudoconvexError(
            f"Monge-Ampere bracket {br[i]:.3g} <= 0 at node {i} (z, w) = ({grid.z[i]:.4g}, {grid.w[i]:.4g})"
        )
    return G, br


def fefferman_radial(Z: RadialSurface, grid: QuadratureGrid) -> float:
    """2^{1/3} * int_{S^3} e^{-7G/3} M(rho)^{1/3}, with M from the tangential derivatives."""
    G, br = _radial_density(Z, grid)
    return float(CBRT2 * np.sum(grid.weights * np.exp(-4 * G / 3) * np.cbrt(br)))


def volume_radial(Z: RadialSurface, grid: QuadratureGrid) -> float:
    """(1/4) int_{S^3} e^{-2G}."""
    d = Z.derivs(grid.z, grid.w)
    return float(0.25 * np.sum(grid.weights * np.exp(-2 * np.real(d["G"]))))


def iso_quotient(f: float, v: float) -> float:
    """Q = F^{3/2} / V."""
    if v <= 0:
        raise ValueError("volume must be positive")
    if f < 0:
        raise ValueError("Fefferman measure must be non-negative")
    return f**1.5 / v


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class MeasureReport:
    surface: str
    grid: tuple
    fefferman: float
    volume: float
    quotient: float
    err_est: float

    def to_json(self) -> dict:
        return {
            "surface": self.surface,
            "grid": list(self.grid),
            "fefferman": self.fefferman,
            "volume": self.volume,
            "quotient": self.quotient,
            "err_est": self.err_est,
        }


def _report(name, grid, fv, refined_fv=None) -> MeasureReport:
    f, v = fv
    q = iso_quotient(f, v)
    err = 0.0
    if refined_fv is not None:
        f2, v2 = refined_fv
        err = max(abs(f - f2), abs(v - v2), abs(q - iso_quotient(f2, v2)))
    return MeasureReport(name, tuple(grid.counts), f, v, q, err)


def radial_measures(Z: RadialSurface, grid: QuadratureGrid | int = 32, refine: bool = True) -> MeasureReport:
    if isinstance(grid, int):
        grid = make_sphere_grid(grid, grid, grid)
    fv = (fefferman_radial(Z, grid), volume_radial(Z, grid))
    fine = None
    if refine:
        g2 = grid.refined()
        fine = (fefferman_radial(Z, g2), volume_radial(Z, g2))
    return _report(Z.name, grid, fv, fine)


@dataclass(frozen=True)
class CircularResult:
    report: MeasureReport
    curvature: np.ndarray  # CP^1 curvature at the grid nodes
    gauss_bonnet: float  # int kappa dA over CP^1, lifted to S^3
    fefferman_from_curvature: float  # 2^{-2/3} pi int kappa^{1/3} dA


def circular_measures(Z: CircularSurface, grid: QuadratureGrid | int = 32, refine: bool = True) -> CircularResult:
    """Measures of a circular surface plus the CP^1 curvature picture.

    kappa = e^{2G}(1 + (L Lbar + Lbar L)G/2) is the curvature of the metric
    2 e^{-G} |z dw - w dz| / (|z|^2+|w|^2) on CP^1, whose area form is
    e^{-2G} times the round one.  Integrals over CP^1 are lifted to S^3 with
    the factor 2/pi (the round CP^1 has area 4 pi, S^3 has area 2 pi^2).
    """
    if isinstance(grid, int):
        grid = make_sphere_grid(grid, grid, grid)
    d = Z.derivs(grid.z, grid.w)
    G = np.real(d["G"])
    kappa = np.exp(2 * G) * np.real(1 + 0.5 * (d["LLbG"] + d["LbLG"]))
    bad = np.flatnonzero(kappa <= 0)
    if bad.size:
        raise NotPseudoconvexError(f"CP^1 curvature {kappa[bad[0]]:.3g} <= 0 at node {bad[0]}")
    area = np.exp(-2 * G)
    lift = 2 / math.pi
    gb = lift * float(np.sum(grid.weights * kappa * area))
    f_curv = 2 ** (-2 / 3) * math.pi * lift * float(np.sum(grid.weights * np.cbrt(kappa) * area))
    report = radial_measures(Z, grid, refine)
    return CircularResult(report, kappa, gb, f_curv)


def random_circular_surface(rng: np.random.Generator, order: int = 2, size: float = 0.15,
                            grid: QuadratureGrid | int = 16) -> CircularSurface:
    """Seeded real G built from balanced monomials z^a w^b zb^c wb^d, a+b = c+d <= order.

    Draws are repeated until the CP^1 curvature is positive on ``grid``.
    """
    if isinstance(grid, int):
        grid = make_sphere_grid(grid, grid, grid)
    while True:
        P = sa.SpherePolynomial({})
        for k in range(1, order + 1):
            for a in range(k + 1):
                for c in range(k + 1):
                    coef = complex(rng.normal(), rng.normal()) * size / k
                    P = P + sa.SpherePolynomial.monomial(a, k - a, c, k - c, coef)
        G = P + P.conj()
        G = G - sa.SpherePolynomial.constant(float(sa.integrate_sphere(G).real) / (2 * math.pi**2))
        Z = CircularSurface.from_polynomial(G, 1.0, "random-circular")
        d = Z.derivs(grid.z, grid.w)
        if np.all(np.real(1 + 0.5 * (d["LLbG"] + d["LbLG"])) > 0.05):
            return Z


# ---------------------------------------------------------------------------
# quadrature validation against exact monomial integrals


@dataclass(frozen=True)
class FourierCheck:
    domain: str  # "sphere" or "ball"
    a: int
    b: int
    exact: float
    quadrature: float

    @property
    def rel_err(self) -> float:
        return abs(self.quadrature - self.exact) / abs(self.exact)


def fourier_checks(n: int = 32, max_degree: int = 6) -> list:
    """|z|^{2a}|w|^{2b} over S^3 and the unit ball, quadrature against exact, a + b <= max_degree."""
    sg = make_sphere_grid(n, n, n)
    bg = make_ball_grid(n, n, n, n)
    out = []
    for a in range(max_degree + 1):
        for b in range(max_degree + 1 - a):
            m = sa.SpherePolynomial.monomial(a, b, a, b)
            for name, g, exact in (("sphere", sg, sa.integrate_sphere(m)), ("ball", bg, sa.integrate_ball(m))):
                q = float(np.sum(g.weights * np.abs(g.z) ** (2 * a) * np.abs(g.w) ** (2 * b)))
                out.append(FourierCheck(name, a, b, float(exact), q))
    return out


# ---------------------------------------------------------------------------
# graph route versus radial route on the same piece of surface


def _radial_cutoff(p3, s: float):
    r2 = np.sum(p3**2, axis=-1) / s**2
    inside = r2 < 1
    return np.where(inside, np.exp(1 - 1 / np.where(inside, 1 - r2, 1.0)), 0.0)


@dataclass(frozen=True)
class CapAgreement:
    graph: float
    radial: float

    @property
    def rel_diff(self) -> float:
        return abs(self.graph - self.radial) / abs(self.radial)


def ellipsoid_radial(a: float, b: float) -> RadialSurface:
    """|z|^2/a^2 + |w|^2/b^2 = 1 in radial form."""
    z, w, zb, wb = sphere_symbols()
    expr = sp.log((z * zb / a**2 + w * wb / b**2) / (z * zb + w * wb))
    return RadialSurface.from_sympy(expr, name=f"ellipsoid({a},{b})")


def ellipsoid_graph(a: float, b: float, base) -> GraphSurface:
    """Lower branch v = -sqrt(b^2 (1 - |z|^2/a^2) - u^2)."""
    s = graph_symbols()
    expr = -sp.sqrt(b**2 * (1 - (s["x"] ** 2 + s["y"] ** 2) / a**2) - s["u"] ** 2)
    dom = lambda p: b**2 * (1 - (p[..., 0] ** 2 + p[..., 1] ** 2) / a**2) - p[..., 2] ** 2 > 0
    return GraphSurface(ScalarField.from_sympy(expr, "graph", dom), base, f"ellipsoid({a},{b})")


def cap_agreement(a: float = 1.0, b: float = 1.0, support: float = 0.5, n: int = 48) -> CapAgreement:
    """Fefferman measure of the lower cap of an ellipsoid, weighted by a smooth cutoff
    chi(x, y, u), computed by the graph formula and by the radial formula."""
    s = support * min(a, b)
    base = Ball3(s)
    Zg = ellipsoid_graph(a, b, base)
    gg = base.grid(n)
    mu = graph_density(Zg, gg)
    graph = float(2 ** (2 / 3) * np.sum(gg.weights * _radial_cutoff(gg.points, s) * np.cbrt(mu)))

    Zr = ellipsoid_radial(a, b)
    # the cutoff lives inside |p_xyu| < s, i.e. inside a cap of angle arcsin(s / min|p|)
    half = min(math.pi / 2, math.asin(min(1.0, s / min(a, b))) + 0.05)
    cg = make_cap_grid(half, (n, n, n))
    G, br = _radial_density(Zr, cg)
    p3 = np.exp(-G / 2)[:, None] * cg.points[:, :3]
    radial = float(CBRT2 * np.sum(cg.weights * _radial_cutoff(p3, s) * np.exp(-4 * G / 3) * np.cbrt(br)))
    return CapAgreement(graph, radial)
