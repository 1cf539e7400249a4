"""Pointwise second-order calculus for real scalar fields on C^2.

Two coordinate systems are used throughout:

* ``graph``   -- real coordinates ``(x, y, u)`` on C x R with ``z = x + iy``;
  a hypersurface is the graph ``v = F(z, u)``.
* ``ambient`` -- real coordinates ``(x, y, u, v)`` on C^2 with
  ``z = x + iy`` and ``w = u + iv``.

Jets store complex Wirtinger derivatives.  Conjugate entries (``F_zb``,
``rho_zb`` ...) are derived properties, so the pairing holds by
construction.  All jet fields may be numpy arrays of a common shape, which
is how the quadrature code evaluates whole grids at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import sympy as sp

EPS = np.finfo(float).eps
IMAG_TOL = 1e-12

DIM = {"graph": 3, "ambient": 4}


class MalformedJetError(ValueError):
    """A jet whose entries violate the Hermitian / conjugate structure."""


class DomainError(ValueError):
    """Evaluation requested outside a field's declared domain."""


@dataclass(frozen=True)
class AmbientPoint:
    z: complex
    w: complex

    def __post_init__(self):
        if not (np.isfinite(self.z) and np.isfinite(self.w)):
            raise ValueError("AmbientPoint components must be finite")

    def real_coords(self) -> np.ndarray:
        return np.array([self.z.real, self.z.imag, self.w.real, self.w.imag])


@dataclass(frozen=True)
class Jet2Ambient:
    """Value, (1,0)-gradient and Levi block of a real function rho(z, w)."""

    value: np.ndarray
    rho_z: np.ndarray
    rho_w: np.ndarray
    rho_zzb: np.ndarray
    rho_zwb: np.ndarray
    rho_wzb: np.ndarray
    rho_wwb: np.ndarray

    @property
    def rho_zb(self):
        return np.conj(self.rho_z)

    @property
    def rho_wb(self):
        return np.conj(self.rho_w)

    @classmethod
    def from_real(cls, value, grad, hess) -> "Jet2Ambient":
        """Build from real gradient/Hessian in the order (x, y, u, v)."""
        g = np.asarray(grad, dtype=float)
        H = np.asarray(hess, dtype=float)
        rx, ry, ru, rv = (g[..., i] for i in range(4))
        return cls(
            value=np.asarray(value, dtype=float),
            rho_z=0.5 * (rx - 1j * ry),
            rho_w=0.5 * (ru - 1j * rv),
            rho_zzb=0.25 * (H[..., 0, 0] + H[..., 1, 1]),
            # d_z d_wb = (dx - i dy)(du + i dv)/4
            rho_zwb=0.25 * (H[..., 0, 2] + H[..., 1, 3] + 1j * (H[..., 0, 3] - H[..., 1, 2])),
            rho_wzb=0.25 * (H[..., 0, 2] + H[..., 1, 3] - 1j * (H[..., 0, 3] - H[..., 1, 2])),
            rho_wwb=0.25 * (H[..., 2, 2] + H[..., 3, 3]),
        )


@dataclass(frozen=True)
class Jet2Graph:
    """Second-order jet of a graph height function F(z, u)."""

    F: np.ndarray
    F_z: np.ndarray
    F_u: np.ndarray
    F_zzb: np.ndarray
    F_zu: np.ndarray
    F_uu: np.ndarray

    @property
    def F_zb(self):
        return np.conj(self.F_z)

    @property
    def F_zbu(self):
        return np.conj(self.F_zu)

    @classmethod
    def from_real(cls, value, grad, hess) -> "Jet2Graph":
        """Build from real gradient/Hessian in the order (x, y, u)."""
        g = np.asarray(grad, dtype=float)
        H = np.asarray(hess, dtype=float)
        return cls(
            F=np.asarray(value, dtype=float),
            F_z=0.5 * (g[..., 0] - 1j * g[..., 1]),
            F_u=g[..., 2],
            F_zzb=0.25 * (H[..., 0, 0] + H[..., 1, 1]),
            F_zu=0.5 * (H[..., 0, 2] - 1j * H[..., 1, 2]),
            F_uu=H[..., 2, 2],
        )

    def __add__(self, other: "Jet2Graph") -> "Jet2Graph":
        return Jet2Graph(*(getattr(self, f) + getattr(other, f) for f in _GRAPH_FIELDS))

    def scale(self, c: float) -> "Jet2Graph":
        return Jet2Graph(*(c * getattr(self, f) for f in _GRAPH_FIELDS))

    def to_ambient(self) -> Jet2Ambient:
        """Jet of rho = -v + F(z, u) (independent of v)."""
        return Jet2Ambient(
            value=self.F,
            rho_z=self.F_z,
            rho_w=0.5 * self.F_u + 0.5j,
            rho_zzb=self.F_zzb,
            rho_zwb=0.5 * self.F_zu,
            rho_wzb=0.5 * self.F_zbu,
            rho_wwb=0.25 * self.F_uu,
        )


_GRAPH_FIELDS = ("F", "F_z", "F_u", "F_zzb", "F_zu", "F_uu")


def _real_part(val, scale, what: str):
    val = np.asarray(val)
    resid = np.abs(val.imag)
    bound = IMAG_TOL * np.maximum(np.asarray(scale, dtype=float), 1.0)
    if np.any(resid > bound):
        raise MalformedJetError(f"{what} has imaginary residue {resid.max():.3g}")
    return val.real


def bordered_hessian_M(jet: Jet2Ambient):
    """M(rho) = -det [[0, rho_z, rho_w], [rho_zb, rho_zzb, rho_wzb], [rho_wb, rho_zwb, rho_wwb]].

    Rows carry the holomorphic index, columns the antiholomorphic one.
    Returns a real value (or array); raises MalformedJetError if the
    determinant has an imaginary part beyond 1e-12 relative.
    """
    a, b = jet.rho_z, jet.rho_w
    ab, bb = jet.rho_zb, jet.rho_wb
    h11, h12, h21, h22 = jet.rho_zzb, jet.rho_zwb, jet.rho_wzb, jet.rho_wwb
    # cofactor expansion along the first row; h_jk = d_j d_kb
    terms = (
        a * (ab * h22 - h21 * bb),
        b * (ab * h12 - h11 * bb),
    )
    det = -terms[0] + terms[1]
    scale = np.abs(terms[0]) + np.abs(terms[1])
    return _real_part(-det, scale, "bordered Hessian determinant")


def graph_mu(jet: Jet2Graph):
    """Density mu(F) of the graph v = F(z, u); positive iff strongly pseudoconvex."""
    Fu = jet.F_u
    parts = (
        jet.F_zzb * (Fu**2 + 1),
        -jet.F_zu * (Fu + 1j) * jet.F_zb,
        -jet.F_zbu * (Fu - 1j) * jet.F_z,
        jet.F_uu * np.abs(jet.F_z) ** 2,
    )
    total = parts[0] + parts[1] + parts[2] + parts[3]
    scale = sum(np.abs(p) for p in parts)
    return _real_part(total, scale, "mu(F)")


# ---------------------------------------------------------------------------
# scalar fields


def graph_symbols():
    """Sympy coordinates for graph-mode expressions: x, y, u, z, zb."""
    x, y, u = sp.symbols("x y u", real=True)
    return {"x": x, "y": y, "u": u, "z": x + sp.I * y, "zb": x - sp.I * y}


def ambient_symbols():
    """Sympy coordinates for ambient expressions: x, y, u, v, z, zb, w, wb."""
    x, y, u, v = sp.symbols("x y u v", real=True)
    return {
        "x": x, "y": y, "u": u, "v": v,
        "z": x + sp.I * y, "zb": x - sp.I * y,
        "w": u + sp.I * v, "wb": u - sp.I * v,
    }


def _lambdify_real(expr, syms):
    f = sp.lambdify(syms, expr, modules="numpy")

    def call(*args):
        out = np.asarray(f(*args))
        if np.iscomplexobj(out):
            out = out.real
        return np.broadcast_to(out, np.broadcast(*args).shape).astype(float)

    return call


@dataclass(frozen=True)
class ScalarField:
    """A real scalar field with an evaluation rule for its 2-jet.

    ``func`` maps points of shape (..., d) to values; ``jet_rule`` (analytic
    mode only) maps points to ``(value, grad, hess)`` in real coordinates.
    ``domain`` optionally maps points to a boolean mask.
    """

    kind: str
    func: Callable
    jet_rule: Optional[Callable] = None
    mode: str = "analytic"
    h: Optional[float] = None
    domain: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in DIM:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.mode not in ("analytic", "fd"):
            raise ValueError(f"unknown derivative mode {self.mode!r}")
        if self.mode == "analytic" and self.jet_rule is None:
            raise ValueError("analytic mode needs a jet rule")

    @property
    def dim(self) -> int:
        return DIM[self.kind]

    @classmethod
    def from_sympy(cls, expr, kind: str = "graph", domain=None) -> "ScalarField":
        """Analytic field from a sympy expression in the real coordinates.

        Complex-looking expressions (built from ``z``/``zb``) are allowed as
        long as they are real-valued; the real part is taken after evaluation.
        """
        names = ("x", "y", "u") if kind == "graph" else ("x", "y", "u", "v")
        table = graph_symbols() if kind == "graph" else ambient_symbols()
        syms = [table[n] for n in names]
        expr = sp.sympify(expr)
        f = _lambdify_real(expr, syms)
        grads = [_lambdify_real(sp.diff(expr, s), syms) for s in syms]
        hess = [[_lambdify_real(sp.diff(expr, s, t), syms) for t in syms] for s in syms]

        def func(p):
            p = np.asarray(p, dtype=float)
            return f(*np.moveaxis(p, -1, 0))

        def jet_rule(p):
            p = np.asarray(p, dtype=float)
            args = np.moveaxis(p, -1, 0)
            g = np.stack([gi(*args) for gi in grads], axis=-1)
            H = np.stack([np.stack([hij(*args) for hij in row], axis=-1) for row in hess], axis=-2)
            return f(*args), g, H

        return cls(kind=kind, func=func, jet_rule=jet_rule, domain=domain)

    @classmethod
    def finite_difference(cls, func, kind: str = "graph", h=None, domain=None) -> "ScalarField":
        return cls(kind=kind, func=func, mode="fd", h=h, domain=domain)

    def with_mode(self, mode: str, h=None) -> "ScalarField":
        return ScalarField(self.kind, self.func, self.jet_rule, mode, h, self.domain)

    def real_jet(self, p):
        """(value, grad, hess) in real coordinates, by the field's own mode."""
        p = np.asarray(p, dtype=float)
        if self.mode == "analytic":
            return self.jet_rule(p)
        return fd_real_jet(self.func, p, self.h, self.domain)


def _check_domain(field: ScalarField, pts):
    if field.domain is not None and not np.all(field.domain(pts)):
        raise DomainError("point (or finite-difference stencil) outside the field's domain")


def fd_real_jet(func, p, h=None, domain=None):
    """Central-difference value, gradient and Hessian of ``func`` at points p.

    Default steps: eps^(1/3) for the gradient and eps^(1/4) for the Hessian,
    each scaled by max(1, |p_i|).  Diagonal second derivatives use the
    nested central stencil with spacing 2h, mixed ones the 4-point stencil.
    """
    p = np.asarray(p, dtype=float)
    d = p.shape[-1]
    scale = np.maximum(1.0, np.abs(p))
    h1 = (EPS ** (1 / 3) if h is None else h) * scale
    h2 = (EPS ** 0.25 if h is None else h) * scale
    eye = np.eye(d)

    def f(q):
        if domain is not None and not np.all(domain(q)):
            raise DomainError("finite-difference stencil leaves the domain")
        return np.asarray(func(q), dtype=float)

    f0 = f(p)
    grad = np.empty(p.shape)
    hess = np.empty(p.shape + (d,))
    for i in range(d):
        ei = eye[i]
        hi, ki = h1[..., i : i + 1], h2[..., i : i + 1]
        grad[..., i] = (f(p + hi * ei) - f(p - hi * ei)) / (2 * h1[..., i])
        hess[..., i, i] = (f(p + 2 * ki * ei) - 2 * f0 + f(p - 2 * ki * ei)) / (4 * h2[..., i] ** 2)
        for j in range(i):
            ej, kj = eye[j], h2[..., j : j + 1]
            mixed = (
                f(p + ki * ei + kj * ej) - f(p + ki * ei - kj * ej)
                - f(p - ki * ei + kj * ej) + f(p - ki * ei - kj * ej)
            ) / (4 * h2[..., i] * h2[..., j])
            hess[..., i, j] = hess[..., j, i] = mixed
    return f0, grad, hess


def jet_of(field: ScalarField, p):
    """Jet2Graph or Jet2Ambient of ``field`` at p (shape (d,) or (..., d))."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != field.dim:
        raise ValueError(f"{field.kind} field expects points with {field.dim} coordinates")
    _check_domain(field, p)
    value, grad, hess = field.real_jet(p)
    if not (np.all(np.isfinite(value)) and np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
        raise ValueError("non-finite derivative in jet")
    cls = Jet2Graph if field.kind == "graph" else Jet2Ambient
    return cls.from_real(value, grad, hess)
