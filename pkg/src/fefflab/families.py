"""Special families: ball-pair intersections, shears of the ball, tubes over
convex curves, the L^2 / L^{4/3} holomorphic inequality, and a naive search
for the infimum of Q over holomorphic images of the ball.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import mpmath as mp
import numpy as np
from scipy.optimize import minimize

from . import sphere_algebra as sa
from .measures import MeasureReport, _report
from .quadrature import (
    QuadratureGrid,
    make_ball_grid,
    make_disk_grid,
    make_graded_disk_grid,
    make_sphere_grid,
    periodic_trapezoid,
)

PI = math.pi
EIGHT_PI = 8 * PI
HL_CONSTANT = 2 ** (-3 / 4) / math.sqrt(PI)
HL_BALL_RATIO = 2 ** (-5 / 4) / math.sqrt(PI)

# ---------------------------------------------------------------------------
# intersections of two balls


@dataclass(frozen=True)
class BallPairParams:
    R: float
    theta: float

    def __post_init__(self):
        if not (0 <= self.R <= 1) or not (0 <= self.theta < PI):
            raise ValueError(f"need 0 <= R <= 1 and 0 <= theta < pi, got R={self.R}, theta={self.theta}")

    @property
    def interior(self) -> bool:
        return self.R > 0 and self.theta > 0


def _clamped_acos(x):
    guard = mp.mpf("1e-12")
    if x > 1 + guard or x < -1 - guard:
        raise ValueError(f"arccos argument {x} outside [-1, 1]")
    return mp.acos(min(mp.mpf(1), max(mp.mpf(-1), x)))


def _working_dps(R) -> int:
    # numerator and denominator lose about 3*|log10 R| digits to cancellation
    return 40 + int(math.ceil(4 * max(0.0, -math.log10(float(R))))) if R > 0 else 40


def _q_mp(R, theta):
    c, s = mp.cos(theta), mp.sin(theta)
    D = 1 + R * R - 2 * R * c
    sq = mp.sqrt(D)
    lam = _clamped_acos((R - c) / sq)
    nu = _clamped_acos((1 - R * c) / sq)
    R53, R83 = mp.cbrt(R) ** 5, mp.cbrt(R) ** 8
    num = R83 * lam + nu - R * s * (1 + R83 - (R + R53) * c) / D
    den = R**4 * lam + nu - R * s * (1 + mp.mpf(2) / 3 * R * R * s * s + R**4 - (R + R**3) * c) / D
    if num <= 0 or den <= 0:
        raise ArithmeticError("cancellation destroyed the ball-pair quotient; raise precision")
    return 8 * mp.sqrt(mp.pi) * num**1.5 / den


def q_ball_pair(p: BallPairParams | float, theta: float | None = None, dps: int | None = None) -> float:
    """Isoperimetric quotient of the intersection of two balls (closed form).

    Interior parameters only; edges go through ``q_ball_pair_limit``.
    """
    if not isinstance(p, BallPairParams):
        p = BallPairParams(float(p), float(theta))
    if not p.interior:
        raise ValueError("q_ball_pair needs 0 < R and 0 < theta; use q_ball_pair_limit on the edges")
    with mp.workdps(dps or _working_dps(p.R)):
        return float(_q_mp(mp.mpf(p.R), mp.mpf(p.theta)))


def q_ball_pair_mp(R, theta, dps: int):
    """Closed form at a given working precision, returned as an mpf."""
    with mp.workdps(dps):
        return +_q_mp(mp.mpf(R), mp.mpf(theta))


@dataclass(frozen=True)
class LimitValue:
    value: float
    err_est: float
    nodes: tuple


class ExtrapolationError(ArithmeticError):
    pass


def _neville_at_zero(hs, vals):
    """Diagonal of the Neville tableau for the polynomial extrapolant at h = 0."""
    n = len(hs)
    P = list(vals)
    diag = [P[0]]
    for m in range(1, n):
        for i in range(n - m):
            P[i] = (hs[i + m] * P[i] - hs[i] * P[i + 1]) / (hs[i + m] - hs[i])
        diag.append(P[0])
    return diag


def _extrapolate(fn, h0, levels, dps, tol):
    with mp.workdps(dps):
        hs = [mp.mpf(h0) / 2**k for k in range(levels)]
        vals = [fn(h) for h in hs]
        diag = _neville_at_zero(hs, vals)
        err = abs(diag[-1] - diag[-2])
        if not err < tol:
            raise ExtrapolationError(f"extrapolation did not settle (last correction {float(err):.3g})")
        return LimitValue(float(diag[-1]), float(err), tuple(float(h) for h in hs))


def q_ball_pair_limit(edge: str, value: float, tol: float = 1e-9, levels: int = 8) -> LimitValue:
    """Boundary values of q by extrapolation of the closed form.

    edge = "R0": value is theta; q(R, theta) with t = R^{1/3} -> 0.
    edge = "theta0": value is R; q(R, theta) with theta -> 0.
    edge = "corner": value is s; q(1 - d, s*d) with d -> 0.
    The closed form is analytic in the running parameter along each path,
    so polynomial (Neville) extrapolation at 0 is used.
    """
    if edge == "R0":
        theta = float(value)
        if not 0 < theta < PI:
            raise ValueError("theta must lie in (0, pi)")
        fn = lambda t: _q_mp(t**3, mp.mpf(theta))
        return _extrapolate(fn, 0.02, levels, 110, tol)
    if edge == "theta0":
        R = float(value)
        if not 0 < R <= 1:
            raise ValueError("R must lie in (0, 1]")
        fn = lambda th: _q_mp(mp.mpf(R), th)
        # near R = 1 the expansion in theta only holds for theta << 1 - R
        h0 = 0.02 if R == 1 else 0.02 * min(1.0, (1 - R) / 0.1)
        return _extrapolate(fn, h0, levels, _working_dps(R) + 40, tol)
    if edge == "corner":
        s = float(value)
        if s <= 0:
            raise ValueError("slope must be positive")
        fn = lambda d: _q_mp(1 - d, s * d)
        return _extrapolate(fn, 0.02, levels, 80, tol)
    raise ValueError(f"unknown edge {edge!r}")


def q_value(R: float, theta: float) -> float:
    """q on the closed parameter region, edges by extrapolation."""
    if theta == 0:
        return q_ball_pair_limit("theta0", R).value if R > 0 else EIGHT_PI
    if R == 0:
        return q_ball_pair_limit("R0", theta).value
    return q_ball_pair(R, theta)


def theta_expansion(R: float, theta: float) -> float:
    return EIGHT_PI - 8 * (1 - R ** (1 / 3)) / (1 - R) ** 3 * theta**3


def corner_expansion(R: float, theta: float) -> float:
    return EIGHT_PI - 8 * theta**3 / (3 * (theta**2 + (1 - R) ** 2))


def theta_expansion_slope(R: float, thetas: Sequence[float] | None = None) -> float:
    """Log-log slope of |q - theta-expansion| against theta."""
    thetas = np.logspace(-3, -1, 9) if thetas is None else np.asarray(thetas)
    res = []
    with mp.workdps(60):
        for th in thetas:
            q = _q_mp(mp.mpf(R), mp.mpf(th))
            cub = 8 * (1 - mp.cbrt(R)) / (1 - mp.mpf(R)) ** 3 * mp.mpf(th) ** 3
            res.append(float(abs(q - (8 * mp.pi - cub))))
    return float(np.polyfit(np.log(thetas), np.log(res), 1)[0])


@dataclass(frozen=True)
class Sweep:
    R: np.ndarray
    theta: np.ndarray
    q: np.ndarray  # shape (len(R), len(theta))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["R", "theta", "q"])
        for i, R in enumerate(self.R):
            for j, th in enumerate(self.theta):
                wr.writerow([repr(float(R)), repr(float(th)), repr(float(self.q[i, j]))])
        return buf.getvalue()


def sweep_q(R_values, theta_values) -> Sweep:
    R_values, theta_values = np.asarray(R_values, float), np.asarray(theta_values, float)
    q = np.array([[q_value(R, th) for th in theta_values] for R in R_values])
    return Sweep(R_values, theta_values, q)


@dataclass(frozen=True)
class MinimizeResult:
    R: float
    theta: float
    q: float
    scan_min: float
    trace: list = field(repr=False)
    defaults: dict = field(default_factory=dict)


def minimize_q(n: int = 64, delta: float = 0.05, tol: float = 1e-6,
               theta_max: float | None = None) -> MinimizeResult:
    """Minimum of q over [0,1] x [0, pi - delta]: grid scan, then Nelder-Mead."""
    top = PI - delta if theta_max is None else theta_max
    sw = sweep_q(np.linspace(0, 1, n), np.linspace(0, top, n))
    i, j = np.unravel_index(np.argmin(sw.q), sw.q.shape)
    trace = []

    def objective(x):
        R, th = float(np.clip(x[0], 0, 1)), float(np.clip(x[1], 0, top))
        val = q_value(R, th)
        trace.append({"R": R, "theta": th, "q": val})
        return val

    res = minimize(objective, [sw.R[i], sw.theta[j]], method="Nelder-Mead",
                   bounds=[(0, 1), (0, top)], options={"xatol": tol, "fatol": 1e-12, "maxiter": 2000})
    R, th = float(np.clip(res.x[0], 0, 1)), float(np.clip(res.x[1], 0, top))
    q = float(res.fun)
    if sw.q[i, j] < q:
        R, th, q = float(sw.R[i]), float(sw.theta[j]), float(sw.q[i, j])
    return MinimizeResult(R, th, q, float(sw.q[i, j]), trace,
                          {"n": n, "delta": delta, "tol": tol, "theta_max": top})


# ---------------------------------------------------------------------------
# shears (z, w) -> (phi(w) z, w)


@dataclass(frozen=True)
class ShearSurface:
    phi: Callable  # holomorphic on the unit disk, vectorised over complex arrays
    name: str = "shear"
    n_panel: int = 12
    n_psi: int = 96
    grid_kind: str = "graded"  # "graded" resolves w = 1, "polar" resolves w = 0

    @classmethod
    def power(cls, eps: float, **kw) -> "ShearSurface":
        """phi = (w - 1 - eps)^{-3/2} (principal branch; |phi| is branch-free)."""
        return cls(lambda w: (w - 1 - eps) ** -1.5, f"shear(eps={eps})", **kw)

    def grid(self, refine: int = 1) -> QuadratureGrid:
        if self.grid_kind == "polar":
            return make_disk_grid(refine * 4 * self.n_panel, refine * self.n_psi)
        if self.grid_kind != "graded":
            raise ValueError(f"unknown shear grid kind {self.grid_kind!r}")
        # shrinking the excluded disc around w = 1 exposes non-integrable peaks
        return make_graded_disk_grid(refine * self.n_panel, refine * self.n_psi,
                                     r_min=1e-12 * 1e-4 ** (refine - 1))


def _shear_values(s: ShearSurface, grid: QuadratureGrid):
    w = grid.points[:, 0] + 1j * grid.points[:, 1]
    a = np.abs(s.phi(w))
    F = 2 ** (4 / 3) * PI * np.sum(grid.weights * a ** (4 / 3))
    V = PI * np.sum(grid.weights * a**2 * (1 - np.abs(w) ** 2))
    return float(F), float(V)


class DivergenceError(ArithmeticError):
    pass


def shear_measures(s: ShearSurface, refine: bool = True, max_rel_change: float = 1e-3) -> MeasureReport:
    """F = 2^{4/3} pi int |phi|^{4/3} dA and V = pi int |phi|^2 (1-|w|^2) dA on the unit disk."""
    g = s.grid()
    fv = _shear_values(s, g)
    ref = _shear_values(s, s.grid(2)) if refine else None
    if ref is not None:
        for a, b in zip(fv, ref):
            if abs(a - b) > max_rel_change * abs(b):
                raise DivergenceError(f"shear integral not settled under refinement ({a} vs {b})")
    return _report(s.name, g, fv, ref)


@dataclass(frozen=True)
class ShearAsymptotics:
    eps: tuple
    F: tuple
    V: tuple
    Q: tuple
    slope_F: float
    slope_V: float
    slope_Q: float
    slope_Q_from_FV: float  # slope_F^{3/2} / slope_V, the leading coefficient of Q
    residual_F: float
    residual_V: float
    residual_Q: float
    flagged: bool


def shear_asymptotics(eps_list: Sequence[float] = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)) -> ShearAsymptotics:
    """Linear fits of F, V against |log eps| and Q against sqrt|log eps|."""
    eps = np.asarray(eps_list, float)
    if np.log10(eps.max() / eps.min()) < 3:
        raise ValueError("eps list must span at least three decades")
    reps = [shear_measures(ShearSurface.power(e)) for e in eps]
    F = np.array([r.fefferman for r in reps])
    V = np.array([r.volume for r in reps])
    Q = np.array([r.quotient for r in reps])
    L = np.abs(np.log(eps))

    def fit(x, y):
        coef, res, *_ = np.polyfit(x, y, 1, full=True)
        rms = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
        return float(coef[0]), rms

    sF, rF = fit(L, F)
    sV, rV = fit(L, V)
    sQ, rQ = fit(np.sqrt(L), Q)
    flagged = any(r > 0.05 * abs(s) * np.ptp(x) for r, s, x in ((rF, sF, L), (rV, sV, L), (rQ, sQ, np.sqrt(L))))
    return ShearAsymptotics(tuple(eps), tuple(F), tuple(V), tuple(Q), sF, sV, sQ, sF**1.5 / sV,
                            rF, rV, rQ, flagged)


# ---------------------------------------------------------------------------
# L^2(ball) versus L^{4/3}(sphere) for holomorphic functions


@dataclass(frozen=True)
class HLReport:
    lhs: float  # ||h||_{L^2(U)}, exact
    rhs: float  # ||h||_{L^{4/3}(S^3)}, by quadrature
    ratio: float
    holds: bool


def hl_check(h: sa.SpherePolynomial, grid: QuadratureGrid | int = 48) -> HLReport:
    if not h.is_holomorphic():
        raise ValueError("h must be holomorphic (no zb, wb)")
    grid = make_sphere_grid(grid, grid, grid) if isinstance(grid, int) else grid
    lhs = math.sqrt(float(sa.integrate_ball(h.abs2())))
    rhs = float(np.sum(grid.weights * np.abs(h(grid.z, grid.w)) ** (4 / 3)) ** 0.75)
    ratio = lhs / rhs
    return HLReport(lhs, rhs, ratio, ratio <= HL_CONSTANT)


# ---------------------------------------------------------------------------
# tubes over convex curves


@dataclass(frozen=True)
class ConvexCurve:
    """Closed curve t -> (x, y), t in [0, 2pi); ``derivs(t)`` gives (x, y, x', y', x'', y'')."""

    derivs: Callable
    name: str = "curve"

    @classmethod
    def ellipse(cls, a: float, b: float, rotation: float = 0.0, center=(0.0, 0.0)):
        c, s = math.cos(rotation), math.sin(rotation)

        def d(t):
            X, Y = a * np.cos(t), b * np.sin(t)
            X1, Y1 = -a * np.sin(t), b * np.cos(t)
            rot = lambda p, q: (c * p - s * q, s * p + c * q)
            x, y = rot(X, Y)
            x1, y1 = rot(X1, Y1)
            x2, y2 = rot(-X, -Y)
            return x + center[0], y + center[1], x1, y1, x2, y2

        return cls(d, f"ellipse({a},{b})")

    @classmethod
    def circle(cls, radius: float = 1.0):
        return cls.ellipse(radius, radius)

    @classmethod
    def polar(cls, cos_coef: Sequence[float], sin_coef: Sequence[float] = (), name: str = "polar"):
        """r(t) = 1 + sum_k a_k cos(k t) + b_k sin(k t), k = 2, 3, ...

        Terms start at k = 2 because k = 1 only translates the curve to
        first order.  Convexity is checked by ``tube_measures``.
        """
        a = np.asarray(cos_coef, float)
        b = np.asarray(sin_coef, float) if len(sin_coef) else np.zeros_like(a)
        ks = np.arange(2, 2 + len(a))

        def d(t):
            t = np.asarray(t, float)
            C, S = np.cos(np.multiply.outer(t, ks)), np.sin(np.multiply.outer(t, ks))
            r = 1 + C @ a + S @ b
            r1 = (-S * ks) @ a + (C * ks) @ b
            r2 = (-C * ks**2) @ a + (-S * ks**2) @ b
            ct, st = np.cos(t), np.sin(t)
            x, y = r * ct, r * st
            x1, y1 = r1 * ct - r * st, r1 * st + r * ct
            x2 = r2 * ct - 2 * r1 * st - r * ct
            y2 = r2 * st + 2 * r1 * ct - r * st
            return x, y, x1, y1, x2, y2

        return cls(d, name)

    def affine(self, A, shift=(0.0, 0.0)) -> "ConvexCurve":
        """Image under x -> A x + shift with det A > 0."""
        A = np.asarray(A, float)
        if np.linalg.det(A) <= 0:
            raise ValueError("need an orientation-preserving affine map")
        base = self.derivs

        def d(t):
            x, y, x1, y1, x2, y2 = base(t)
            m = lambda p, q: (A[0, 0] * p + A[0, 1] * q, A[1, 0] * p + A[1, 1] * q)
            X, Y = m(x, y)
            X1, Y1 = m(x1, y1)
            X2, Y2 = m(x2, y2)
            return X + shift[0], Y + shift[1], X1, Y1, X2, Y2

        return ConvexCurve(d, f"affine({self.name})")


@dataclass(frozen=True)
class TubeReport:
    blaschke: float
    volume: float
    ratio: float


class NotConvexError(ValueError):
    pass


def tube_measures(c: ConvexCurve, n: int = 512) -> TubeReport:
    """Blaschke length int kappa^{1/3} ds, enclosed area, and blaschke^3 / area."""
    t, w = periodic_trapezoid(n)
    x, y, x1, y1, x2, y2 = c.derivs(t)
    cross = x1 * y2 - y1 * x2
    if np.any(cross <= 0):
        raise NotConvexError("curvature is not positive at every node")
    B = float(np.sum(w * np.cbrt(cross)))
    A = float(0.5 * np.sum(w * (x * y1 - y * x1)))
    return TubeReport(B, A, B**3 / A)


def random_convex_curve(rng: np.random.Generator, n_modes: int = 4, size: float = 0.05) -> ConvexCurve:
    """Seeded small Fourier perturbation of the circle, redrawn until strongly convex."""
    while True:
        a = rng.normal(scale=size, size=n_modes) / np.arange(2, 2 + n_modes) ** 2
        b = rng.normal(scale=size, size=n_modes) / np.arange(2, 2 + n_modes) ** 2
        c = ConvexCurve.polar(a, b, "random-polar")
        t = np.linspace(0, 2 * PI, 2048, endpoint=False)
        _, _, x1, y1, x2, y2 = c.derivs(t)
        if np.all(x1 * y2 - y1 * x2 > 1e-3):
            return c


# ---------------------------------------------------------------------------
# naive search over holomorphic images of the ball


@dataclass(frozen=True)
class MapFamily:
    """Parameter box -> |det H'| on S^3 and on the ball.

    ``det(params, z, w)`` returns det H' at the given points.
    ``identity`` is the parameter of the identity map.
    """

    name: str
    bounds: tuple
    det: Callable
    identity: tuple

    @classmethod
    def unitary(cls):
        return cls("unitary", ((0, 2 * PI), (0, PI / 2)),
                   lambda p, z, w: np.exp(1j * p[0]) * np.ones_like(z), (0.0, 0.0))

    @classmethod
    def shear(cls, t_max: float = 0.9):
        return cls("shear", ((0.0, t_max),), lambda p, z, w: 1 + p[0] * w, (0.0,))

    @classmethod
    def identity_only(cls):
        return cls("identity", ((0.0, 0.0),), lambda p, z, w: np.ones_like(z), (0.0,))


def image_measures(fam: MapFamily, params, sphere: QuadratureGrid, ball: QuadratureGrid):
    """(F, V, Q) of H(S^3) via the Jacobian formulas."""
    js = np.abs(fam.det(params, sphere.z, sphere.w))
    jb = np.abs(fam.det(params, ball.z, ball.w))
    F = 2 ** (1 / 3) * float(np.sum(sphere.weights * js ** (4 / 3)))
    V = float(np.sum(ball.weights * jb**2))
    return F, V, F**1.5 / V


@dataclass(frozen=True)
class QStarResult:
    best: tuple
    q: float
    trace: list = field(repr=False)
    collapsed: bool
    note: str = "upper bound for Q*, not the infimum"


def q_star_search(fam: MapFamily, sphere: QuadratureGrid | None = None, ball: QuadratureGrid | None = None,
                  start: Optional[Sequence[float]] = None, maxiter: int = 400) -> QStarResult:
    """Nelder-Mead over the parameter box of Q(H(unit sphere)); an upper bound for Q*."""
    sphere = make_sphere_grid(24, 24, 24) if sphere is None else sphere
    ball = make_ball_grid(12, 12, 12, 12) if ball is None else ball
    lo = np.array([b[0] for b in fam.bounds], float)
    hi = np.array([b[1] for b in fam.bounds], float)
    trace = []

    def objective(x):
        p = tuple(np.clip(x, lo, hi).tolist())
        q = image_measures(fam, p, sphere, ball)[2]
        trace.append({"params": list(p), "q": q})
        return q

    x0 = np.asarray(fam.identity if start is None else start, float)
    if np.all(hi == lo):
        q = objective(x0)
        return QStarResult(tuple(x0.tolist()), q, trace, False)
    res = minimize(objective, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                   options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": maxiter, "initial_simplex": None})
    best = tuple(np.clip(res.x, lo, hi).tolist())
    vals = [t["q"] for t in trace]
    collapsed = not res.success and res.nit >= maxiter
    i = int(np.argmin(vals))
    return QStarResult(tuple(trace[i]["params"]) if vals[i] < res.fun else best, float(min(vals[i], res.fun)),
                       trace, collapsed)
