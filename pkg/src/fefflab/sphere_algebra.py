"""Exact polynomial calculus in z, w, zb, wb on the unit sphere S^3 of C^2.

Polynomials are sparse maps from exponent tuples ``(a, b, c, d)`` (for
``z^a w^b zb^c wb^d``) to coefficients.  Coefficients are exact Gaussian
rationals (:class:`QI`) whenever the inputs are exact; floats and complex
floats are accepted too and simply propagate.

Integrals come back as :class:`PiMultiple` -- a coefficient times a power
of pi -- so sphere/ball integrals of polynomials never touch quadrature.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Number, Rational
from typing import Dict, Iterable, Tuple

import numpy as np

Exponent = Tuple[int, int, int, int]


class QI:
    """Gaussian rational re + i*im with Fraction parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def coerce(x):
        if isinstance(x, QI):
            return x
        if isinstance(x, (int, Fraction)) or isinstance(x, Rational):
            return QI(x)
        return None

    def conjugate(self):
        return QI(self.re, -self.im)

    def __add__(self, other):
        o = QI.coerce(other)
        if o is None:
            return complex(self) + other
        return QI(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return QI(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = QI.coerce(other)
        if o is None:
            return complex(self) * other
        return QI(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = QI.coerce(other)
        if o is None:
            return complex(self) / other
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("QI division by zero")
        num = self * o.conjugate()
        return QI(num.re / den, num.im / den)

    def __eq__(self, other):
        o = QI.coerce(other)
        if o is None:
            try:
                return complex(self) == complex(other)
            except TypeError:
                return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __float__(self):
        if self.im:
            raise TypeError("QI with nonzero imaginary part has no float value")
        return float(self.re)

    @property
    def real(self):
        return self.re

    @property
    def imag(self):
        return self.im

    def __repr__(self):
        if not self.im:
            return f"QI({self.re})"
        return f"QI({self.re}, {self.im})"


I = QI(0, 1)


def _is_zero(c) -> bool:
    if isinstance(c, QI):
        return not c
    return c == 0


def _conj(c):
    return c.conjugate() if hasattr(c, "conjugate") else c


def _to_exact(c):
    q = QI.coerce(c)
    return q if q is not None else c


@dataclass(frozen=True)
class PiMultiple:
    """The number ``coeff * pi**power`` with an exact (or float) coefficient."""

    coeff: object
    power: int

    @property
    def value(self) -> complex:
        v = complex(self.coeff) * math.pi**self.power
        return v.real if v.imag == 0 else v

    def __float__(self):
        return float(self.coeff) * math.pi**self.power

    def _same(self, other: "PiMultiple"):
        if self.power != other.power and not (_is_zero(self.coeff) or _is_zero(other.coeff)):
            raise ValueError("cannot add different powers of pi exactly")
        return self.power if not _is_zero(self.coeff) else other.power

    def __add__(self, other: "PiMultiple"):
        return PiMultiple(self.coeff + other.coeff, self._same(other))

    def __sub__(self, other: "PiMultiple"):
        return PiMultiple(self.coeff - other.coeff, self._same(other))

    def __neg__(self):
        return PiMultiple(-self.coeff, self.power)

    def scale(self, c, dpower: int = 0) -> "PiMultiple":
        return PiMultiple(self.coeff * c, self.power + dpower)

    @property
    def real(self) -> "PiMultiple":
        c = self.coeff
        return PiMultiple(QI(c.re) if isinstance(c, QI) else complex(c).real, self.power)

    @property
    def imag(self) -> "PiMultiple":
        c = self.coeff
        return PiMultiple(QI(c.im) if isinstance(c, QI) else complex(c).imag, self.power)

    def conjugate(self) -> "PiMultiple":
        return PiMultiple(_conj(self.coeff), self.power)

    def is_zero(self) -> bool:
        return _is_zero(self.coeff)

    def __eq__(self, other):
        if not isinstance(other, PiMultiple):
            return NotImplemented
        if self.is_zero() and other.is_zero():
            return True
        return self.power == other.power and _to_exact(self.coeff) == _to_exact(other.coeff)

    def __repr__(self):
        return f"PiMultiple({self.coeff!r}, {self.power})"


class SpherePolynomial:
    """Sparse polynomial in z, w, zb, wb.  Immutable after construction."""

    __slots__ = ("terms",)

    def __init__(self, terms: Dict[Exponent, object] | None = None):
        clean = {}
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != 4 or min(exp) < 0:
                raise ValueError(f"bad exponent {exp}")
            c = _to_exact(c)
            if not _is_zero(c):
                clean[exp] = clean.get(exp, 0) + c
                if _is_zero(clean[exp]):
                    del clean[exp]
        self.terms = clean

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, c) -> "SpherePolynomial":
        return cls({(0, 0, 0, 0): c})

    @classmethod
    def monomial(cls, a=0, b=0, c=0, d=0, coeff=1) -> "SpherePolynomial":
        return cls({(a, b, c, d): coeff})

    @classmethod
    def parse(cls, text: str) -> "SpherePolynomial":
        return parse_polynomial(text)

    # ring operations ----------------------------------------------------
    def __add__(self, other):
        other = _as_poly(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return SpherePolynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return SpherePolynomial({e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        if not isinstance(other, SpherePolynomial):
            return self.scale(other)
        out: Dict[Exponent, object] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = (e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2], e1[3] + e2[3])
                out[e] = out.get(e, 0) + c1 * c2
        return SpherePolynomial(out)

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, n: int):
        out = SpherePolynomial.constant(1)
        for _ in range(n):
            out = out * self
        return out

    def scale(self, c) -> "SpherePolynomial":
        c = _to_exact(c)
        return SpherePolynomial({e: v * c for e, v in self.terms.items()})

    def conj(self) -> "SpherePolynomial":
        return SpherePolynomial({(c_, d_, a_, b_): _conj(v) for (a_, b_, c_, d_), v in self.terms.items()})

    def abs2(self) -> "SpherePolynomial":
        """|p|^2 as the polynomial p * conj(p)."""
        return self * self.conj()

    # predicates ---------------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, SpherePolynomial):
            other = _as_poly(other)
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def is_real(self) -> bool:
        return self.conj() == self

    def is_holomorphic(self) -> bool:
        return all(e[2] == 0 and e[3] == 0 for e in self.terms)

    def is_exact(self) -> bool:
        return all(isinstance(c, QI) for c in self.terms.values())

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    # numerics -----------------------------------------------------------
    def __call__(self, z, w):
        """Evaluate at complex points (arrays broadcast)."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        out = np.zeros(np.broadcast(z, w).shape, dtype=complex)
        zb, wb = np.conj(z), np.conj(w)
        for (a, b, c, d), coef in self.terms.items():
            out = out + complex(coef) * z**a * w**b * zb**c * wb**d
        return out

    def to_sympy(self, symbols=None):
        """Sympy expression in independent symbols (z, w, zb, wb)."""
        import sympy as sp

        z, w, zb, wb = symbols or sp.symbols("z w zb wb")
        expr = sp.Integer(0)
        for (a, b, c, d), coef in self.terms.items():
            if isinstance(coef, QI):
                sc = sp.Rational(coef.re.numerator, coef.re.denominator) + sp.I * sp.Rational(
                    coef.im.numerator, coef.im.denominator
                )
            else:
                sc = sp.sympify(complex(coef))
            expr += sc * z**a * w**b * zb**c * wb**d
        return expr

    def __repr__(self):
        return f"SpherePolynomial({format_polynomial(self)!r})"


def _as_poly(x) -> SpherePolynomial:
    if isinstance(x, SpherePolynomial):
        return x
    if isinstance(x, (Number, QI)):
        return SpherePolynomial.constant(x)
    raise TypeError(f"cannot treat {type(x).__name__} as a polynomial")


Z = SpherePolynomial.monomial(1, 0, 0, 0)
W = SpherePolynomial.monomial(0, 1, 0, 0)
ZB = SpherePolynomial.monomial(0, 0, 1, 0)
WB = SpherePolynomial.monomial(0, 0, 0, 1)
ONE = SpherePolynomial.constant(1)


def poly_arith(p: SpherePolynomial, q=None, op: str = "add"):
    """Dispatch for add | mul | scale | conj (q is a scalar for ``scale``)."""
    if op == "add":
        return p + q
    if op == "mul":
        return p * q
    if op == "scale":
        return p.scale(q)
    if op == "conj":
        return p.conj()
    raise ValueError(f"unknown op {op!r}")


# ---------------------------------------------------------------------------
# tangential vector fields on S^3


def _apply_L(p):
    out = {}
    for (a, b, c, d), v in p.terms.items():
        if a:
            e = (a - 1, b, c, d + 1)
            out[e] = out.get(e, 0) + v * a
        if b:
            e = (a, b - 1, c + 1, d)
            out[e] = out.get(e, 0) - v * b
    return SpherePolynomial(out)


def _apply_Lbar(p):
    out = {}
    for (a, b, c, d), v in p.terms.items():
        if c:
            e = (a, b + 1, c - 1, d)
            out[e] = out.get(e, 0) + v * c
        if d:
            e = (a + 1, b, c, d - 1)
            out[e] = out.get(e, 0) - v * d
    return SpherePolynomial(out)


def _apply_T(p):
    return SpherePolynomial({e: v * QI(0, e[0] + e[1] - e[2] - e[3]) for e, v in p.terms.items()})


def _apply_S(p):
    return SpherePolynomial({e: v * sum(e) for e, v in p.terms.items()})


_FIELDS = {"L": _apply_L, "Lbar": _apply_Lbar, "T": _apply_T, "S": _apply_S}


def apply_field(X: str, p: SpherePolynomial) -> SpherePolynomial:
    """Apply L = wb d_z - zb d_w, Lbar = w d_zb - z d_wb, T or S to p.

    ``X`` may also be a word such as ``"L Lbar"`` (applied right to left,
    i.e. ``"L Lbar"`` means L(Lbar p)).
    """
    names = X.split()
    for name in reversed(names):
        try:
            p = _FIELDS[name](p)
        except KeyError:
            raise ValueError(f"unknown vector field {name!r}") from None
    return p


def L(p):
    return _apply_L(p)


def Lbar(p):
    return _apply_Lbar(p)


def T(p):
    return _apply_T(p)


def S(p):
    return _apply_S(p)


def sym_laplacian(p: SpherePolynomial) -> SpherePolynomial:
    """(L Lbar + Lbar L) p / 2."""
    return (L(Lbar(p)) + Lbar(L(p))).scale(Fraction(1, 2))


# ---------------------------------------------------------------------------
# integration


def _factorial_ratio(a, b, extra):
    return Fraction(math.factorial(a) * math.factorial(b), math.factorial(a + b + extra))


def integrate_sphere(p: SpherePolynomial) -> PiMultiple:
    """Integral over S^3 against euclidean surface measure, exactly.

    Only monomials |z|^{2a}|w|^{2b} survive, each giving 2 pi^2 a! b! / (a+b+1)!.
    """
    total = QI(0)
    for (a, b, c, d), v in p.terms.items():
        if a == c and b == d:
            total = total + v * (2 * _factorial_ratio(a, b, 1))
    return PiMultiple(total, 2)


def integrate_ball(p: SpherePolynomial) -> PiMultiple:
    """Integral over the unit ball of C^2: |z|^{2a}|w|^{2b} -> pi^2 a! b! / (a+b+2)!."""
    total = QI(0)
    for (a, b, c, d), v in p.terms.items():
        if a == c and b == d:
            total = total + v * _factorial_ratio(a, b, 2)
    return PiMultiple(total, 2)


# ---------------------------------------------------------------------------
# second variation of the isoperimetric quotient at the sphere


class PreconditionError(ValueError):
    pass


def _require_real(G: SpherePolynomial, what="G"):
    if not G.is_real():
        raise PreconditionError(f"{what} must be real-valued")


def second_variation_Q(G: SpherePolynomial) -> PiMultiple:
    """Exact eps^2 coefficient of Q(Z_eps) for G = eps*G0 with zero sphere mean.

    (1/(3 pi)) * int (5 |T G0|^2 - 2 |L Lbar G0 + 2 G0|^2) over S^3.
    """
    _require_real(G)
    if not integrate_sphere(G).is_zero():
        raise PreconditionError("G must have zero mean over the sphere")
    TG = T(G)
    B = L(Lbar(G)) + G.scale(2)
    integral = integrate_sphere(TG.abs2().scale(5) - B.abs2().scale(2))
    return integral.scale(Fraction(1, 3), -1).real


def closed_form_coeff(kind: str, j: int, k: int) -> PiMultiple:
    """Closed-form eps^2 coefficients for the two families of sphere modes.

    kind "A": G0 = z^j w^k + conj;  kind "B": G0 = z^j wb^k + conj.
    """
    ratio = _factorial_ratio(j, k, 1)
    if kind == "A":
        if j < 0 or k < 0 or (j, k) == (0, 0):
            raise ValueError("kind A needs (j, k) != (0, 0) with j, k >= 0")
        return PiMultiple(QI(Fraction(16, 3) * ratio * (j + k + 2) * (j + k - 1)), 1)
    if kind == "B":
        if j < 1 or k < 1:
            raise ValueError("kind B needs j, k >= 1")
        return PiMultiple(QI(-Fraction(8, 3) * ratio * (j + 2) * (j - 1) * (k + 2) * (k - 1)), 1)
    raise ValueError(f"unknown mode kind {kind!r}")


def mode_polynomial(kind: str, j: int, k: int) -> SpherePolynomial:
    if kind == "A":
        m = SpherePolynomial.monomial(j, k, 0, 0)
    elif kind == "B":
        m = SpherePolynomial.monomial(j, 0, 0, k)
    else:
        raise ValueError(f"unknown mode kind {kind!r}")
    return m + m.conj()


def parts_identities_check(G: SpherePolynomial) -> Tuple[PiMultiple, PiMultiple, PiMultiple, PiMultiple]:
    """Left-minus-right residuals of the four integration-by-parts identities.

    1. int (L Lbar + Lbar L) G / 2                          = 0
    2. 2 Im int Lbar G * L T G                              = int |T G|^2
    3. 2 Re int (L Lbar G)^2                                = 2 int |L Lbar G|^2 - int |T G|^2
    4. int G (L Lbar + Lbar L) G / 2                        = -int |L G|^2
    """
    _require_real(G)
    TG, LG, LbG = T(G), L(G), Lbar(G)
    LLbG = L(LbG)
    sq_T = integrate_sphere(TG.abs2())

    r1 = integrate_sphere(sym_laplacian(G))
    r2 = integrate_sphere(LbG * L(TG)).imag.scale(2) - sq_T
    r3 = integrate_sphere(LLbG * LLbG).real.scale(2) - (integrate_sphere(LLbG.abs2()).scale(2) - sq_T)
    r4 = integrate_sphere(G * sym_laplacian(G)) + integrate_sphere(LG.abs2())
    return r1, r2, r3, r4


def fefferman_first_variation(G: SpherePolynomial) -> float:
    """eps^1 coefficient of F(Z_eps):  -(2^{7/3}/3) int G."""
    return -(2 ** (7 / 3)) / 3 * float(integrate_sphere(G).real)


def fefferman_second_variation(G: SpherePolynomial) -> float:
    """eps^2 coefficient of F(Z_eps) (G real, any mean)."""
    _require_real(G)
    integrand = (
        T(G).abs2().scale(5)
        - L(Lbar(G)).abs2().scale(2)
        + L(G).abs2().scale(8)
        + (G * G).scale(16)
    )
    return float(integrate_sphere(integrand).real) / (9 * 2 ** (2 / 3))


def volume_first_variation(G: SpherePolynomial) -> PiMultiple:
    return integrate_sphere(G).scale(Fraction(-1, 2)).real


def volume_second_variation(G: SpherePolynomial) -> PiMultiple:
    return integrate_sphere(G * G).scale(Fraction(1, 2)).real


# ---------------------------------------------------------------------------
# holomorphic helpers: the X g = h solve and the Jerison-Lee check


def _require_holomorphic(p: SpherePolynomial, what: str):
    if not p.is_holomorphic():
        raise PreconditionError(f"{what} must be holomorphic (no zb, wb factors)")


def solve_X(h: SpherePolynomial) -> SpherePolynomial:
    """Solve (z d_z + w d_w + 2) g = h for holomorphic polynomial h."""
    _require_holomorphic(h, "h")
    return SpherePolynomial({e: v / QI(e[0] + e[1] + 2) for e, v in h.terms.items()})


def apply_X(g: SpherePolynomial) -> SpherePolynomial:
    return SpherePolynomial({e: v * (e[0] + e[1] + 2) for e, v in g.terms.items()})


@dataclass(frozen=True)
class JLReport:
    lhs: float
    rhs: PiMultiple
    lhs_radicand: PiMultiple  # int |g|^4, exact
    holds: bool
    equality: bool

    @property
    def rhs_value(self) -> float:
        return float(self.rhs)


def jl_check(g: SpherePolynomial) -> JLReport:
    """Holomorphic Jerison-Lee inequality on the sphere.

    lhs = sqrt(2) pi ||g||_{L^4}^2, rhs = int (|g|^2 + |L g|^2).  The
    comparison is made exactly by squaring: 2 pi^2 int|g|^4 <= rhs^2.
    """
    _require_holomorphic(g, "g")
    g2 = g.abs2()
    quartic = integrate_sphere(g2 * g2).real
    rhs = integrate_sphere(g2 + L(g).abs2()).real
    lhs_sq = quartic.coeff.re * 2  # times pi^4
    rhs_sq = rhs.coeff.re ** 2  # times pi^4
    lhs = math.sqrt(2) * math.pi * math.sqrt(float(quartic))
    return JLReport(lhs=lhs, rhs=rhs, lhs_radicand=quartic,
                    holds=lhs_sq <= rhs_sq, equality=lhs_sq == rhs_sq)


# ---------------------------------------------------------------------------
# literal syntax:  "2*z^2*wb - 3/2*i*zb + 0.5"

_VARS = {"z": 0, "w": 1, "zb": 2, "wb": 3}


def _parse_number(tok: str):
    if re.fullmatch(r"\d+", tok):
        return QI(int(tok))
    if re.fullmatch(r"\d+/\d+", tok):
        n, d = tok.split("/")
        return QI(Fraction(int(n), int(d)))
    if re.fullmatch(r"\d*\.\d+(e-?\d+)?|\d+e-?\d+", tok):
        return QI(Fraction(tok))
    return None


def parse_polynomial(text: str) -> SpherePolynomial:
    """Parse sums of products like ``2*z^2*wb^1``; ``zb``/``wb`` are conjugates, ``i`` is imaginary."""
    src = text.replace(" ", "").replace("**", "^")
    if not src:
        raise ValueError("empty polynomial literal")
    # split on top-level +/- that are not part of an exponent
    pieces = re.findall(r"[+-]*[^+-]+", src)
    if "".join(pieces) != src:
        raise ValueError(f"cannot parse polynomial {text!r}")
    out = SpherePolynomial()
    for piece in pieces:
        body = piece.lstrip("+-")
        sign = -1 if (len(piece) - len(body) and piece[: len(piece) - len(body)].count("-") % 2) else 1
        coef = QI(sign)
        exp = [0, 0, 0, 0]
        for factor in body.split("*"):
            if not factor:
                raise ValueError(f"empty factor in {text!r}")
            base, _, power = factor.partition("^")
            n = int(power) if power else 1
            if base in _VARS:
                exp[_VARS[base]] += n
                continue
            if base == "i":
                coef = coef * _ipow(n)
                continue
            num = _parse_number(base)
            if num is None:
                raise ValueError(f"unknown factor {factor!r} in {text!r}")
            for _ in range(n):
                coef = coef * num
        out = out + SpherePolynomial({tuple(exp): coef})
    return out


def _ipow(n: int) -> QI:
    return [QI(1), QI(0, 1), QI(-1), QI(0, -1)][n % 4]


def format_polynomial(p: SpherePolynomial) -> str:
    """Inverse of :func:`parse_polynomial`; complex coefficients become two terms."""
    if p.is_zero():
        return "0"
    out = []
    for (a, b, c, d), v in sorted(p.terms.items()):
        mono = [name if n == 1 else f"{name}^{n}"
                for name, n in zip(("z", "w", "zb", "wb"), (a, b, c, d)) if n]
        v = complex(v) if not isinstance(v, QI) else v
        for part, unit in ((v.real, []), (v.imag, ["i"])):
            if not part:
                continue
            sign = "-" if part < 0 else "+"
            mag = repr(abs(part)) if isinstance(part, float) else str(abs(part))
            out.append(f"{sign} " + "*".join([mag] + unit + mono))
    text = " ".join(out)
    return text[2:] if text.startswith("+ ") else "-" + text[2:]


def random_holomorphic(rng: np.random.Generator, degree: int = 4, scale: int = 5,
                       density: float = 0.7) -> SpherePolynomial:
    """Seeded random holomorphic polynomial with small Gaussian-integer coefficients."""
    terms = {}
    for n in range(degree + 1):
        for a in range(n + 1):
            if rng.random() < density:
                re_, im_ = rng.integers(-scale, scale + 1, size=2)
                terms[(a, n - a, 0, 0)] = QI(int(re_), int(im_))
    if not terms:
        terms[(0, 0, 0, 0)] = QI(1)
    return SpherePolynomial(terms)


def real_part_poly(p: SpherePolynomial) -> SpherePolynomial:
    """(p + conj p) / 2."""
    return (p + p.conj()).scale(Fraction(1, 2))


def exponents(p: SpherePolynomial) -> Iterable[Exponent]:
    return p.terms.keys()
