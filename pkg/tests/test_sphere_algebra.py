import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fefflab import sphere_algebra as sa
from fefflab.quadrature import make_sphere_grid
from fefflab.sphere_algebra import (
    ONE,
    QI,
    W,
    WB,
    Z,
    ZB,
    L,
    Lbar,
    PiMultiple,
    SpherePolynomial,
    T,
    closed_form_coeff,
    integrate_ball,
    integrate_sphere,
    parse_polynomial,
    second_variation_Q,
)

exps = st.tuples(*(st.integers(0, 2) for _ in range(4)))
coefs = st.builds(QI, st.integers(-4, 4), st.integers(-4, 4))
polys = st.dictionaries(exps, coefs, max_size=5).map(SpherePolynomial)
real_polys = polys.map(lambda p: p + p.conj())
holo = st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3), st.just(0), st.just(0)),
                       coefs, min_size=1, max_size=5).map(SpherePolynomial)


def test_monomial_integrals():
    for a in range(4):
        for b in range(4):
            m = SpherePolynomial.monomial(a, b, a, b)
            fa, fb = math.factorial(a), math.factorial(b)
            assert integrate_sphere(m) == PiMultiple(QI(Fraction(2 * fa * fb, math.factorial(a + b + 1))), 2)
            assert integrate_ball(m) == PiMultiple(QI(Fraction(fa * fb, math.factorial(a + b + 2))), 2)
    assert integrate_sphere(Z * WB) .is_zero()


def test_closed_forms_match_exact_second_variation():
    for j in range(9):
        for k in range(9):
            if 1 <= j + k <= 8:
                G = sa.mode_polynomial("A", j, k)
                assert second_variation_Q(G) == closed_form_coeff("A", j, k)
    for j in range(1, 5):
        for k in range(1, 5):
            assert second_variation_Q(sa.mode_polynomial("B", j, k)) == closed_form_coeff("B", j, k)


def test_example_values():
    assert float(closed_form_coeff("A", 2, 0)) == pytest.approx(64 * math.pi / 9)
    assert float(closed_form_coeff("B", 2, 2)) == pytest.approx(-64 * math.pi / 45)
    assert closed_form_coeff("A", 1, 0).is_zero()


def test_second_variation_needs_zero_mean():
    with pytest.raises(sa.PreconditionError):
        second_variation_Q(Z * ZB)


def test_parse_roundtrip():
    p = parse_polynomial("2*z^2*wb^1 - 3*i*w + 1/2")
    assert p == SpherePolynomial({(2, 0, 0, 1): QI(2), (0, 1, 0, 0): QI(0, -3), (0, 0, 0, 0): QI(Fraction(1, 2))})
    assert parse_polynomial(sa.format_polynomial(p)) == p


def test_numeric_evaluation_matches_quadrature():
    p = parse_polynomial("z*zb*w*wb + 3*z^2*wb^2")
    g = make_sphere_grid(16, 16, 16)
    assert np.sum(g.weights * p(g.z, g.w)).real == pytest.approx(float(integrate_sphere(p)), rel=1e-12)


def test_parts_identities_on_examples():
    for text in ("z^2+zb^2", "z^2*wb^2+zb^2*w^2", "z*w*zb + zb*wb*z + w*zb + z*wb", "i*z*wb - i*zb*w"):
        for r in sa.parts_identities_check(parse_polynomial(text)):
            assert r.is_zero()


def test_solve_X_and_jl():
    h = parse_polynomial("1 + 2*z + 3*w^2*z")
    g = sa.solve_X(h)
    assert sa.apply_X(g) == h
    r = sa.jl_check(ONE)
    assert r.equality and r.holds
    r = sa.jl_check(Z)
    assert r.lhs == pytest.approx(2 * math.pi**2 / math.sqrt(3))
    assert float(r.rhs) == pytest.approx(2 * math.pi**2)
    assert r.holds and not r.equality


@given(polys)
def test_commutators(p):
    assert L(Lbar(p)) - Lbar(L(p)) == T(p).scale(QI(0, -1))
    assert L(T(p)) - T(L(p)) == L(p).scale(QI(0, 2))
    assert Lbar(T(p)) - T(Lbar(p)) == Lbar(p).scale(QI(0, -2))


@given(polys)
def test_divergence_free_fields_integrate_to_zero(p):
    for X in (L, Lbar, T):
        assert integrate_sphere(X(p)).is_zero()


@given(polys)
def test_radial_factor_is_one_on_sphere(p):
    assert integrate_sphere((Z * ZB + W * WB) * p) == integrate_sphere(p)


@given(polys)
def test_conjugation(p):
    assert integrate_sphere(p.conj()) == integrate_sphere(p).conjugate()


@given(real_polys)
def test_parts_identities_property(G):
    for r in sa.parts_identities_check(G):
        assert r.is_zero()


@given(holo)
def test_jl_inequality_property(g):
    assert sa.jl_check(g).holds


@given(polys)
def test_parse_format_roundtrip_property(p):
    assert parse_polynomial(sa.format_polynomial(p)) == p


def test_format_float_coefficients():
    p = SpherePolynomial({(1, 0, 0, 0): 0.25, (0, 0, 1, 0): -1.5 + 0.5j})
    q = parse_polynomial(sa.format_polynomial(p))
    assert complex(q.terms[(0, 0, 1, 0)]) == -1.5 + 0.5j
