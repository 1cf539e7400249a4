import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from fefflab.core_calculus import (
    DomainError,
    Jet2Ambient,
    Jet2Graph,
    MalformedJetError,
    ScalarField,
    ambient_symbols,
    bordered_hessian_M,
    graph_mu,
    graph_symbols,
    jet_of,
)

G = graph_symbols()
A = ambient_symbols()


def graph_field(expr, mode="analytic", **kw):
    f = ScalarField.from_sympy(expr, "graph", **kw)
    return f if mode == "analytic" else f.with_mode("fd")


def test_sphere_defining_function_at_boundary_point():
    rho = ScalarField.from_sympy(A["x"] ** 2 + A["y"] ** 2 + A["u"] ** 2 + A["v"] ** 2 - 1, "ambient")
    assert bordered_hessian_M(jet_of(rho, [1, 0, 0, 0])) == pytest.approx(1.0, abs=1e-14)


def test_heisenberg_ambient_value():
    rho = ScalarField.from_sympy(-A["v"] + A["x"] ** 2 + A["y"] ** 2, "ambient")
    pts = np.array([[0.3, -0.2, 0.5, 0.1], [0, 0, 0, 0]])
    np.testing.assert_allclose(bordered_hessian_M(jet_of(rho, pts)), 0.25, atol=1e-14)


def test_vanishing_gradient_gives_zero():
    rho = ScalarField.from_sympy(A["x"] ** 2 + A["y"] ** 2 + A["u"] ** 2 + A["v"] ** 2, "ambient")
    assert bordered_hessian_M(jet_of(rho, [0, 0, 0, 0])) == 0.0


def test_non_hermitian_jet_is_rejected():
    j = Jet2Ambient(0.0, 1.0, 0.5j, 1.0, 0.3, 0.3j, 1.0)  # rho_wzb should be conj(rho_zwb)
    with pytest.raises(MalformedJetError):
        bordered_hessian_M(j)


def test_mu_of_model_surfaces():
    pts = np.array([[0.2, 0.4, -0.3], [1.0, -0.5, 0.7]])
    heis = jet_of(graph_field(G["x"] ** 2 + G["y"] ** 2), pts)
    np.testing.assert_allclose(graph_mu(heis), 1.0, atol=1e-14)
    j = jet_of(graph_field(G["x"] ** 2 + G["y"] ** 2 + G["u"] ** 2), pts)
    r2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
    np.testing.assert_allclose(graph_mu(j), 1 + 4 * pts[:, 2] ** 2 + 2 * r2, rtol=1e-13)


def test_fd_mode_on_quadratic():
    f = ScalarField.finite_difference(lambda p: p[..., 0] ** 2 + p[..., 1] ** 2, "graph", h=1e-4)
    j = jet_of(f, [0.3, 0.1, 0.2])
    assert abs(j.F_zzb - 1) < 1e-8


def test_fd_and_analytic_agree_on_cubic():
    expr = sp.re(sp.expand(G["z"] ** 3))
    p = [1.0, 0.0, 0.0]
    ja, jf = jet_of(graph_field(expr), p), jet_of(graph_field(expr, "fd"), p)
    for name in ("F", "F_z", "F_u", "F_zzb", "F_zu", "F_uu"):
        assert abs(getattr(ja, name) - getattr(jf, name)) < 1e-7, name


def test_domain_violation_raises():
    f = ScalarField.from_sympy(sp.sqrt(1 - G["x"] ** 2), "graph", domain=lambda p: np.abs(p[..., 0]) < 1)
    with pytest.raises(DomainError):
        jet_of(f, [1.5, 0, 0])


def test_graph_to_ambient_consistency_symbolic():
    # mu(F) = 4 M(-v + F) for a generic height function, checked symbolically
    x, y, u, v = sp.symbols("x y u v", real=True)
    f = sp.Function("f")(x, y, u)
    rho = -v + f
    dz = lambda e: (sp.diff(e, x) - sp.I * sp.diff(e, y)) / 2
    dzb = lambda e: (sp.diff(e, x) + sp.I * sp.diff(e, y)) / 2
    dw = lambda e: (sp.diff(e, u) - sp.I * sp.diff(e, v)) / 2
    dwb = lambda e: (sp.diff(e, u) + sp.I * sp.diff(e, v)) / 2
    D, Db = (dz, dw), (dzb, dwb)
    mat = sp.Matrix(3, 3, lambda i, j: 0 if i == j == 0 else (
        D[j - 1](rho) if i == 0 else Db[i - 1](rho) if j == 0 else D[j - 1](Db[i - 1](rho))))
    M = -mat.det()
    Fz, Fzb, Fu = dz(f), dzb(f), sp.diff(f, u)
    mu = dz(dzb(f)) * (Fu**2 + 1) - dz(Fu) * (Fu + sp.I) * Fzb - dzb(Fu) * (Fu - sp.I) * Fz + sp.diff(f, u, 2) * Fz * Fzb
    assert sp.simplify(sp.expand(mu - 4 * M)) == 0


SURFACES = [
    G["x"] ** 2 + G["y"] ** 2 + G["u"] ** 2 / 3,
    (G["x"] ** 2 + G["y"] ** 2) ** 2 / 4 + G["x"] * G["u"] / 5 + G["x"] ** 2,
    sp.exp(G["x"] / 3) + G["y"] ** 2 + G["u"] * G["y"] / 4 + G["u"] ** 3 / 7,
]


@pytest.mark.parametrize("expr", SURFACES)
def test_mu_equals_four_M_on_random_points(expr, rng):
    f = graph_field(expr)
    pts = rng.uniform(-1, 1, size=(120, 3))
    jg = jet_of(f, pts)
    mu = graph_mu(jg)
    M = bordered_hessian_M(jg.to_ambient())
    np.testing.assert_allclose(mu, 4 * M, rtol=1e-8, atol=1e-12)
    # and through the real ambient jet of rho = -v + F
    rho = ScalarField.from_sympy(-A["v"] + expr.xreplace({G["x"]: A["x"], G["y"]: A["y"], G["u"]: A["u"]}), "ambient")
    pts4 = np.concatenate([pts, rng.uniform(-1, 1, size=(120, 1))], axis=1)
    np.testing.assert_allclose(mu, 4 * bordered_hessian_M(jet_of(rho, pts4)), rtol=1e-8, atol=1e-12)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 3))
def test_mu_is_real_and_scales_with_levi_factor(x, y, u, c):
    # F = c|z|^2 has mu = c for any c > 0
    j = Jet2Graph(c * (x * x + y * y), c * (x - 1j * y), 0.0, c, 0j, 0.0)
    assert graph_mu(j) == pytest.approx(c, rel=1e-12)
