import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from fefflab import sphere_algebra as sa
from fefflab.core_calculus import ScalarField, fd_real_jet, graph_symbols
from fefflab.measures import Box, GraphSurface, hyperboloid_graph, sphere_graph
from fefflab.quadrature import make_sphere_grid
from fefflab.variation import (
    BumpField,
    L1_rigid,
    cube_simp_check,
    eps_fit_oracle,
    heis_second_variation_exact,
    heis_semiglobal_check,
    heisenberg_family,
    kappa_graph,
    sphere_family,
    worker_count,
)

BASE = Box(((-1, 1), (-1, 1), (-1, 1)))
TILTED = BumpField.single(center=(0.1, -0.05, 0.0), half=(0.7, 0.6, 0.5), amplitude=0.3, tilt=(0.4, -0.2, 0.3))


def sphere_kappa(R):
    return 3 * 2 ** (-1 / 3) * R ** (-4 / 3)


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_kappa_sphere(R):
    Z = sphere_graph(R)
    assert kappa_graph(Z, np.zeros(3)) == pytest.approx(sphere_kappa(R), rel=1e-5)


def test_kappa_constant_over_sphere_patch():
    Z = sphere_graph(1.0)
    pts = np.array([[0.1, 0.2, -0.1], [-0.3, 0.05, 0.2], [0.0, -0.25, 0.3]])
    vals = [kappa_graph(Z, p) for p in pts]
    assert np.std(vals) < 1e-5 * sphere_kappa(1.0)


def test_kappa_hyperboloid_and_flat():
    Z = hyperboloid_graph(1.0)
    assert kappa_graph(Z, Z.base.center) == pytest.approx(-sphere_kappa(1.0), rel=1e-5)
    s = graph_symbols()
    heis = GraphSurface(ScalarField.from_sympy(s["x"] ** 2 + s["y"] ** 2), BASE)
    assert abs(kappa_graph(heis, np.array([0.3, -0.2, 0.1]))) < 1e-6


def test_L1_rigid_quartic():
    s = graph_symbols()
    f = ScalarField.from_sympy((s["x"] ** 2 + s["y"] ** 2) ** 2)
    assert L1_rigid(f, (1.0, 0.0)) == pytest.approx(-(4 ** (-2 / 3)) * 4 / 9, rel=1e-6)


def test_bump_jet_matches_finite_differences():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-0.4, 0.4, size=(10, 3))
    v, g, H = TILTED.real_jet(pts)
    fv, fg, fH = fd_real_jet(lambda p: TILTED.real_jet(p)[0], pts)
    assert np.allclose(v, fv)
    assert np.allclose(g, fg, atol=1e-7)
    assert np.allclose(H, fH, atol=1e-4)


def test_bump_outside_base_rejected():
    with pytest.raises(ValueError):
        BumpField.single(half=(1.2, 0.5, 0.5)).check_inside(BASE)


def test_heisenberg_commutator_symbolic():
    x, y, u = sp.symbols("x y u", real=True)
    f = sp.Function("f")(x, y, u)
    z, zb = x + sp.I * y, x - sp.I * y
    dz = lambda e: (sp.diff(e, x) - sp.I * sp.diff(e, y)) / 2
    dzb = lambda e: (sp.diff(e, x) + sp.I * sp.diff(e, y)) / 2
    L = lambda e: dz(e) + sp.I * zb * sp.diff(e, u)
    Lb = lambda e: dzb(e) - sp.I * z * sp.diff(e, u)
    assert sp.simplify(sp.expand(L(Lb(f)) - Lb(L(f)) + 2 * sp.I * sp.diff(f, u))) == 0


def test_heisenberg_second_variation_matches_fit():
    fam = heisenberg_family(TILTED, BASE, n=64)
    fit = eps_fit_oracle(fam, "F")
    assert not fit.flagged
    assert abs(fit[1]) < 1e-3 * abs(fit[2])
    assert fit[2] == pytest.approx(heis_second_variation_exact(TILTED, n=64), rel=5e-3)


def test_heisenberg_cube_identity():
    rep = cube_simp_check(TILTED, BASE, n=64)
    assert rep.rel_diff_exact < 1e-6


def test_round_bump_exceeds_flat_measure():
    # small round bump: Ft_zzb stays below 1/3 yet the measure goes up
    bump = BumpField.single(half=(0.8, 0.8, 0.8), amplitude=0.02)
    coarse = heis_semiglobal_check(bump, BASE, n=48)
    fine = heis_semiglobal_check(bump, BASE, n=64)
    assert fine.hypothesis_holds and not fine.conclusion_holds
    excess = fine.fefferman - fine.flat_value
    assert excess > 1e-4
    assert abs(coarse.fefferman - fine.fefferman) < 1e-2 * excess


def test_sphere_first_and_second_variation():
    G = sa.parse_polynomial("z*zb + z^2 + zb^2")
    fam = sphere_family(G, make_sphere_grid(24, 24, 24))
    F, V = eps_fit_oracle(fam, "F"), eps_fit_oracle(fam, "V")
    assert F[1] == pytest.approx(sa.fefferman_first_variation(G), rel=1e-5)
    assert F[2] == pytest.approx(sa.fefferman_second_variation(G), rel=1e-3)
    assert V[1] == pytest.approx(float(sa.volume_first_variation(G)), rel=1e-5)
    assert F[1] / V[1] == pytest.approx(2 ** (10 / 3) / 3, rel=1e-5)


def test_quotient_stationary_at_sphere():
    G = sa.parse_polynomial("z*w*zb^2 + zb*wb*z^2 + w^2 + wb^2")
    fit = eps_fit_oracle(sphere_family(G, make_sphere_grid(24, 24, 24)), "Q")
    assert abs(fit[1]) < 1e-6
    assert fit[2] == pytest.approx(float(sa.second_variation_Q(G)), rel=1e-3)


def test_fit_input_validation():
    with pytest.raises(ValueError):
        eps_fit_oracle(lambda e: e, eps_set=(0.01, 0.02, 0.03))
    with pytest.raises(ValueError):
        eps_fit_oracle(lambda e: e, degree=5)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("FEFFLAB_THREADS", "1")
    assert worker_count(8) == 1
    monkeypatch.delenv("FEFFLAB_THREADS")
    assert 1 <= worker_count(3) <= 3


@given(st.floats(0.3, 3.0))
def test_kappa_scaling_property(R):
    assert kappa_graph(sphere_graph(R), np.zeros(3)) == pytest.approx(sphere_kappa(R), rel=1e-4)
