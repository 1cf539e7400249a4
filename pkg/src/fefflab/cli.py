"""Command-line front end.

Every subcommand writes one JSON report (or CSV for 2-D sweeps) containing
the schema id, the full parameter set including defaults, the results and a
list of contract checks.  Exit codes: 0 all checks pass, 2 a mathematical
contract failed, 1 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Callable, Dict, List

import numpy as np

from . import SCHEMA_ID
from . import families as fa
from . import measures as ms
from . import sphere_algebra as sa
from . import variation as va
from .core_calculus import ScalarField, graph_symbols
from .measures import NotPseudoconvexError

EXIT_OK, EXIT_USAGE, EXIT_CONTRACT = 0, 1, 2
PI = math.pi


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# schema


def report_schema() -> dict:
    measure = {
        "type": "object",
        "required": ["surface", "grid", "fefferman", "volume", "quotient", "err_est"],
        "properties": {
            "surface": {"type": "string"},
            "grid": {"type": "array", "items": {"type": "integer"}},
            "fefferman": {"type": "number"},
            "volume": {"type": "number"},
            "quotient": {"type": "number"},
            "err_est": {"type": "number", "minimum": 0},
        },
    }
    check = {
        "type": "object",
        "required": ["name", "passed"],
        "properties": {"name": {"type": "string"}, "passed": {"type": "boolean"}},
    }
    return {
        "$schema": "http://json-schema.org/draft-07/schema#",
        "$id": SCHEMA_ID,
        "title": "fefflab report",
        "type": "object",
        "required": ["schema", "command", "params", "results", "checks", "status"],
        "properties": {
            "schema": {"const": SCHEMA_ID},
            "command": {"type": "string"},
            "params": {"type": "object"},
            "results": {
                "type": "object",
                "properties": {
                    "measure": {"$ref": "#/definitions/measure"},
                    "measures": {"type": "array", "items": {"$ref": "#/definitions/measure"}},
                },
            },
            "checks": {"type": "array", "items": {"$ref": "#/definitions/check"}},
            "status": {"enum": ["ok", "contract-violation"]},
        },
        "definitions": {"measure": measure, "check": check},
    }


# ---------------------------------------------------------------------------
# helpers


def _check(name: str, passed: bool, **info) -> dict:
    return {"name": name, "passed": bool(passed), **info}


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def _parse_complex_list(text: str) -> List[complex]:
    return [complex(t.replace(" ", "")) for t in text.split(",")]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    return x


# ---------------------------------------------------------------------------
# subcommands; each returns (results, checks) or a CSV string


def cmd_measure(a):
    if a.surface == "sphere":
        Z = ms.RadialSurface.sphere(a.radius)
    elif a.surface == "poly":
        Z = ms.RadialSurface.from_polynomial(sa.parse_polynomial(a.poly), a.eps)
    elif a.surface == "linear-image":
        c = _parse_complex_list(a.matrix)
        if len(c) != 4:
            raise UsageError("--matrix needs four comma-separated entries a,b,c,d")
        Z = ms.CircularSurface.linear_image([[c[0], c[1]], [c[2], c[3]]])
    else:
        raise UsageError(f"unknown surface {a.surface!r}")
    rep = ms.radial_measures(Z, a.n, refine=not a.no_refine)
    checks = [_check("err_est finite", math.isfinite(rep.err_est))]
    if a.surface == "sphere":
        R = a.radius
        checks += [
            _check("fefferman = 2^{4/3} pi^2 R^{8/3}", _rel(rep.fefferman, 2 ** (4 / 3) * PI**2 * R ** (8 / 3)) <= 1e-6),
            _check("volume = pi^2 R^4 / 2", _rel(rep.volume, PI**2 * R**4 / 2) <= 1e-10),
            _check("quotient = 8 pi", _rel(rep.quotient, 8 * PI) <= 1e-6),
        ]
    if a.surface == "linear-image":
        checks.append(_check("quotient = 8 pi", _rel(rep.quotient, 8 * PI) <= 1e-6))
    return {"measure": rep.to_json()}, checks


def _kappa_surface(a):
    if a.surface == "sphere":
        Z = ms.sphere_graph(a.radius)
        return Z, 3 * 2 ** (-1 / 3) * a.radius ** (-4 / 3), 1e-3, "rel"
    if a.surface == "hyperboloid":
        return ms.hyperboloid_graph(a.radius), -3 * 2 ** (-1 / 3) * a.radius ** (-4 / 3), 1e-3, "rel"
    if a.surface == "heisenberg":
        return ms.GraphSurface(ms.heisenberg_field(), ms.Box(((-1, 1),) * 3), "heisenberg"), 0.0, 1e-6, "abs"
    if a.surface == "sqrt":
        s = graph_symbols()
        import sympy as sp

        f = ScalarField.from_sympy(-sp.sqrt(s["z"] ** -2 + s["zb"] ** -2))
        box = ms.Box(((0.9, 1.1), (-0.1, 0.1), (-0.1, 0.1)))
        return ms.GraphSurface(f, box, "v=-sqrt(z^-2+zb^-2)"), 0.0, 1e-6, "abs"
    raise UsageError(f"unknown surface {a.surface!r}")


def _sample_base(base, k: int, rng) -> np.ndarray:
    c = np.asarray(base.center, float)
    if isinstance(base, ms.Box):
        half = np.array([(hi - lo) / 2 for lo, hi in base.bounds])
        return c + 0.5 * half * rng.uniform(-1, 1, size=(k, 3))
    v = rng.normal(size=(k, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return c + 0.5 * base.radius * v * rng.uniform(0, 1, size=(k, 1))


def cmd_kappa(a):
    Z, expected, tol, how = _kappa_surface(a)
    pts = _sample_base(Z.base, a.points, np.random.default_rng(a.seed))
    vals = np.array([va.kappa_graph(Z, p) for p in pts])
    err = np.abs(vals - expected) / (abs(expected) if how == "rel" else 1.0)
    res = {"surface": Z.name, "points": pts, "kappa": vals, "mean": float(vals.mean()),
           "std": float(vals.std()), "expected": expected}
    checks = [_check(f"kappa = {expected:.12g} ({how} tol {tol:g})", float(err.max()) <= tol, max_err=float(err.max()))]
    return res, checks


def cmd_sphere_secondvar(a):
    G0 = sa.mode_polynomial(a.mode, a.j, a.k) if a.poly is None else sa.parse_polynomial(a.poly)
    exact = sa.second_variation_Q(G0)
    res = {"G0": sa.format_polynomial(G0), "exact": {"coeff": str(exact.coeff), "pi_power": exact.power,
                                                    "value": float(exact)}}
    checks = []
    if a.poly is None:
        cf = sa.closed_form_coeff(a.mode, a.j, a.k)
        res["closed_form"] = float(cf)
        checks.append(_check("exact form equals closed form", exact == cf))
    if a.numeric:
        fam = va.sphere_family(G0, ms.make_sphere_grid(a.n, a.n, a.n))
        fit = va.eps_fit_oracle(fam, "Q", a.eps_set, a.degree)
        res["eps_fit"] = {"coefficients": fit.coefficients, "residual": fit.residual,
                          "condition": fit.condition, "flagged": fit.flagged}
        checks.append(_check("eps fit within 1%", _rel(fit[2], float(exact)) <= 1e-2 if float(exact) else
                             abs(fit[2]) <= 1e-6))
    return res, checks


def cmd_heisenberg(a):
    bump = va.BumpField.single(a.center, a.half, a.amplitude, a.tilt)
    L = a.box
    base = ms.Box(((-L, L),) * 3)
    fam = va.heisenberg_family(bump, base, n=a.n)
    fit = va.eps_fit_oracle(fam, "F", a.eps_set, a.degree)
    quoted = va.heis_second_variation(bump, fam.grid)
    exact = va.heis_second_variation_exact(bump, fam.grid)
    cube = va.cube_simp_check(bump, base, fam.grid)
    semi = va.heis_semiglobal_check(bump, base, fam.grid)
    res = {
        "eps_fit": {"coefficients": fit.coefficients, "residual": fit.residual, "condition": fit.condition,
                    "flagged": fit.flagged},
        "second_variation_quoted": quoted,
        "second_variation_exact": exact,
        "cube": {"lhs": cube.lhs, "rhs": cube.rhs, "rhs_exact": cube.rhs_exact},
        "semiglobal": {"fefferman": semi.fefferman, "flat": semi.flat_value, "max_Ft_zzb": semi.max_Ft_zzb},
    }
    checks = [
        _check("quoted second variation matches eps fit (1%)", _rel(quoted, fit[2]) <= 1e-2),
        _check("exact second variation matches eps fit (1%)", _rel(exact, fit[2]) <= 1e-2),
        _check("quoted cubic identity (1e-6)", cube.rel_diff <= 1e-6),
        _check("exact cubic identity (1e-6)", cube.rel_diff_exact <= 1e-6),
        _check("Ft_zzb <= 1/3 implies F <= flat value", (not semi.hypothesis_holds) or semi.conclusion_holds,
               hypothesis=semi.hypothesis_holds),
    ]
    return res, checks


def cmd_ball_caps(a):
    if a.sweep:
        sw = fa.sweep_q(np.linspace(a.r_min, 1, a.nR), np.linspace(0, PI - a.delta, a.ntheta))
        return sw.to_csv()
    if a.minimize:
        r = fa.minimize_q(a.n, a.delta, a.tol)
        res = {"R": r.R, "theta": r.theta, "q": r.q, "scan_min": r.scan_min, "trace": r.trace}
        return res, [_check("minimum at least 4 pi", r.q >= 4 * PI)]
    if a.edge:
        lv = fa.q_ball_pair_limit(a.edge, a.value)
        return {"edge": a.edge, "value": a.value, "q": lv.value, "err_est": lv.err_est}, []
    q = fa.q_value(a.R, a.theta)
    return {"R": a.R, "theta": a.theta, "q": q}, []


def cmd_shear(a):
    if a.asymptotics:
        s = fa.shear_asymptotics(a.eps_list)
        res = {"eps": s.eps, "F": s.F, "V": s.V, "Q": s.Q, "slope_F": s.slope_F, "slope_V": s.slope_V,
               "slope_Q": s.slope_Q, "slope_Q_from_FV": s.slope_Q_from_FV, "flagged": s.flagged}
        checks = [
            _check("slope F within 5% of 2^{4/3} pi^2", _rel(s.slope_F, 2 ** (4 / 3) * PI**2) <= 0.05),
            _check("slope V within 5% of 4 pi", _rel(s.slope_V, 4 * PI) <= 0.05),
            _check("slope Q within 10% of pi^2", _rel(s.slope_Q, PI**2) <= 0.10),
        ]
        return res, checks
    if a.phi == "one":
        S = fa.ShearSurface(lambda w: np.ones_like(w), "shear(phi=1)")
    elif a.phi == "w":
        S = fa.ShearSurface(lambda w: w, "shear(phi=w)", grid_kind="polar")
    else:
        S = fa.ShearSurface.power(a.eps)
    rep = fa.shear_measures(S)
    return {"measure": rep.to_json()}, [_check("err_est finite", math.isfinite(rep.err_est))]


def cmd_tube(a):
    if a.curve == "circle":
        c = fa.ConvexCurve.circle(a.a)
    elif a.curve == "ellipse":
        c = fa.ConvexCurve.ellipse(a.a, a.b)
    else:
        c = fa.random_convex_curve(np.random.default_rng(a.seed))
    r = fa.tube_measures(c, a.n)
    bound = 8 * PI**2
    checks = [_check("blaschke^3 / area <= 8 pi^2", r.ratio <= bound * (1 + 1e-6))]
    if a.curve in ("circle", "ellipse"):
        checks.append(_check("equality for ellipses", _rel(r.ratio, bound) <= 1e-8))
    return {"curve": c.name, "blaschke": r.blaschke, "volume": r.volume, "ratio": r.ratio}, checks


def _polys(a, holomorphic=True) -> list:
    if a.poly is not None:
        return [sa.parse_polynomial(a.poly)]
    rng = np.random.default_rng(a.seed)
    return [sa.random_holomorphic(rng, a.degree) for _ in range(a.random)]


def cmd_hl(a):
    rows, checks = [], []
    for h in _polys(a):
        r = fa.hl_check(h, a.n)
        rows.append({"h": sa.format_polynomial(h), "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio})
        checks.append(_check(f"L2 <= c L4/3 for {sa.format_polynomial(h)}", r.holds))
    return {"constant": fa.HL_CONSTANT, "cases": rows}, checks


def cmd_jl(a):
    rows, checks = [], []
    for g in _polys(a):
        r = sa.jl_check(g)
        rows.append({"g": sa.format_polynomial(g), "lhs": r.lhs, "rhs": float(r.rhs), "equality": r.equality})
        checks.append(_check(f"jerison-lee for {sa.format_polynomial(g)}", r.holds))
    return {"cases": rows}, checks


def cmd_qstar(a):
    fam = {"unitary": fa.MapFamily.unitary, "shear": fa.MapFamily.shear,
           "identity": fa.MapFamily.identity_only}[a.family]()
    n = a.n
    r = fa.q_star_search(fam, ms.make_sphere_grid(n, n, n), fa.make_ball_grid(n // 2, n // 2, n // 2, n // 2))
    res = {"family": fam.name, "best": r.best, "q": r.q, "upper_bound_only": True, "note": r.note,
           "collapsed": r.collapsed, "trace": r.trace}
    checks = [_check("4 pi <= q <= 8 pi", 4 * PI <= r.q <= 8 * PI * (1 + 1e-9)),
              _check("simplex did not collapse", not r.collapsed)]
    return res, checks


def cmd_validate_quadrature(a):
    cs = ms.fourier_checks(a.n, a.max_degree)
    rows = [{"domain": c.domain, "a": c.a, "b": c.b, "exact": c.exact, "quadrature": c.quadrature,
             "rel_err": c.rel_err} for c in cs]
    worst = max(c.rel_err for c in cs)
    return {"cases": rows, "max_rel_err": worst}, [_check(f"all within {a.tol:g}", worst <= a.tol)]


def cmd_schema(a):
    return None


# ---------------------------------------------------------------------------
# parser


def _floats(text: str):
    return tuple(float(t) for t in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fefflab", description=__doc__.splitlines()[0])
    p.add_argument("--out", default=None, help="output path (default stdout)")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("measure", help="F, V, Q of a radial surface")
    s.add_argument("--surface", choices=["sphere", "poly", "linear-image"], default="sphere")
    s.add_argument("--radius", type=float, default=1.0)
    s.add_argument("--poly", default="z^2+zb^2", help="G as a polynomial literal, e.g. 2*z^2*wb^1")
    s.add_argument("--eps", type=float, default=0.05, help="scale applied to --poly")
    s.add_argument("--matrix", default="1,0.3,0.2j,1.2", help="a,b,c,d of the linear map")
    s.add_argument("--n", type=int, default=32)
    s.add_argument("--no-refine", action="store_true")
    s.set_defaults(run=cmd_measure)

    s = sub.add_parser("kappa", help="curvature invariant at seeded base points")
    s.add_argument("--surface", choices=["sphere", "hyperboloid", "heisenberg", "sqrt"], default="sphere")
    s.add_argument("--radius", type=float, default=1.0)
    s.add_argument("--points", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(run=cmd_kappa)

    s = sub.add_parser("sphere-secondvar", help="second variation of Q at the sphere")
    s.add_argument("--mode", choices=["A", "B"], default="A")
    s.add_argument("--j", type=int, default=2)
    s.add_argument("--k", type=int, default=0)
    s.add_argument("--poly", default=None, help="explicit real G0 instead of a mode")
    s.add_argument("--numeric", action="store_true", help="also fit eps -> Q")
    s.add_argument("--n", type=int, default=32)
    s.add_argument("--eps-set", type=_floats, default=va.DEFAULT_EPS)
    s.add_argument("--degree", type=int, default=4)
    s.set_defaults(run=cmd_sphere_secondvar)

    s = sub.add_parser("heisenberg", help="bump perturbations of the Heisenberg patch")
    s.add_argument("--center", type=_floats, default=(0.0, 0.0, 0.0))
    s.add_argument("--half", type=_floats, default=(0.8, 0.8, 0.8))
    s.add_argument("--amplitude", type=float, default=1.0)
    s.add_argument("--tilt", type=_floats, default=(0.0, 0.0, 0.0))
    s.add_argument("--box", type=float, default=1.0, help="base is [-box, box]^3")
    s.add_argument("--n", type=int, default=64)
    s.add_argument("--eps-set", type=_floats, default=va.DEFAULT_EPS)
    s.add_argument("--degree", type=int, default=4)
    s.set_defaults(run=cmd_heisenberg)

    s = sub.add_parser("ball-caps", help="intersections of two balls")
    s.add_argument("--R", type=float, default=0.5)
    s.add_argument("--theta", type=float, default=PI / 2)
    s.add_argument("--minimize", action="store_true")
    s.add_argument("--n", type=int, default=64)
    s.add_argument("--delta", type=float, default=0.05)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--edge", choices=["R0", "theta0", "corner"], default=None)
    s.add_argument("--value", type=float, default=1.9473)
    s.add_argument("--sweep", action="store_true", help="CSV sweep over the (R, theta) grid")
    s.add_argument("--nR", type=int, default=11)
    s.add_argument("--ntheta", type=int, default=11)
    s.add_argument("--r-min", type=float, default=0.0)
    s.set_defaults(run=cmd_ball_caps)

    s = sub.add_parser("shear", help="shear images (z, w) -> (phi(w) z, w)")
    s.add_argument("--phi", choices=["one", "w", "power"], default="power")
    s.add_argument("--eps", type=float, default=1e-3)
    s.add_argument("--asymptotics", action="store_true")
    s.add_argument("--eps-list", type=_floats, default=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6))
    s.set_defaults(run=cmd_shear)

    s = sub.add_parser("tube", help="tubes over convex curves")
    s.add_argument("--curve", choices=["circle", "ellipse", "random"], default="ellipse")
    s.add_argument("--a", type=float, default=2.0)
    s.add_argument("--b", type=float, default=1.0)
    s.add_argument("--n", type=int, default=512)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(run=cmd_tube)

    for name, fn, help_ in (("hl", cmd_hl, "L^2(ball) vs L^{4/3}(sphere) inequality"),
                            ("jl", cmd_jl, "holomorphic Jerison-Lee inequality, exact")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--poly", default=None)
        s.add_argument("--random", type=int, default=10)
        s.add_argument("--degree", type=int, default=4)
        s.add_argument("--seed", type=int, default=0)
        if name == "hl":
            s.add_argument("--n", type=int, default=48)
        s.set_defaults(run=fn)

    s = sub.add_parser("qstar", help="naive upper bound for the infimum of Q over images of the ball")
    s.add_argument("--family", choices=["unitary", "shear", "identity"], default="shear")
    s.add_argument("--n", type=int, default=24)
    s.set_defaults(run=cmd_qstar)

    s = sub.add_parser("validate-quadrature", help="monomial integrals over S^3 and the ball")
    s.add_argument("--n", type=int, default=32)
    s.add_argument("--max-degree", type=int, default=6)
    s.add_argument("--tol", type=float, default=1e-8)
    s.set_defaults(run=cmd_validate_quadrature)

    s = sub.add_parser("schema", help="print the report JSON schema")
    s.set_defaults(run=cmd_schema)
    return p


def _params(a) -> dict:
    return {k: v for k, v in sorted(vars(a).items()) if k not in ("run", "out")}


def dispatch(argv) -> tuple[int, str]:
    """Run one subcommand; returns (exit code, serialized output)."""
    try:
        a = build_parser().parse_args(argv)
    except UsageError as e:
        return EXIT_USAGE, f"usage error: {e}\n"
    except SystemExit as e:  # --help
        return int(e.code or 0), ""
    if a.command == "schema":
        return EXIT_OK, json.dumps(report_schema(), indent=2, sort_keys=True) + "\n"
    try:
        out = a.run(a)
    except UsageError as e:
        return EXIT_USAGE, f"usage error: {e}\n"
    except (NotPseudoconvexError, sa.PreconditionError, va.NotPseudoconvexError) as e:
        out = ({"error": str(e)}, [_check("preconditions", False)])
    except ValueError as e:
        return EXIT_USAGE, f"usage error: {e}\n"
    if isinstance(out, str):
        return EXIT_OK, out
    results, checks = out
    ok = all(c["passed"] for c in checks)
    report = {
        "schema": SCHEMA_ID,
        "command": a.command,
        "params": _params(a),
        "results": results,
        "checks": checks,
        "status": "ok" if ok else "contract-violation",
    }
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    return (EXIT_OK if ok else EXIT_CONTRACT), text


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    code, text = dispatch(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--out", default=None)
    out_path = pre.parse_known_args(argv)[0].out
    if code == EXIT_USAGE:
        sys.stderr.write(text)
    elif out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
