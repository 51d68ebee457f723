"""Cross-module identity suites run over the catalog.

Suites:
  c2    conformal change: tau(phi, f^(2/(m-2)) g) = f^(-m/(m-2)) tau_f(phi, g), m >= 3
  c13   F-tension with F(t) = (2t)^(p/2)/p, p-tension and f-tension with f = |dphi|^(p-2) agree
  eq12  pullback identity Delta_f(u o phi) = f lambda^2 (Delta u) o phi + du(tau_f(phi))
  eq13  composition law tau_f(psi o phi) = dpsi(tau_f(phi)) + f Tr nabla dpsi(dphi, dphi)

Each row carries the maximum normalized residual over the sampled points.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import catalog, rotation_of_s2, s2_chart
from .conformal import _report
from .errors import FmorphError
from .exprlang import as_expr, call, to_source
from .geometry import conformal_scale, euclidean, in_domain, scalar_jet
from .mapcalc import (
    F_tension, MapSpec, _f_tension, _map_jet, _tension, composition_f_tension, f_tension, p_tension,
    p_weight_expr,
)
from .verifier import SamplerConfig, morphism_pullback_test, sample_points

SUITES = ("c2", "c13", "eq12", "eq13")
TOL = 1e-8


@dataclass
class IdentityRow:
    suite: str
    case: str
    residual: float
    status: str          # PASS, FAIL or SKIP
    note: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _row(suite, case, resid, tol=TOL, note=""):
    return IdentityRow(suite, case, float(resid), "PASS" if resid <= tol else "FAIL", note)


def _hnorm(v, h):
    return np.sqrt(np.abs(np.einsum("za,zab,zb->z", v, h, v)))


def planar_fixture() -> MapSpec:
    """A 2-dimensional source (rotation of S^2 with a weight) so m = 2 cases are exercised."""
    rot = rotation_of_s2()
    return rot.with_weight("1 + s1^2", "rotation_s2_weighted")


def suite_maps():
    return [e.map for e in catalog()] + [planar_fixture()]


def perturbed(mp: MapSpec) -> MapSpec:
    """Same map with its weight multiplied by exp(0.3 sin(x_1)), so tau_f is no longer zero."""
    x1 = as_expr(mp.source.coords[0])
    return mp.with_weight(mp.weight * call("exp", 0.3 * call("sin", x1)), mp.name + "+perturbed")


# ---------------------------------------------------------------------------

def conformal_change_residual(mp: MapSpec, pts) -> float:
    m = mp.m
    f = mp.weight
    scaled = mp.with_source(conformal_scale(mp.source, f ** as_expr(2.0 / (m - 2))))
    mj = _map_jet(mp, pts)
    fj = scalar_jet(mp.source, f, pts)
    ref = fj.value[:, None] ** (-m / (m - 2)) * _f_tension(mj, fj)
    direct = _tension(_map_jet(scaled, pts))
    h = mj.target.g
    return float((_hnorm(direct - ref, h) / (1.0 + _hnorm(ref, h))).max())


def suite_c2(cfg: SamplerConfig):
    rows = []
    for mp in suite_maps():
        if mp.weight is None:
            continue
        if mp.m < 3:
            rows.append(IdentityRow("c2", mp.name, float("nan"), "SKIP", "m = 2: exponent 2/(m-2) undefined"))
            continue
        pts = sample_points(mp, cfg.count, cfg.seed, cfg.margin)
        rows.append(_row("c2", mp.name, conformal_change_residual(mp, pts)))
        pm = perturbed(mp)
        rows.append(_row("c2", pm.name, conformal_change_residual(pm, pts)))
    return rows


def _F_derivs(p):
    def Fp(t):
        return (2 * t) ** (p / 2 - 1)

    def Fpp(t):
        return (p - 2) * (2 * t) ** ((p - 4) / 2)
    return Fp, Fpp


def p_tension_agreement_residual(mp: MapSpec, pts, p) -> float:
    mj = _map_jet(mp, pts)
    h = mj.target.g
    a = F_tension(mp, pts, *_F_derivs(p))
    b = p_tension(mp, pts, p)
    c = f_tension(mp.with_weight(p_weight_expr(mp, p)), pts)
    diff = np.maximum(_hnorm(a - b, h), _hnorm(a - c, h))
    return float((diff / (1.0 + _hnorm(a, h))).max())


def suite_c13(cfg: SamplerConfig, tol=1e-10):
    rows = []
    for mp in suite_maps():
        pts = sample_points(mp, cfg.count, cfg.seed, cfg.margin)
        mj = _map_jet(mp, pts)
        rep = _report(mj, cfg.tol_hwc)
        pts = pts[~rep.is_critical]
        for p in (2, 3, 4):
            rows.append(_row("c13", f"{mp.name} p={p}", p_tension_agreement_residual(mp, pts, p), tol))
    return rows


def suite_eq12(cfg: SamplerConfig, test_fns=20):
    rows = []
    for entry in catalog():
        mp = entry.map
        pts = sample_points(mp, cfg.count, cfg.seed, cfg.margin)
        if not np.all(_report(_map_jet(mp, pts), cfg.tol_hwc).is_hwc):
            rows.append(IdentityRow("eq12", mp.name, float("nan"), "SKIP", "not horizontally weakly conformal"))
            continue
        for m in (mp, perturbed(mp)):
            out = morphism_pullback_test(m, test_fns, cfg, pts=pts)
            rows.append(_row("eq12", m.name, out["max_identity_residual"]))
    return rows


def second_map(mp: MapSpec) -> MapSpec:
    """A smooth non-trivial map out of the target chart of ``mp`` for composition tests."""
    tgt = mp.target
    if tgt.coords == s2_chart().coords and tgt.metric == s2_chart().metric:
        return rotation_of_s2()
    ys = [as_expr(c) for c in tgt.coords]
    n = len(ys)
    comps = []
    for a in range(n):
        nxt = ys[(a + 1) % n]
        comps.append(ys[a] + 0.1 * nxt * nxt if a < n - 1 else ys[a] + 0.1 * ys[0] * ys[0])
    return MapSpec(tgt, tgt, comps, None, "psi_" + tgt.name)


def suite_eq13(cfg: SamplerConfig, tol=TOL):
    rows = []
    for mp in suite_maps():
        if mp.weight is None:
            continue
        psi = second_map(mp)
        pts = sample_points(mp, cfg.count, cfg.seed, cfg.margin)
        img = mp.image(pts)
        with np.errstate(all="ignore"):
            ok = in_domain(psi.target, psi.image(img), cfg.margin)
        pts = pts[ok]
        res = composition_f_tension(mp, psi, pts)
        scale = 1.0 + np.linalg.norm(res.direct, axis=-1)
        rows.append(_row("eq13", f"{psi.name} o {mp.name}", float((res.residual / scale).max()), tol))
    return rows


def run(suite: str = "all", seed: int = 0, count: int = 200):
    cfg = SamplerConfig(count=count, seed=seed)
    names = SUITES if suite == "all" else (suite,)
    if any(n not in SUITES for n in names):
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)} or all")
    runners = {"c2": suite_c2, "c13": suite_c13, "eq12": suite_eq12, "eq13": suite_eq13}
    rows = []
    for n in names:
        rows.extend(runners[n](cfg))
    return rows


def format_table(rows) -> str:
    width = max([len(r.case) for r in rows] + [4])
    lines = [f"{'suite':<6} {'case':<{width}} {'max residual':>14}  status"]
    for r in rows:
        val = "-" if r.status == "SKIP" else f"{r.residual:.3e}"
        lines.append(f"{r.suite:<6} {r.case:<{width}} {val:>14}  {r.status}"
                     + (f"  ({r.note})" if r.note else ""))
    return "\n".join(lines)
