"""Sampling-based classification of maps: f-harmonicity, horizontal weak
conformality, the f-harmonic-morphism property and related identities.

"For every point" is approximated by a seeded sample of in-domain points;
a passing verdict is numerical evidence, not a proof.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .catalog import catalog
from .conformal import _dilation, _fiber, _report
from .errors import DomainError, FmorphError, NotHWC, PreconditionFailed, SamplerExhausted
from .exprlang import as_expr, is_polynomial
from .geometry import DOMAIN_MARGIN, _f_laplacian, _laplacian, in_domain, scalar_jet
from .mapcalc import MapJet, MapSpec, _T, _map_jet, _push_grad, _tension, compose


@dataclass
class SamplerConfig:
    count: int = 200
    seed: int = 0
    tol_resid: float = 1e-8
    tol_hwc: float = 1e-8
    margin: float = DOMAIN_MARGIN
    max_rounds: int = 50


def sample_points(mp: MapSpec, count: int, seed: int, margin: float = DOMAIN_MARGIN,
                  max_rounds: int = 50) -> np.ndarray:
    """Uniform rejection sampling in the source box, keeping points whose image is in the target chart."""
    rng = np.random.default_rng(seed)
    box = np.asarray(mp.source.box(), dtype=float)
    kept = []
    total = 0
    for _ in range(max_rounds):
        cand = rng.uniform(box[:, 0], box[:, 1], size=(max(4 * count, 64), mp.m))
        cand = cand[in_domain(mp.source, cand, margin)]
        if len(cand):
            try:
                ok = in_domain(mp.target, mp.image(cand), margin)
            except DomainError:
                ok = np.array([_image_ok(mp, c, margin) for c in cand], dtype=bool)
            cand = cand[ok]
        kept.append(cand)
        total += len(cand)
        if total >= count:
            return np.concatenate(kept)[:count]
    raise SamplerExhausted(f"found only {total} of {count} in-domain points for {mp.name!r}")


def _image_ok(mp, p, margin):
    try:
        img = mp.image(p[None, :])
    except DomainError:
        return False
    return bool(np.all(np.isfinite(img)) and in_domain(mp.target, img, margin)[0])


def _hnorm(v, h):
    return np.sqrt(np.abs(np.einsum("za,zab,zb->z", v, h, v)))


def tension_scale(mj: MapJet):
    """Sum of the h-norms of the three pieces of the tension field (roundoff scale)."""
    h = mj.target.g
    a = np.einsum("zij,zaij->za", mj.source.g_inv, mj.H)
    b = np.einsum("zij,zkij,zak->za", mj.source.g_inv, mj.source.christoffel, mj.J)
    c = np.einsum("zsab,zab->zs", mj.target.christoffel, _T(mj))
    return _hnorm(a, h) + _hnorm(b, h) + _hnorm(c, h)


def f_tension_residual(mp: MapSpec, mj: MapJet, weight=None):
    """|tau_f|_h relative to the size of the terms that cancel in it."""
    w = weight if weight is not None else (mp.weight if mp.weight is not None else 1)
    fj = scalar_jet(mp.source, w, mj.point)
    tau = _tension(mj)
    push = _push_grad(mj, fj.grad)
    tau_f = fj.value[:, None] * tau + push
    h = mj.target.g
    scale = 1.0 + fj.value * tension_scale(mj) + _hnorm(push, h)
    return _hnorm(tau_f, h) / scale, tau_f, fj


@dataclass
class Verdict:
    map: str
    points: list
    aggregate: dict
    tolerances: dict
    seed: int
    count: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        if not self.points:
            return ""
        m = len(self.points[0]["point"])
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(m)] + ["f_tension_residual", "hwc_residual", "lambda_sq"])
        for p in self.points:
            w.writerow([repr(float(c)) for c in p["point"]]
                       + [repr(p["f_tension_residual"]), repr(p["hwc_residual"]), repr(p["lambda_sq"])])
        return buf.getvalue()


def classify(mp: MapSpec, config: SamplerConfig = None) -> Verdict:
    cfg = config or SamplerConfig()
    pts = sample_points(mp, cfg.count, cfg.seed, cfg.margin, cfg.max_rounds)
    mj = _map_jet(mp, pts)
    resid_f, _, _ = f_tension_residual(mp, mj)
    rep = _report(mj, cfg.tol_hwc)

    is_f_harmonic = bool(np.all(resid_f <= cfg.tol_resid))
    is_hwc = bool(np.all(rep.is_hwc))
    degenerate = bool(np.all(rep.is_critical))

    homothetic = None
    fibers_minimal = None
    regular = ~rep.is_critical
    if is_hwc and not degenerate:
        sub = _subset(mj, regular)
        lam = _dilation(mp, sub)
        horiz = [rep.horizontal_basis[z] for z in np.flatnonzero(regular)]
        norms = np.array([np.linalg.norm(lam.grad[i] @ horiz[i]) for i in range(len(horiz))])
        homothetic = bool(np.all(norms <= cfg.tol_resid * (1.0 + np.abs(lam.value))))
        if mp.m > mp.n and np.all(rep.is_submersive[regular]):
            sub_rep = _report(sub, cfg.tol_hwc)
            fg, _ = _fiber(mp, sub, sub_rep, lam)
            scale = 1.0 + tension_scale(sub)
            fibers_minimal = bool(np.all(fg.minimal_fiber_residual / scale <= cfg.tol_resid))

    lam_sq = rep.lambda_sq
    aggregate = {
        "max_f_tension_residual": float(resid_f.max()),
        "max_hwc_residual": float(rep.hwc_residual.max()),
        "is_f_harmonic": is_f_harmonic,
        "is_hwc": is_hwc,
        "is_f_harmonic_morphism": is_f_harmonic and is_hwc,
        "is_horizontally_homothetic": homothetic,
        "fibers_minimal": fibers_minimal,
        "lambda_stats": {"min": float(lam_sq.min()), "max": float(lam_sq.max()),
                         "mean": float(lam_sq.mean())},
        "degenerate": degenerate,
    }
    points = [
        {
            "point": [float(c) for c in pts[z]],
            "f_tension_residual": float(resid_f[z]),
            "hwc_residual": float(rep.hwc_residual[z]),
            "lambda_sq": float(lam_sq[z]),
            "rank": int(rep.rank[z]),
            "is_critical": bool(rep.is_critical[z]),
        }
        for z in range(len(pts))
    ]
    return Verdict(mp.name, points, aggregate,
                   {"tol_resid": cfg.tol_resid, "tol_hwc": cfg.tol_hwc, "margin": cfg.margin},
                   cfg.seed, cfg.count)


def _subset(mj: MapJet, mask) -> MapJet:
    from .geometry import MetricAtPoint

    def cut(mp):
        return MetricAtPoint(*(None if x is None else x[mask] for x in
                               (mp.point, mp.g, mp.g_inv, mp.dg, mp.christoffel, mp.d2g)))
    return MapJet(mj.point[mask], mj.image[mask], mj.J[mask], mj.H[mask], cut(mj.source), cut(mj.target))


def verdict_matches(verdict: Verdict, expected: dict) -> bool:
    return all(verdict.aggregate.get(k) == v for k, v in expected.items())


# ---------------------------------------------------------------------------
# pullback identity: Delta_f(u o phi) = f lambda^2 (Delta^N u) o phi + du(tau_f(phi))

def random_test_function(coords, rng):
    """Quadratic polynomial plus one trigonometric term, coefficients in [-1, 1]."""
    n = len(coords)
    ys = [as_expr(c) for c in coords]
    u = as_expr(float(rng.uniform(-1, 1)))
    for a in range(n):
        u = u + float(rng.uniform(-1, 1)) * ys[a]
    for a in range(n):
        for b in range(a, n):
            u = u + float(rng.uniform(-1, 1)) * ys[a] * ys[b]
    arg = as_expr(float(rng.uniform(-1, 1)))
    for a in range(n):
        arg = arg + float(rng.uniform(-1, 1)) * ys[a]
    trig = "sin" if rng.uniform() < 0.5 else "cos"
    from .exprlang import call
    return u + float(rng.uniform(-1, 1)) * call(trig, arg)


def morphism_pullback_test(mp: MapSpec, test_fns=20, config: SamplerConfig = None, pts=None) -> dict:
    """Check the pullback identity for ``test_fns`` random functions (or a list of expressions)."""
    from .exprlang import substitute
    cfg = config or SamplerConfig()
    if mp.weight is None:
        raise PreconditionFailed(f"map {mp.name!r} has no weight")
    if pts is None:
        pts = sample_points(mp, cfg.count, cfg.seed, cfg.margin, cfg.max_rounds)
    mj = _map_jet(mp, pts)
    rep = _report(mj, cfg.tol_hwc)
    if not np.all(rep.is_hwc):
        raise NotHWC(f"map {mp.name!r} is not horizontally weakly conformal "
                     f"(residual up to {rep.hwc_residual.max():.3e})")
    _, tau_f, fj = f_tension_residual(mp, mj)
    if isinstance(test_fns, int):
        rng = np.random.default_rng(cfg.seed + 1)
        fns = [random_test_function(mp.target.coords, rng) for _ in range(test_fns)]
    else:
        fns = [as_expr(u) for u in test_fns]
    sub = dict(zip(mp.target.coords, mp.components))
    per_fn = []
    worst = worst_tau = 0.0
    for u in fns:
        lhs = _f_laplacian(mj.source, fj, scalar_jet(mp.source, substitute(u, sub), pts))
        uj = scalar_jet(mp.target, u, mj.image)
        tau_term = np.einsum("za,za->z", uj.grad, tau_f)
        rhs = fj.value * rep.lambda_sq * _laplacian(mj.target, uj) + tau_term
        r = np.abs(lhs - rhs) / (1.0 + np.abs(lhs))
        t = np.abs(tau_term) / (1.0 + np.abs(lhs))
        per_fn.append({"max_identity_residual": float(r.max()), "max_tau_term": float(t.max())})
        worst = max(worst, float(r.max()))
        worst_tau = max(worst_tau, float(t.max()))
    return {"max_identity_residual": worst, "max_tau_term": worst_tau, "per_fn": per_fn}


# ---------------------------------------------------------------------------

def two_weight_test(mp: MapSpec, f1, f2, config: SamplerConfig = None) -> dict:
    """max |dphi(grad ln(f1/f2))|_h over sampled points; both weights must make phi f-harmonic."""
    cfg = config or SamplerConfig()
    pts = sample_points(mp, cfg.count, cfg.seed, cfg.margin, cfg.max_rounds)
    mj = _map_jet(mp, pts)
    jets = []
    for w in (f1, f2):
        resid, _, fj = f_tension_residual(mp, mj, as_expr(w))
        if not np.all(resid <= cfg.tol_resid):
            raise PreconditionFailed(f"{mp.name!r} is not f-harmonic for weight {w} "
                                     f"(residual {resid.max():.3e})")
        jets.append(fj)
    a, b = jets
    dlog = a.grad / a.value[:, None] - b.grad / b.value[:, None]
    v = _push_grad(mj, dlog)
    worst = float(_hnorm(v, mj.target.g).max())
    return {"max_norm": worst, "passed": worst <= cfg.tol_resid}


def polynomial_hwc_check(mp: MapSpec, config: SamplerConfig = None) -> dict:
    """Numerical witness that a horizontally weakly conformal polynomial map is harmonic."""
    cfg = config or SamplerConfig()
    poly = all(is_polynomial(c) for c in mp.components) and _is_flat(mp)
    pts = sample_points(mp, cfg.count, cfg.seed, cfg.margin, cfg.max_rounds)
    mj = _map_jet(mp, pts)
    hwc = bool(np.all(_report(mj, cfg.tol_hwc).is_hwc))
    resid = _hnorm(_tension(mj), mj.target.g) / (1.0 + tension_scale(mj))
    harmonic = bool(np.all(resid <= cfg.tol_resid))
    return {"is_polynomial": poly, "is_hwc": hwc, "is_harmonic": harmonic,
            "holds": (not (poly and hwc)) or harmonic}


def _is_flat(mp: MapSpec) -> bool:
    def flat(ch):
        return all(x == as_expr(1.0 if i == j else 0.0)
                   for i, row in enumerate(ch.metric) for j, x in enumerate(row))
    return flat(mp.source) and flat(mp.target)


def run_catalog(config: SamplerConfig = None) -> list:
    """Classify every catalog entry; returns (entry, verdict, matched) triples."""
    out = []
    for entry in catalog():
        v = classify(entry.map, config)
        out.append((entry, v, verdict_matches(v, entry.expected)))
    return out
