"""Riemannian charts and metric-level operators.

All point arguments accept either a single point of shape ``(m,)`` or a
batch ``(N, m)``; results follow the same convention.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import NotPositiveDefinite, OutOfDomain, SchemaError, WeightNotPositive
from .exprlang import Expr, as_expr, free_vars, to_source
from .jet import Jet2, eval_jet, eval_real, jet_stack, real_env, seed

DOMAIN_MARGIN = 1e-3


@dataclass(eq=True)
class RiemannianChart:
    name: str
    coords: tuple
    metric: tuple
    domain: Optional[Expr] = None
    description: str = ""
    sample_box: Optional[tuple] = None

    def __post_init__(self):
        self.coords = tuple(self.coords)
        self.metric = tuple(tuple(as_expr(x) for x in row) for row in self.metric)
        if self.domain is not None:
            self.domain = as_expr(self.domain)
        m = len(self.coords)
        if len(set(self.coords)) != m:
            raise SchemaError(f"chart {self.name!r}: duplicate coordinate names")
        if len(self.metric) != m or any(len(row) != m for row in self.metric):
            raise SchemaError(f"chart {self.name!r}: metric must be {m}x{m}")
        allowed = set(self.coords)
        for row in self.metric:
            for x in row:
                extra = free_vars(x) - allowed
                if extra:
                    raise SchemaError(f"chart {self.name!r}: metric uses unknown variable(s) {sorted(extra)}")
        if self.domain is not None and free_vars(self.domain) - allowed:
            raise SchemaError(f"chart {self.name!r}: domain uses unknown variables")
        if self.sample_box is not None:
            self.sample_box = tuple((float(lo), float(hi)) for lo, hi in self.sample_box)
            if len(self.sample_box) != m:
                raise SchemaError(f"chart {self.name!r}: sample_box needs {m} intervals")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def box(self):
        return self.sample_box if self.sample_box is not None else ((-2.0, 2.0),) * self.dim

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "coords": list(self.coords),
            "metric": [[to_source(x) for x in row] for row in self.metric],
        }
        if self.domain is not None:
            d["domain"] = to_source(self.domain)
        if self.description:
            d["description"] = self.description
        if self.sample_box is not None:
            d["sample_box"] = [list(b) for b in self.sample_box]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RiemannianChart":
        try:
            return cls(
                name=d["name"],
                coords=d["coords"],
                metric=d["metric"],
                domain=d.get("domain"),
                description=d.get("description", ""),
                sample_box=d.get("sample_box"),
            )
        except KeyError as exc:
            raise SchemaError(f"chart block missing field {exc.args[0]!r}") from None


@dataclass
class MetricAtPoint:
    point: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    dg: np.ndarray          # dg[..., k, i, j] = d_k g_ij
    christoffel: np.ndarray  # christoffel[..., k, i, j] = Gamma^k_ij
    d2g: np.ndarray = field(repr=False, default=None)  # d2g[..., k, l, i, j]

    def squeeze(self) -> "MetricAtPoint":
        return MetricAtPoint(*(None if x is None else x[0] for x in
                               (self.point, self.g, self.g_inv, self.dg, self.christoffel, self.d2g)))


def as_batch(p, m):
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != m:
        raise ValueError(f"expected {m} coordinates, got shape {np.shape(p)}")
    return pts, single


def unbatch(x, single):
    return x[0] if single else x


def in_domain(chart: RiemannianChart, pts, margin: float = 0.0) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if chart.domain is None:
        return np.ones(len(pts), dtype=bool)
    val = np.broadcast_to(eval_real(chart.domain, real_env(chart.coords, pts)), (len(pts),))
    return val > margin


def check_domain(chart: RiemannianChart, pts, side="source"):
    ok = in_domain(chart, pts)
    if not np.all(ok):
        bad = np.atleast_2d(pts)[~ok][0]
        raise OutOfDomain(f"point {bad.tolist()} lies outside chart {chart.name!r}", side)


def metric_jet(chart: RiemannianChart, pts) -> Jet2:
    """Jet of the metric matrix at a batch of points (value shape ``(N, m, m)``)."""
    env = seed(chart.coords, pts)
    m = chart.dim
    n = len(pts)
    cache = {}
    entries = []
    for i in range(m):
        for j in range(m):
            a, b = min(i, j), max(i, j)
            if (a, b) not in cache:
                up, lo = chart.metric[a][b], chart.metric[b][a]
                jet = eval_jet(up, env)
                if up != lo:
                    jet = (jet + eval_jet(lo, env)) * 0.5
                jet = Jet2(np.broadcast_to(jet.value, (n,)), np.broadcast_to(jet.grad, (n, m)),
                           np.broadcast_to(jet.hess, (n, m, m)))
                cache[(a, b)] = jet
            entries.append(cache[(a, b)])
    return jet_stack(entries, (m, m))


def christoffel_from(g_inv, dg):
    """Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)."""
    lower = (np.einsum("zijl->zlij", dg) + np.einsum("zjil->zlij", dg) - dg)
    gam = 0.5 * np.einsum("zkl,zlij->zkij", g_inv, lower)
    return 0.5 * (gam + np.swapaxes(gam, -1, -2))


def _metric(chart: RiemannianChart, pts, side="source") -> MetricAtPoint:
    check_domain(chart, pts, side)
    mj = metric_jet(chart, pts)
    g = mj.value
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(f"metric of chart {chart.name!r} is not positive definite") from None
    g_inv = np.linalg.inv(g)
    g_inv = 0.5 * (g_inv + np.swapaxes(g_inv, -1, -2))
    dg = np.einsum("zijk->zkij", mj.grad)
    d2g = np.einsum("zijkl->zklij", mj.hess)
    return MetricAtPoint(np.array(pts), g, g_inv, dg, christoffel_from(g_inv, dg), d2g)


def metric_at(chart: RiemannianChart, p) -> MetricAtPoint:
    """Metric, inverse, first derivatives and Christoffel symbols at ``p``."""
    pts, single = as_batch(p, chart.dim)
    mp = _metric(chart, pts)
    return mp.squeeze() if single else mp


def scalar_jet(chart: RiemannianChart, u, pts) -> Jet2:
    n = len(pts)
    j = eval_jet(as_expr(u), seed(chart.coords, pts))
    m = chart.dim
    return Jet2(np.broadcast_to(j.value, (n,)), np.broadcast_to(j.grad, (n, m)),
                np.broadcast_to(j.hess, (n, m, m)))


def _grad(mp, uj):
    return np.einsum("zij,zj->zi", mp.g_inv, uj.grad)


def _laplacian(mp, uj):
    hess = uj.hess - np.einsum("zkij,zk->zij", mp.christoffel, uj.grad)
    return np.einsum("zij,zij->z", mp.g_inv, hess)


def grad_scalar(chart: RiemannianChart, u, p):
    """Contravariant gradient g^ij d_j u."""
    pts, single = as_batch(p, chart.dim)
    mp = _metric(chart, pts)
    return unbatch(_grad(mp, scalar_jet(chart, u, pts)), single)


def laplace_beltrami(chart: RiemannianChart, u, p):
    pts, single = as_batch(p, chart.dim)
    mp = _metric(chart, pts)
    return unbatch(_laplacian(mp, scalar_jet(chart, u, pts)), single)


def _f_laplacian(mp, fj, uj):
    if np.any(fj.value <= 0):
        raise WeightNotPositive("weight must be positive")
    return fj.value * _laplacian(mp, uj) + np.einsum("zi,zij,zj->z", fj.grad, mp.g_inv, uj.grad)


def f_laplacian(chart: RiemannianChart, f, u, p):
    """f * Laplace-Beltrami(u) + g(grad f, grad u)."""
    pts, single = as_batch(p, chart.dim)
    mp = _metric(chart, pts)
    out = _f_laplacian(mp, scalar_jet(chart, f, pts), scalar_jet(chart, u, pts))
    return unbatch(out, single)


def conformal_scale(chart: RiemannianChart, factor, name: str = None) -> RiemannianChart:
    """Chart with metric ``factor * g``; the factor is used as given (already exponentiated)."""
    fac = as_expr(factor)
    return RiemannianChart(
        name=name or f"{chart.name}*({to_source(fac)})",
        coords=chart.coords,
        metric=tuple(tuple(fac * x for x in row) for row in chart.metric),
        domain=chart.domain,
        description=f"conformal rescaling of {chart.name}",
        sample_box=chart.sample_box,
    )


def metric_inverse_exprs(chart: RiemannianChart):
    """Symbolic inverse metric by cofactors (m <= 3)."""
    g = chart.metric
    m = chart.dim
    if m == 1:
        return ((1 / g[0][0],),)
    if m == 2:
        det = g[0][0] * g[1][1] - g[0][1] * g[1][0]
        return ((g[1][1] / det, -g[0][1] / det), (-g[1][0] / det, g[0][0] / det))
    if m == 3:
        def cof(i, j):
            r = [a for a in range(3) if a != i]
            c = [b for b in range(3) if b != j]
            minor = g[r[0]][c[0]] * g[r[1]][c[1]] - g[r[0]][c[1]] * g[r[1]][c[0]]
            return minor if (i + j) % 2 == 0 else -minor
        det = g[0][0] * cof(0, 0) + g[0][1] * cof(0, 1) + g[0][2] * cof(0, 2)
        return tuple(tuple(cof(j, i) / det for j in range(3)) for i in range(3))
    raise NotImplementedError("symbolic inverse only for dimension <= 3")


# ---------------------------------------------------------------------------
# standard charts

def _sq(coords: Sequence[str]):
    return sum((as_expr(c) ** 2 for c in coords[1:]), as_expr(coords[0]) ** 2)


def _diag(coords, factor):
    m = len(coords)
    fac = as_expr(factor)
    return tuple(tuple(fac if i == j else as_expr(0) for j in range(m)) for i in range(m))


def euclidean(coords, name=None, domain=None, sample_box=None) -> RiemannianChart:
    coords = tuple(coords)
    return RiemannianChart(name or f"R{len(coords)}", coords, _diag(coords, 1), domain,
                           f"Euclidean {len(coords)}-space", sample_box)


def half_space(coords, name=None, sample_box=None) -> RiemannianChart:
    """Upper half-space model of hyperbolic space, metric (1/z^2) ds0^2 with z the last coordinate."""
    coords = tuple(coords)
    z = as_expr(coords[-1])
    return RiemannianChart(name or f"H{len(coords)}", coords, _diag(coords, 1 / z ** 2), z,
                           f"hyperbolic {len(coords)}-space, upper half-space model", sample_box)


def stereo_sphere(coords, name=None, bound: float = 400.0, sample_box=None) -> RiemannianChart:
    """Round unit sphere via inverse stereographic projection, metric 4 ds0^2/(1+|x|^2)^2.

    ``bound`` caps |x|^2 so points near the projection pole are rejected.
    """
    coords = tuple(coords)
    r2 = _sq(coords)
    return RiemannianChart(name or f"S{len(coords)}", coords, _diag(coords, 4 / (1 + r2) ** 2),
                           bound - r2, f"round {len(coords)}-sphere, stereographic chart", sample_box)


def poincare_ball(coords, name=None, sample_box=None) -> RiemannianChart:
    coords = tuple(coords)
    r2 = _sq(coords)
    return RiemannianChart(name or f"D{len(coords)}", coords, _diag(coords, 4 / (1 - r2) ** 2),
                           1 - r2, f"hyperbolic {len(coords)}-space, Poincare ball model", sample_box)
