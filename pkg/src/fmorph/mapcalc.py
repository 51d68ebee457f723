"""Map-level operators: differential, pullback metric, energy density and tension fields.

Component second derivatives come from jets in source coordinates; target
metric data is evaluated at the image point with fresh jets in target
coordinates, and the chain rule is assembled here explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .errors import ChartMismatch, CriticalPoint, SchemaError, WeightMissing, WeightNotPositive
from .exprlang import Expr, as_expr, differentiate, free_vars, substitute, to_source
from .geometry import (
    MetricAtPoint, RiemannianChart, _metric, as_batch, metric_inverse_exprs, scalar_jet, unbatch,
)
from .jet import Jet2, eval_jet, eval_real, jet_compose, jet_einsum, jet_inverse, jet_stack, real_env, seed


@dataclass(eq=True)
class MapSpec:
    source: RiemannianChart
    target: RiemannianChart
    components: tuple
    weight: Optional[Expr] = None
    name: str = ""

    def __post_init__(self):
        self.components = tuple(as_expr(c) for c in self.components)
        if self.weight is not None:
            self.weight = as_expr(self.weight)
        if len(self.components) != self.target.dim:
            raise SchemaError(
                f"map {self.name!r}: {len(self.components)} components for a "
                f"{self.target.dim}-dimensional target")
        allowed = set(self.source.coords)
        for c in self.components:
            extra = free_vars(c) - allowed
            if extra:
                raise SchemaError(f"map {self.name!r}: component uses unknown variable(s) {sorted(extra)}")
        if self.weight is not None and free_vars(self.weight) - allowed:
            raise SchemaError(f"map {self.name!r}: weight uses non-source variables")

    @property
    def m(self) -> int:
        return self.source.dim

    @property
    def n(self) -> int:
        return self.target.dim

    def with_weight(self, weight, name=None) -> "MapSpec":
        return MapSpec(self.source, self.target, self.components, weight, name or self.name)

    def with_source(self, source: RiemannianChart) -> "MapSpec":
        return MapSpec(source, self.target, self.components, self.weight, self.name)

    @cached_property
    def jacobian_exprs(self) -> tuple:
        """Symbolic first partials d_i phi^a, shape (n, m)."""
        return tuple(tuple(differentiate(c, x) for x in self.source.coords) for c in self.components)

    def image(self, pts):
        env = real_env(self.source.coords, pts)
        return np.stack([np.broadcast_to(eval_real(c, env), np.shape(pts)[:-1])
                         for c in self.components], axis=-1)

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "source": self.source.name,
            "target": self.target.name,
            "components": [to_source(c) for c in self.components],
        }
        if self.weight is not None:
            d["weight"] = to_source(self.weight)
        return d


@dataclass
class MapJet:
    point: np.ndarray
    image: np.ndarray
    J: np.ndarray            # (..., n, m)
    H: np.ndarray            # (..., n, m, m)
    source: MetricAtPoint
    target: MetricAtPoint
    target_metric_jet: Jet2 = field(default=None, repr=False)

    def squeeze(self) -> "MapJet":
        return MapJet(self.point[0], self.image[0], self.J[0], self.H[0],
                      self.source.squeeze(), self.target.squeeze())


def _map_jet(mp: MapSpec, pts) -> MapJet:
    src = _metric(mp.source, pts, "source")
    env = seed(mp.source.coords, pts)
    n, m, N = mp.n, mp.m, len(pts)
    jets = [eval_jet(c, env) for c in mp.components]
    image = np.stack([np.broadcast_to(j.value, (N,)) for j in jets], axis=-1)
    J = np.stack([np.broadcast_to(j.grad, (N, m)) for j in jets], axis=1)
    H = np.stack([np.broadcast_to(j.hess, (N, m, m)) for j in jets], axis=1)
    tgt = _metric(mp.target, image, "target")
    return MapJet(np.array(pts), image, J, H, src, tgt)


def map_jet(mp: MapSpec, p) -> MapJet:
    pts, single = as_batch(p, mp.m)
    mj = _map_jet(mp, pts)
    return mj.squeeze() if single else mj


def _T(mj: MapJet):
    """T^ab = g(grad phi^a, grad phi^b)."""
    return np.einsum("zai,zij,zbj->zab", mj.J, mj.source.g_inv, mj.J)


def _pullback(mj: MapJet):
    return np.einsum("zab,zai,zbj->zij", mj.target.g, mj.J, mj.J)


def _energy(mj: MapJet):
    return 0.5 * np.einsum("zij,zij->z", mj.source.g_inv, _pullback(mj))


def _tension(mj: MapJet):
    T = _T(mj)
    hess = mj.H - np.einsum("zkij,zak->zaij", mj.source.christoffel, mj.J)
    tau = np.einsum("zij,zaij->za", mj.source.g_inv, hess)
    return tau + np.einsum("zsab,zab->zs", mj.target.christoffel, T)


def _weight_jet(mp: MapSpec, pts, weight=None) -> Jet2:
    w = mp.weight if weight is None else as_expr(weight)
    if w is None:
        raise WeightMissing(f"map {mp.name!r} has no weight")
    fj = scalar_jet(mp.source, w, pts)
    if np.any(fj.value <= 0):
        raise WeightNotPositive(f"weight {to_source(w)} is not positive at every point")
    return fj


def _push_grad(mj: MapJet, covector):
    """dphi(grad s) for a covector ds given in source coordinates."""
    return np.einsum("zai,zij,zj->za", mj.J, mj.source.g_inv, covector)


def _f_tension(mj: MapJet, fj: Jet2):
    return fj.value[:, None] * _tension(mj) + _push_grad(mj, fj.grad)


def pullback_metric(mp: MapSpec, p):
    """(phi^* h)_ij = h_ab(phi) d_i phi^a d_j phi^b."""
    pts, single = as_batch(p, mp.m)
    return unbatch(_pullback(_map_jet(mp, pts)), single)


def energy_density(mp: MapSpec, p):
    """|dphi|^2 / 2."""
    pts, single = as_batch(p, mp.m)
    return unbatch(_energy(_map_jet(mp, pts)), single)


def tension(mp: MapSpec, p):
    pts, single = as_batch(p, mp.m)
    return unbatch(_tension(_map_jet(mp, pts)), single)


def f_tension(mp: MapSpec, p):
    """f tau(phi) + dphi(grad f), using the map's weight."""
    pts, single = as_batch(p, mp.m)
    mj = _map_jet(mp, pts)
    return unbatch(_f_tension(mj, _weight_jet(mp, pts)), single)


def _energy_gradient(mj: MapJet):
    """Covector d e(phi) in source coordinates, e = |dphi|^2/2.

    Uses d g^ij = -g^ia d g_ab g^bj and d (h o phi) = dh(phi) . J.
    """
    gi = mj.source.g_inv
    dgi = -np.einsum("zia,zkab,zbj->zkij", gi, mj.source.dg, gi)
    dh = np.einsum("zcab,zck->zkab", mj.target.dg, mj.J)
    h = mj.target.g
    t1 = np.einsum("zkij,zab,zai,zbj->zk", dgi, h, mj.J, mj.J)
    t2 = np.einsum("zij,zkab,zai,zbj->zk", gi, dh, mj.J, mj.J)
    t3 = 2.0 * np.einsum("zij,zab,zaik,zbj->zk", gi, h, mj.H, mj.J)
    return 0.5 * (t1 + t2 + t3)


def _check_noncritical(e, what):
    if np.any(e <= 0):
        raise CriticalPoint(f"{what} is singular where |dphi| = 0")


def F_tension(mp: MapSpec, p, Fprime: Callable, Fsecond: Callable):
    """F'(e) tau + dphi(grad F'(e)) with e = |dphi|^2/2.

    ``Fprime`` and ``Fsecond`` are closed-form scalar functions (numpy-aware).
    """
    pts, single = as_batch(p, mp.m)
    mj = _map_jet(mp, pts)
    e = _energy(mj)
    _check_noncritical(e, "F-tension")
    de = _energy_gradient(mj)
    fp = np.asarray(Fprime(e), dtype=float)
    fpp = np.asarray(Fsecond(e), dtype=float)
    out = fp[:, None] * _tension(mj) + _push_grad(mj, fpp[:, None] * de)
    return unbatch(out, single)


def p_tension(mp: MapSpec, p, pexp: float):
    """|dphi|^(p-2) tau + dphi(grad |dphi|^(p-2))."""
    pts, single = as_batch(p, mp.m)
    mj = _map_jet(mp, pts)
    tau = _tension(mj)
    if pexp == 2:
        return unbatch(tau, single)
    e = _energy(mj)
    _check_noncritical(e, "p-tension")
    de = _energy_gradient(mj)
    s = 2.0 * e                         # |dphi|^2
    w = s ** ((pexp - 2) / 2)
    dw = (pexp - 2) / 2 * s ** ((pexp - 4) / 2) * 2.0
    out = w[:, None] * tau + _push_grad(mj, dw[:, None] * de)
    return unbatch(out, single)


def energy_density_expr(mp: MapSpec) -> Expr:
    """|dphi|^2 as a symbolic expression in source coordinates."""
    gi = metric_inverse_exprs(mp.source)
    h = tuple(tuple(substitute(x, dict(zip(mp.target.coords, mp.components))) for x in row)
              for row in mp.target.metric)
    J = mp.jacobian_exprs
    total = None
    for i in range(mp.m):
        for j in range(mp.m):
            for a in range(mp.n):
                for b in range(mp.n):
                    term = gi[i][j] * h[a][b] * J[a][i] * J[b][j]
                    total = term if total is None else total + term
    return total


def p_weight_expr(mp: MapSpec, pexp: float) -> Expr:
    """|dphi|^(p-2) as an expression, the weight that turns p-tension into f-tension."""
    return energy_density_expr(mp) ** as_expr((pexp - 2) / 2)


# ---------------------------------------------------------------------------
# composition

def compose(phi: MapSpec, psi: MapSpec, name=None) -> MapSpec:
    """psi o phi by substituting phi's components into psi's."""
    if phi.target.coords != psi.source.coords or phi.target.metric != psi.source.metric:
        raise ChartMismatch(f"target of {phi.name!r} is not the source of {psi.name!r}")
    sub = dict(zip(psi.source.coords, phi.components))
    comps = tuple(substitute(c, sub) for c in psi.components)
    return MapSpec(phi.source, psi.target, comps, phi.weight, name or f"{psi.name}o{phi.name}")


@dataclass
class CompositionResult:
    direct: np.ndarray
    decomposed: np.ndarray
    push_tau_f: np.ndarray      # dpsi(tau_f(phi))
    trace_term: np.ndarray      # f Tr_g nabla dpsi(dphi, dphi)

    @property
    def residual(self):
        return np.linalg.norm(self.direct - self.decomposed, axis=-1)


def composition_f_tension(phi: MapSpec, psi: MapSpec, p) -> CompositionResult:
    """tau_f(psi o phi) computed directly and as dpsi(tau_f(phi)) + f Tr_g nabla dpsi(dphi, dphi)."""
    if phi.weight is None:
        raise WeightMissing(f"map {phi.name!r} has no weight")
    whole = compose(phi, psi)
    pts, single = as_batch(p, phi.m)
    fj = _weight_jet(phi, pts)
    direct = _f_tension(_map_jet(whole, pts), fj)

    mj = _map_jet(phi, pts)
    tau_f = _f_tension(mj, fj)
    nj = _map_jet(psi, mj.image)
    push = np.einsum("zsa,za->zs", nj.J, tau_f)
    # nabla dpsi_ab = d_ab psi - Gamma^N_ab^c d_c psi + Gamma^Q(psi) d_a psi d_b psi
    ndpsi = (nj.H - np.einsum("zcab,zsc->zsab", nj.source.christoffel, nj.J)
             + np.einsum("zsrk,zra,zkb->zsab", nj.target.christoffel, nj.J, nj.J))
    trace = fj.value[:, None] * np.einsum("zab,zsab->zs", _T(mj), ndpsi)
    res = CompositionResult(direct, push + trace, push, trace)
    if single:
        res = CompositionResult(*(x[0] for x in (res.direct, res.decomposed, res.push_tau_f, res.trace_term)))
    return res


# ---------------------------------------------------------------------------
# jets of dphi-derived tensors (third derivatives of components)

def jacobian_jet(mp: MapSpec, pts) -> Jet2:
    """Jet of the Jacobian matrix, value shape (N, n, m)."""
    env = seed(mp.source.coords, pts)
    N, m = len(pts), mp.m
    jets = []
    for row in mp.jacobian_exprs:
        for e in row:
            j = eval_jet(e, env)
            jets.append(Jet2(np.broadcast_to(j.value, (N,)), np.broadcast_to(j.grad, (N, m)),
                             np.broadcast_to(j.hess, (N, m, m))))
    return jet_stack(jets, (mp.n, mp.m))


def T_and_W_jets(mp: MapSpec, mj: MapJet):
    """Jets (in source coordinates) of T = J g^-1 J^T and W = h^-1 o phi."""
    from .geometry import metric_jet
    pts = mj.point
    Jj = jacobian_jet(mp, pts)
    ginv = jet_inverse(metric_jet(mp.source, pts))
    T = jet_einsum("zbj,zaj->zab", Jj, jet_einsum("zai,zij->zaj", Jj, ginv))
    hinv_t = jet_inverse(metric_jet(mp.target, mj.image))
    W = jet_compose(hinv_t, mj.J, mj.H)
    return T, W
