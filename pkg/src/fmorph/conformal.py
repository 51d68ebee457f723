"""Horizontal weak conformality, dilation, homothety, fibre mean curvature and conformal immersions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EqualDimensions, NotHWC, NotImmersion, NotSubmersive
from .geometry import as_batch, scalar_jet
from .jet import Jet2, jdiv, jet_einsum
from .mapcalc import MapJet, MapSpec, T_and_W_jets, _T, _f_tension, _map_jet, _pullback, _tension

CRITICAL_REL = 1e-10
KERNEL_REL = 1e-9


@dataclass
class ConformalityReport:
    point: np.ndarray
    T: np.ndarray
    h_inv: np.ndarray
    lambda_sq: np.ndarray
    hwc_residual: np.ndarray
    rank: np.ndarray
    vertical_basis: list
    horizontal_basis: list
    is_critical: np.ndarray
    is_hwc: np.ndarray
    is_submersive: np.ndarray
    is_indeterminate: np.ndarray

    def squeeze(self) -> "ConformalityReport":
        vals = {k: (v[0] if k not in ("vertical_basis", "horizontal_basis") else v[0])
                for k, v in self.__dict__.items()}
        for k in ("is_critical", "is_hwc", "is_submersive", "is_indeterminate"):
            vals[k] = bool(vals[k])
        vals["rank"] = int(vals["rank"])
        vals["lambda_sq"] = float(vals["lambda_sq"])
        vals["hwc_residual"] = float(vals["hwc_residual"])
        return ConformalityReport(**vals)


@dataclass
class FiberGeometry:
    point: np.ndarray
    d_phi_mu: np.ndarray
    grad_ln_lambda_pushforward: np.ndarray
    minimal_fiber_residual: np.ndarray


def orthonormal_frame(g):
    """Columns E with E^T g E = I (E = L^-T for g = L L^T)."""
    L = np.linalg.cholesky(g)
    return np.swapaxes(np.linalg.inv(L), -1, -2)


def _report(mj: MapJet, tol: float) -> ConformalityReport:
    T = _T(mj)
    W = mj.target.g_inv
    N, n, m = mj.J.shape
    normT = np.linalg.norm(T, axis=(1, 2))
    scale = 1.0 + np.linalg.norm(mj.source.g_inv, axis=(1, 2))
    critical = normT < CRITICAL_REL * scale
    with np.errstate(all="ignore"):
        lam = np.einsum("zab,zab->z", T, W) / np.einsum("zab,zab->z", W, W)
        lam = np.where(critical, 0.0, lam)
        resid = np.linalg.norm(T - lam[:, None, None] * W, axis=(1, 2)) / normT
        resid = np.where(critical, 0.0, resid)
    indeterminate = ~critical & (normT < tol * scale)
    is_hwc = critical | ((resid <= tol) & (lam > 0))

    E = orthonormal_frame(mj.source.g)
    Mt = np.swapaxes(np.linalg.cholesky(mj.target.g), -1, -2)
    A = Mt @ mj.J @ E
    _, S, Vt = np.linalg.svd(A, full_matrices=True)
    smax = S.max(axis=-1) if S.size else np.zeros(N)
    rank = np.where(critical, 0, np.sum(S > KERNEL_REL * smax[:, None], axis=-1)).astype(int)
    frames = E @ np.swapaxes(Vt, -1, -2)
    horiz = [frames[z][:, :rank[z]] for z in range(N)]
    vert = [frames[z][:, rank[z]:] for z in range(N)]
    return ConformalityReport(mj.point, T, W, lam, resid, rank, vert, horiz,
                              critical, is_hwc, rank == n, indeterminate)


def hwc_test(mp: MapSpec, p, tol: float = 1e-8) -> ConformalityReport:
    """Fit g(grad phi^a, grad phi^b) = lambda^2 h^ab(phi) and classify the point(s)."""
    pts, single = as_batch(p, mp.m)
    rep = _report(_map_jet(mp, pts), tol)
    return rep.squeeze() if single else rep


def _dilation(mp: MapSpec, mj: MapJet) -> Jet2:
    T, W = T_and_W_jets(mp, mj)
    return jdiv(jet_einsum("zab,zab->z", T, W), jet_einsum("zab,zab->z", W, W))


def _require_hwc(rep: ConformalityReport, what: str):
    if not np.all(rep.is_hwc & ~rep.is_critical):
        bad = np.flatnonzero(~(rep.is_hwc & ~rep.is_critical))[0]
        raise NotHWC(f"{what} needs a non-critical horizontally weakly conformal point; "
                     f"residual {rep.hwc_residual[bad]:.3e} at {rep.point[bad].tolist()}")


def dilation_jet(mp: MapSpec, p, tol: float = 1e-8) -> Jet2:
    """Jet (value, gradient, Hessian in source coordinates) of lambda^2."""
    pts, single = as_batch(p, mp.m)
    mj = _map_jet(mp, pts)
    _require_hwc(_report(mj, tol), "dilation_jet")
    lam = _dilation(mp, mj)
    return lam[0] if single else lam


def horizontal_homothety_test(mp: MapSpec, p, tol: float = 1e-8) -> dict:
    pts, single = as_batch(p, mp.m)
    mj = _map_jet(mp, pts)
    rep = _report(mj, tol)
    _require_hwc(rep, "horizontal_homothety_test")
    lam = _dilation(mp, mj)
    norms = np.array([np.linalg.norm(lam.grad[z] @ rep.horizontal_basis[z]) for z in range(len(pts))])
    homothetic = norms <= tol * (1.0 + np.abs(lam.value))
    if single:
        return {"is_homothetic": bool(homothetic[0]), "horiz_grad_norm": float(norms[0])}
    return {"is_homothetic": homothetic, "horiz_grad_norm": norms}


def _fiber(mp: MapSpec, mj: MapJet, rep: ConformalityReport, lam: Jet2 = None):
    if mp.m == mp.n:
        raise EqualDimensions("fibre geometry needs m > n")
    if mp.m < mp.n:
        raise NotSubmersive("source dimension below target dimension")
    if not np.all(rep.is_submersive):
        raise NotSubmersive("map is not submersive at every point")
    _require_hwc(rep, "fiber_geometry")
    if lam is None:
        lam = _dilation(mp, mj)
    dln = 0.5 * lam.grad / lam.value[:, None]
    pushed = np.einsum("zai,zij,zj->za", mj.J, mj.source.g_inv, dln)
    mu = ((2 - mp.n) * pushed - _tension(mj)) / (mp.m - mp.n)
    res = np.sqrt(np.einsum("za,zab,zb->z", mu, mj.target.g, mu))
    return FiberGeometry(mj.point, mu, pushed, res), lam


def fiber_geometry(mp: MapSpec, p, tol: float = 1e-8) -> FiberGeometry:
    """Pushforward of the fibre mean curvature, recovered from the tension of an HWC submersion."""
    pts, single = as_batch(p, mp.m)
    mj = _map_jet(mp, pts)
    fg, _ = _fiber(mp, mj, _report(mj, tol))
    if single:
        fg = FiberGeometry(*(x[0] for x in (fg.point, fg.d_phi_mu, fg.grad_ln_lambda_pushforward,
                                            fg.minimal_fiber_residual)))
    return fg


def trichotomy_residual(mp: MapSpec, p, tol: float = 1e-8):
    """|tau_f - f[-(m-n) dphi(mu) + dphi(grad ln(f lambda^(2-n)))]| / (1 + |tau_f|), h-norms."""
    pts, single = as_batch(p, mp.m)
    mj = _map_jet(mp, pts)
    fg, lam = _fiber(mp, mj, _report(mj, tol))
    fj = scalar_jet(mp.source, mp.weight if mp.weight is not None else 1, pts)
    tau_f = _f_tension(mj, fj)
    dlog = fj.grad / fj.value[:, None] + (2 - mp.n) * 0.5 * lam.grad / lam.value[:, None]
    pushed = np.einsum("zai,zij,zj->za", mj.J, mj.source.g_inv, dlog)
    rhs = fj.value[:, None] * (-(mp.m - mp.n) * fg.d_phi_mu + pushed)
    h = mj.target.g
    diff = tau_f - rhs
    res = (np.sqrt(np.einsum("za,zab,zb->z", diff, h, diff))
           / (1.0 + np.sqrt(np.einsum("za,zab,zb->z", tau_f, h, tau_f))))
    return res[0] if single else res


def conformal_immersion_analysis(mp: MapSpec, p, tol: float = 1e-8) -> dict:
    """Split tau_f of an immersion into the part tangent to dphi(TM) and the normal part.

    The normal part is m lambda^2 f eta with eta the mean curvature vector of the image.
    """
    if mp.m > mp.n:
        raise NotImmersion("source dimension exceeds target dimension")
    pts, single = as_batch(p, mp.m)
    mj = _map_jet(mp, pts)
    E = orthonormal_frame(mj.source.g)
    Mt = np.swapaxes(np.linalg.cholesky(mj.target.g), -1, -2)
    S = np.linalg.svd(Mt @ mj.J @ E, compute_uv=False)
    if np.any(S[:, -1] <= KERNEL_REL * S[:, 0]):
        raise NotImmersion("differential does not have full column rank")
    P = _pullback(mj)
    g = mj.source.g
    lam = np.einsum("zij,zij->z", P, g) / np.einsum("zij,zij->z", g, g)
    resid = np.linalg.norm(P - lam[:, None, None] * g, axis=(1, 2)) / np.linalg.norm(g, axis=(1, 2))
    fj = scalar_jet(mp.source, mp.weight if mp.weight is not None else 1, pts)
    tau_f = _f_tension(mj, fj)
    h = mj.target.g
    coef = np.linalg.solve(P, np.einsum("zai,zab,zb->zi", mj.J, h, tau_f)[..., None])[..., 0]
    tangential = np.einsum("zai,zi->za", mj.J, coef)
    normal = tau_f - tangential
    eta = normal / (mp.m * lam * fj.value)[:, None]
    out = {
        "is_conformal_immersion": resid <= tol,
        "lambda_sq": lam,
        "conformality_residual": resid,
        "eta": eta,
        "tangential": tangential,
    }
    if single:
        out = {k: (bool(v[0]) if k == "is_conformal_immersion" else v[0]) for k, v in out.items()}
    return out
