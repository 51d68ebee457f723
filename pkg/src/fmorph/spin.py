"""Discrete inhomogeneous Heisenberg spin system on a flat grid.

A field u maps grid nodes to unit vectors in R^3, and f > 0 is the coupling
function sampled at the nodes. The residual is the conservative stencil

    r_i = sum_a [f_{i+1/2}(u_{i+1} - u_i) - f_{i-1/2}(u_i - u_{i-1})] / h_a^2,

where midpoint weights are arithmetic means of the node values. This is a
second-order approximation of f Lap u + grad f . grad u. It is also exactly
minus the gradient of the discrete energy divided by the cell volume, so the
gradient flow, the precession u x r and the stationarity test all use the
same operator.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUp, NonPositiveWeight, SchemaError, StepUnderflow
from .exprlang import as_expr, parse
from .jet import eval_real

BOUNDARIES = ("dirichlet", "periodic")
DOMAINS = ("square", "disk")


@dataclass
class SpinField:
    u: np.ndarray
    f: np.ndarray
    spacing: tuple
    boundary: str = "dirichlet"
    fixed: np.ndarray = None
    coords: tuple = ()
    domain: str = "square"

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        self.spacing = tuple(float(h) for h in self.spacing)
        if self.u.shape[-1] != 3 or self.u.shape[:-1] != self.f.shape:
            raise SchemaError(f"u has shape {self.u.shape}, f has shape {self.f.shape}")
        if len(self.spacing) != self.f.ndim or self.f.ndim not in (1, 2):
            raise SchemaError("grid must be 1D or 2D with one spacing per axis")
        if self.boundary not in BOUNDARIES:
            raise SchemaError(f"unknown boundary type {self.boundary!r}")
        if not np.all(self.f > 0):
            raise NonPositiveWeight(f"coupling function has minimum {self.f.min():.3e}")
        if self.fixed is None:
            self.fixed = default_fixed(self.f.shape, self.boundary)
        self.fixed = np.asarray(self.fixed, dtype=bool)
        self.u = normalize(self.u)

    @property
    def shape(self):
        return self.f.shape

    @property
    def volume(self) -> float:
        return float(np.prod(self.spacing))

    def replace(self, u) -> "SpinField":
        return SpinField(u, self.f, self.spacing, self.boundary, self.fixed, self.coords, self.domain)

    def to_dict(self) -> dict:
        return {
            "schema": "fmorph/1/spinfield",
            "shape": list(self.shape),
            "spacing": list(self.spacing),
            "boundary": self.boundary,
            "domain": self.domain,
            "u": self.u.tolist(),
            "f": self.f.tolist(),
            "fixed": self.fixed.astype(int).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SpinField":
        u = np.array(d["u"], dtype=float)
        out = cls(u, np.array(d["f"]), d["spacing"], d.get("boundary", "dirichlet"),
                  np.array(d["fixed"], dtype=bool) if "fixed" in d else None,
                  domain=d.get("domain", "square"))
        # keep stored unit vectors bit for bit so that a saved field reloads exactly
        if np.all(np.abs(np.linalg.norm(u, axis=-1) - 1.0) <= 1e-12):
            out.u = u
        return out


def default_fixed(shape, boundary):
    fixed = np.zeros(shape, dtype=bool)
    if boundary == "dirichlet":
        for a in range(len(shape)):
            idx = [slice(None)] * len(shape)
            idx[a] = 0
            fixed[tuple(idx)] = True
            idx[a] = -1
            fixed[tuple(idx)] = True
    return fixed


def normalize(u):
    n = np.linalg.norm(u, axis=-1, keepdims=True)
    return u / n


# ---------------------------------------------------------------------------

def _edges(field: SpinField, a: int):
    """Forward differences and midpoint weights along axis ``a``."""
    u, f = field.u, field.f
    if field.boundary == "periodic":
        du = np.roll(u, -1, axis=a) - u
        fm = 0.5 * (f + np.roll(f, -1, axis=a))
    else:
        du = np.diff(u, axis=a)
        fm = 0.5 * (np.take(f, range(f.shape[a] - 1), axis=a) + np.take(f, range(1, f.shape[a]), axis=a))
    return du, fm


def f_energy(field: SpinField) -> float:
    """Half the sum over lattice edges of f_mid |du/h|^2, times the cell volume."""
    total = 0.0
    for a, h in enumerate(field.spacing):
        du, fm = _edges(field, a)
        total += np.sum(fm * np.sum(du * du, axis=-1)) / (h * h)
    return 0.5 * field.volume * float(total)


def residual(field: SpinField) -> np.ndarray:
    """Discrete f Lap u + grad f . grad u in divergence form (ambient R^3 vector per node)."""
    r = np.zeros_like(field.u)
    for a, h in enumerate(field.spacing):
        du, fm = _edges(field, a)
        flux = fm[..., None] * du / (h * h)
        if field.boundary == "periodic":
            r += flux - np.roll(flux, 1, axis=a)
        else:
            n = field.shape[a]
            lo = [slice(None)] * r.ndim
            hi = [slice(None)] * r.ndim
            lo[a] = slice(0, n - 1)
            hi[a] = slice(1, n)
            r[tuple(lo)] += flux
            r[tuple(hi)] -= flux
    return r


def tangential_residual(field: SpinField):
    """r_T = r - (r.u)u with fixed nodes zeroed; returns (r_T, max norm over free nodes)."""
    r = residual(field)
    rt = r - np.sum(r * field.u, axis=-1, keepdims=True) * field.u
    rt[field.fixed] = 0.0
    return rt, _max_norm(rt)


def llg_rhs(field: SpinField) -> np.ndarray:
    """u x r: the right side of du/dt = f (u x Lap u) + grad f . (u x grad u); zero at fixed nodes."""
    out = np.cross(field.u, residual(field))
    out[field.fixed] = 0.0
    return out


def _max_norm(v):
    return float(np.linalg.norm(v, axis=-1).max()) if v.size else 0.0


# ---------------------------------------------------------------------------

@dataclass
class SolveTrace:
    iteration: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    step: list = field(default_factory=list)

    def record(self, it, e, r, s):
        self.iteration.append(int(it))
        self.energy.append(float(e))
        self.residual.append(float(r))
        self.step.append(float(s))

    def __len__(self):
        return len(self.iteration)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "energy", "residual", "step"])
        for row in zip(self.iteration, self.energy, self.residual, self.step):
            w.writerow([row[0]] + [repr(x) for x in row[1:]])
        return buf.getvalue()


@dataclass
class MinimizeOptions:
    max_iter: int = 50_000
    tol: float = 1e-6
    step0: float = None
    armijo_c: float = 1e-4
    shrink: float = 0.5
    grow: float = 2.0
    min_step: float = 1e-16


def minimize(field: SpinField, opts: MinimizeOptions = None):
    """Projected gradient descent u <- normalize(u + eta r_T) with Armijo backtracking."""
    o = opts or MinimizeOptions()
    vol = field.volume
    eta = o.step0 if o.step0 is not None else min(h * h for h in field.spacing) / (4.0 * field.f.max())
    trace = SolveTrace()
    cur = field
    energy = f_energy(cur)
    rt, rmax = tangential_residual(cur)
    trace.record(0, energy, rmax, 0.0)
    it = 0
    while rmax > o.tol and it < o.max_iter:
        it += 1
        slope = vol * float(np.sum(rt * rt))
        while True:
            trial = cur.replace(cur.u + eta * rt)
            e_trial = f_energy(trial)
            if e_trial <= energy - o.armijo_c * eta * slope:
                break
            eta *= o.shrink
            if eta < o.min_step:
                raise StepUnderflow(f"line search step fell below {o.min_step:g} at iteration {it}")
        cur, energy = trial, e_trial
        rt, rmax = tangential_residual(cur)
        trace.record(it, energy, rmax, eta)
        eta *= o.grow
    return cur, trace


def evolve(field: SpinField, dt: float, steps: int, blowup_dev: float = 0.5):
    """Classical RK4 on du/dt = u x r with renormalization after every step.

    A step whose unnormalized result is non-finite or strays from the unit
    sphere by more than ``blowup_dev`` raises BlowUp.
    """
    trace = SolveTrace()
    cur = field
    _, rmax = tangential_residual(cur)
    trace.record(0, f_energy(cur), rmax, dt)
    for s in range(1, steps + 1):
        u0 = cur.u
        k1 = llg_rhs(cur)
        k2 = llg_rhs(_shift(cur, u0 + 0.5 * dt * k1))
        k3 = llg_rhs(_shift(cur, u0 + 0.5 * dt * k2))
        k4 = llg_rhs(_shift(cur, u0 + dt * k3))
        un = u0 + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        norms = np.linalg.norm(un, axis=-1)
        if not np.all(np.isfinite(un)) or np.any(np.abs(norms - 1.0) > blowup_dev):
            raise BlowUp(f"integration left the unit sphere at step {s}", step=s)
        cur = cur.replace(un)
        _, rmax = tangential_residual(cur)
        trace.record(s, f_energy(cur), rmax, dt)
    return cur, trace


def _shift(field, u):
    # intermediate RK stages are evaluated without renormalizing
    out = SpinField.__new__(SpinField)
    out.__dict__.update(field.__dict__)
    out.u = u
    return out


# ---------------------------------------------------------------------------
# configuration

def grid_coords(shape, spacing):
    axes = [(np.arange(n) - 0.5 * (n - 1)) * h for n, h in zip(shape, spacing)]
    return np.meshgrid(*axes, indexing="xy") if len(shape) == 2 else axes


def field_from_config(cfg: dict) -> SpinField:
    """Build a SpinField from a spin config dictionary (see the README for the schema)."""
    try:
        grid = cfg["grid"]
        nx = int(grid["nx"])
        ny = grid.get("ny")
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"spin config needs grid.nx: {exc}") from None
    domain = cfg.get("domain", "square")
    if domain not in DOMAINS:
        raise SchemaError(f"unknown domain {domain!r}")
    bc = cfg.get("boundary", {"type": "dirichlet"})
    btype = bc.get("type", "dirichlet")
    if btype not in BOUNDARIES:
        raise SchemaError(f"unknown boundary type {btype!r}")
    if domain == "disk" and (ny is None or btype != "dirichlet"):
        raise SchemaError("disk domain needs a 2D grid with dirichlet boundary")

    span = 2.0 if btype == "dirichlet" else 2.0 * np.pi
    hx = float(grid.get("hx", span / (nx - 1 if btype == "dirichlet" else nx)))
    if ny is None:
        shape, spacing = (nx,), (hx,)
        X = grid_coords(shape, spacing)[0]
        env = {"x": X}
    else:
        ny = int(ny)
        hy = float(grid.get("hy", hx))
        shape, spacing = (ny, nx), (hy, hx)
        X, Y = grid_coords((ny, nx), (hx, hy))
        env = {"x": X, "y": Y}

    f = _sample(cfg.get("f", "1"), env, shape)
    if not np.all(f > 0):
        raise NonPositiveWeight(f"coupling function f has minimum {f.min():.3e} on the grid")

    rng = np.random.default_rng(cfg.get("seed", 0))
    init = cfg.get("init", "random")
    if init == "random":
        u = rng.normal(size=shape + (3,))
    elif init == "constant":
        u = np.broadcast_to(np.array(bc.get("value", [0.0, 0.0, 1.0]), dtype=float), shape + (3,)).copy()
    elif isinstance(init, (list, tuple)) and len(init) == 3:
        u = np.stack([_sample(c, env, shape) for c in init], axis=-1)
    else:
        raise SchemaError("init must be 'random', 'constant' or a list of three expressions")

    fixed = default_fixed(shape, btype)
    if domain == "disk":
        fixed = (X ** 2 + Y ** 2) >= 1.0 - 1e-12
    if btype == "dirichlet" and "value" in bc:
        val = np.array(bc["value"], dtype=float)
        if val.shape != (3,):
            raise SchemaError("boundary value must be three reals")
        u[fixed] = val
    if np.any(np.linalg.norm(u, axis=-1) == 0):
        raise SchemaError("initial field vanishes at a node")
    return SpinField(u, f, spacing, btype, fixed, tuple(env), domain)


def _sample(src, env, shape):
    e = parse(src) if isinstance(src, str) else as_expr(src)
    val = eval_real(e, env)
    return np.broadcast_to(np.asarray(val, dtype=float), shape).copy()
