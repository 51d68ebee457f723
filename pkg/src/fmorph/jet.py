"""Second-order jets and expression evaluation.

A :class:`Jet2` holds the value, gradient and Hessian of a quantity with
respect to ``k`` seeded coordinates. Values may carry leading array axes:
evaluating an expression on ``N`` points at once gives jets with
``value.shape == (N,)``, ``grad.shape == (N, k)``, ``hess.shape == (N, k, k)``.
Tensor-valued jets (a matrix of jets, say) put their tensor axes between the
batch axis and the derivative axes.

The value path of :func:`eval_jet` applies exactly the same numpy primitive
as :func:`eval_real`, so the two agree bit for bit.
"""
from __future__ import annotations

from typing import Mapping

import numpy as np

from .errors import DomainError, UnboundVariable
from .exprlang import BinOp, Call, Const, CONSTANTS, Expr, Neg, Num, Var, free_vars, to_source


class Jet2:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess):
        self.value = np.asarray(value, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = np.asarray(hess, dtype=float)

    @property
    def k(self) -> int:
        return self.grad.shape[-1]

    @classmethod
    def constant(cls, value, k: int) -> "Jet2":
        v = np.asarray(value, dtype=float)
        return cls(v, np.zeros(v.shape + (k,)), np.zeros(v.shape + (k, k)))

    @classmethod
    def variable(cls, value, index: int, k: int) -> "Jet2":
        v = np.asarray(value, dtype=float)
        g = np.zeros(v.shape + (k,))
        g[..., index] = 1.0
        return cls(v, g, np.zeros(v.shape + (k, k)))

    def __repr__(self):
        return f"Jet2(value={self.value!r}, grad={self.grad!r}, hess={self.hess!r})"

    def __getitem__(self, idx) -> "Jet2":
        """Index the value axes (not the derivative axes)."""
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet2(self.value[idx], self.grad[idx + (Ellipsis, slice(None))],
                    self.hess[idx + (Ellipsis, slice(None), slice(None))])

    def _coerce(self, other) -> "Jet2":
        return other if isinstance(other, Jet2) else Jet2.constant(other, self.k)

    def __add__(self, other):
        o = self._coerce(other)
        return jadd(self, o)

    __radd__ = __add__

    def __sub__(self, other):
        return jsub(self, self._coerce(other))

    def __rsub__(self, other):
        return jsub(self._coerce(other), self)

    def __mul__(self, other):
        return jmul(self, self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return jdiv(self, self._coerce(other))

    def __rtruediv__(self, other):
        return jdiv(self._coerce(other), self)

    def __neg__(self):
        return Jet2(-self.value, -self.grad, -self.hess)


def _x(v):
    """Append one broadcast axis."""
    return np.asarray(v)[..., None]


def _xx(v):
    return np.asarray(v)[..., None, None]


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _sym_outer(a, b):
    o = _outer(a, b)
    return o + np.swapaxes(o, -1, -2)


def jadd(a: Jet2, b: Jet2) -> Jet2:
    return Jet2(a.value + b.value, a.grad + b.grad, a.hess + b.hess)


def jsub(a: Jet2, b: Jet2) -> Jet2:
    return Jet2(a.value - b.value, a.grad - b.grad, a.hess - b.hess)


def jmul(a: Jet2, b: Jet2) -> Jet2:
    return Jet2(
        a.value * b.value,
        a.grad * _x(b.value) + _x(a.value) * b.grad,
        a.hess * _xx(b.value) + _xx(a.value) * b.hess + _sym_outer(a.grad, b.grad),
    )


def jdiv(a: Jet2, b: Jet2) -> Jet2:
    q = a.value / b.value
    qg = (a.grad - _x(q) * b.grad) / _x(b.value)
    qh = (a.hess - _xx(q) * b.hess - _sym_outer(qg, b.grad)) / _xx(b.value)
    return Jet2(q, qg, qh)


def jchain(a: Jet2, v, d1, d2) -> Jet2:
    """Compose a scalar function with value ``v`` and derivatives ``d1, d2`` at ``a``."""
    return Jet2(v, _x(d1) * a.grad, _xx(d1) * a.hess + _xx(d2) * _outer(a.grad, a.grad))


# ---------------------------------------------------------------------------
# primitive table: value functions shared by both evaluators

def _check(cond, msg, node):
    if np.any(cond):
        raise DomainError(f"{msg} in {to_source(node)}", node)


def _real_pow(a, b, node):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check((a < 0) & (b != np.round(b)), "negative base with non-integer exponent", node)
    _check((a == 0) & (b < 0), "division by zero", node)
    with np.errstate(all="ignore"):
        return np.power(a, b)


def _real_call(func, args, node):
    if func == "log":
        _check(args[0] <= 0, "log of non-positive value", node)
        return np.log(args[0])
    if func == "sqrt":
        _check(args[0] < 0, "sqrt of negative value", node)
        return np.sqrt(args[0])
    if func == "atan2":
        _check((args[0] == 0) & (args[1] == 0), "atan2(0, 0)", node)
        return np.arctan2(args[0], args[1])
    if func == "pow":
        return _real_pow(args[0], args[1], node)
    return _UNARY[func](args[0]) if len(args) == 1 else _BINARY[func](*args)


_UNARY = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "abs": np.abs, "tanh": np.tanh,
}
_BINARY = {"min": np.minimum, "max": np.maximum}


def _check_bound(e: Expr, names):
    missing = free_vars(e) - set(names)
    if missing:
        raise UnboundVariable(sorted(missing)[0])


def eval_real(e: Expr, env: Mapping[str, object]):
    """Evaluate ``e``; env values may be floats or numpy arrays (evaluated elementwise)."""
    _check_bound(e, env)
    memo = {}

    def go(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Num):
            r = np.float64(node.value)
        elif isinstance(node, Const):
            r = np.float64(CONSTANTS[node.name])
        elif isinstance(node, Var):
            r = np.asarray(env[node.name], dtype=float)
        elif isinstance(node, Neg):
            r = -go(node.operand)
        elif isinstance(node, BinOp):
            a, b = go(node.left), go(node.right)
            if node.op == "+":
                r = a + b
            elif node.op == "-":
                r = a - b
            elif node.op == "*":
                r = a * b
            elif node.op == "/":
                _check(b == 0, "division by zero", node)
                r = a / b
            else:
                r = _real_pow(a, b, node)
        elif isinstance(node, Call):
            r = _real_call(node.func, [go(x) for x in node.args], node)
        else:
            raise TypeError(type(node))
        memo[key] = r
        return r

    return go(e)


def _jet_pow(a: Jet2, b: Jet2, node) -> Jet2:
    v = _real_pow(a.value, b.value, node)
    const_exp = not (np.any(b.grad) or np.any(b.hess))
    with np.errstate(all="ignore"):
        if const_exp:
            c = b.value
            non_smooth = (a.value == 0) & (((c != np.round(c)) & (c < 2)) | (c < 0))
            _check(non_smooth, "power not differentiable at 0", node)
            d1 = np.where(c == 0, 0.0, c * np.power(a.value, c - 1))
            d2 = np.where(c * (c - 1) == 0, 0.0, c * (c - 1) * np.power(a.value, c - 2))
            return jchain(a, v, d1, d2)
        _check(a.value <= 0, "non-positive base with variable exponent", node)
        z = jmul(b, jchain(a, np.log(a.value), 1.0 / a.value, -1.0 / a.value ** 2))
        return Jet2(v, _x(v) * z.grad, _xx(v) * (z.hess + _outer(z.grad, z.grad)))


def _jet_call(func, args, node) -> Jet2:
    if func == "pow":
        return _jet_pow(args[0], args[1], node)
    if func == "atan2":
        y, x = args
        v = _real_call("atan2", [y.value, x.value], node)
        r2 = x.value ** 2 + y.value ** 2
        fy, fx = x.value / r2, -y.value / r2
        fyy = -2 * x.value * y.value / r2 ** 2
        fxx = -fyy
        fxy = (y.value ** 2 - x.value ** 2) / r2 ** 2
        g = _x(fy) * y.grad + _x(fx) * x.grad
        h = (_xx(fy) * y.hess + _xx(fx) * x.hess + _xx(fyy) * _outer(y.grad, y.grad)
             + _xx(fxx) * _outer(x.grad, x.grad) + _xx(fxy) * _sym_outer(y.grad, x.grad))
        return Jet2(v, g, h)
    if func in ("min", "max"):
        a, b = args
        v = _real_call(func, [a.value, b.value], node)
        pick_a = a.value <= b.value if func == "min" else a.value >= b.value
        pick_a = np.broadcast_to(pick_a, np.broadcast(a.value, b.value).shape)
        g = np.where(_x(pick_a), a.grad, b.grad)
        h = np.where(_xx(pick_a), a.hess, b.hess)
        return Jet2(v, g, h)
    a = args[0]
    x = a.value
    v = _real_call(func, [x], node)
    if func == "sin":
        return jchain(a, v, np.cos(x), -v)
    if func == "cos":
        return jchain(a, v, -np.sin(x), -v)
    if func == "tan":
        sec2 = 1.0 + v * v
        return jchain(a, v, sec2, 2.0 * v * sec2)
    if func == "exp":
        return jchain(a, v, v, v)
    if func == "log":
        return jchain(a, v, 1.0 / x, -1.0 / (x * x))
    if func == "sqrt":
        _check(x == 0, "sqrt not differentiable at 0", node)
        return jchain(a, v, 0.5 / v, -0.25 / (v * x))
    if func == "abs":
        _check(x == 0, "abs not differentiable at 0", node)
        return jchain(a, v, np.sign(x), 0.0)
    if func == "tanh":
        s = 1.0 - v * v
        return jchain(a, v, s, -2.0 * v * s)
    raise ValueError(func)


def eval_jet(e: Expr, env: Mapping[str, Jet2]) -> Jet2:
    """Degree-2 Taylor expansion of ``e`` at the point carried by ``env``."""
    _check_bound(e, env)
    ks = {j.k for j in env.values()}
    if len(ks) > 1:
        raise ValueError("environment jets disagree on the number of seeded coordinates")
    k = ks.pop() if ks else 0
    zero_g, zero_h = np.zeros(k), np.zeros((k, k))
    memo = {}

    def go(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Num):
            r = Jet2(np.float64(node.value), zero_g, zero_h)
        elif isinstance(node, Const):
            r = Jet2(np.float64(CONSTANTS[node.name]), zero_g, zero_h)
        elif isinstance(node, Var):
            r = env[node.name]
        elif isinstance(node, Neg):
            r = -go(node.operand)
        elif isinstance(node, BinOp):
            a, b = go(node.left), go(node.right)
            if node.op == "+":
                r = jadd(a, b)
            elif node.op == "-":
                r = jsub(a, b)
            elif node.op == "*":
                r = jmul(a, b)
            elif node.op == "/":
                _check(b.value == 0, "division by zero", node)
                r = jdiv(a, b)
            else:
                r = _jet_pow(a, b, node)
        elif isinstance(node, Call):
            r = _jet_call(node.func, [go(x) for x in node.args], node)
        else:
            raise TypeError(type(node))
        memo[key] = r
        return r

    return go(e)


def seed(coords, points) -> dict:
    """Jets for each coordinate at ``points`` (shape ``(..., k)``)."""
    pts = np.asarray(points, dtype=float)
    k = len(coords)
    if pts.shape[-1] != k:
        raise ValueError(f"expected points with {k} coordinates, got shape {pts.shape}")
    return {name: Jet2.variable(pts[..., i], i, k) for i, name in enumerate(coords)}


def real_env(coords, points) -> dict:
    pts = np.asarray(points, dtype=float)
    return {name: pts[..., i] for i, name in enumerate(coords)}


# ---------------------------------------------------------------------------
# tensor jets; first axis of every value is the batch axis

def jet_stack(jets, shape) -> Jet2:
    """Assemble scalar jets (row-major list) into a tensor jet of the given value shape."""
    n = len(jets)
    b = np.broadcast_shapes(*(j.value.shape for j in jets))
    k = jets[0].k
    v = np.empty(b + (n,))
    g = np.empty(b + (n, k))
    h = np.empty(b + (n, k, k))
    for i, j in enumerate(jets):
        v[..., i] = j.value
        g[..., i, :] = j.grad
        h[..., i, :, :] = j.hess
    return Jet2(v.reshape(b + tuple(shape)), g.reshape(b + tuple(shape) + (k,)),
                h.reshape(b + tuple(shape) + (k, k)))


def jet_einsum(spec: str, a: Jet2, b: Jet2) -> Jet2:
    """Product rule for a bilinear contraction written in einsum notation."""
    ins, out = spec.split("->")
    sa, sb = ins.split(",")
    free = [c for c in "pqrstuvwxy" if c not in spec]
    d1, d2 = free[0], free[1]
    v = np.einsum(spec, a.value, b.value)
    g = (np.einsum(f"{sa}{d1},{sb}->{out}{d1}", a.grad, b.value)
         + np.einsum(f"{sa},{sb}{d1}->{out}{d1}", a.value, b.grad))
    cross = np.einsum(f"{sa}{d1},{sb}{d2}->{out}{d1}{d2}", a.grad, b.grad)
    h = (np.einsum(f"{sa}{d1}{d2},{sb}->{out}{d1}{d2}", a.hess, b.value)
         + np.einsum(f"{sa},{sb}{d1}{d2}->{out}{d1}{d2}", a.value, b.hess)
         + cross + np.swapaxes(cross, -1, -2))
    return Jet2(v, g, h)


def jet_inverse(m: Jet2) -> Jet2:
    """Jet of the inverse of a batch of square matrix jets (value shape ``(N, n, n)``)."""
    inv = np.linalg.inv(m.value)
    dm = np.moveaxis(m.grad, -1, 1)          # (N, k, n, n)
    g = -np.einsum("zab,zkbc,zcd->zadk", inv, dm, inv)
    t = np.einsum("zab,zkbc,zcd,zlde,zef->zafkl", inv, dm, inv, dm, inv)
    ddm = np.einsum("zabkl->zklab", m.hess)
    t2 = np.einsum("zab,zklbc,zcd->zadkl", inv, ddm, inv)
    h = t + np.swapaxes(t, -1, -2) - t2
    h = 0.5 * (h + np.swapaxes(h, -1, -2))
    return Jet2(inv, g, h)


def jet_compose(q: Jet2, jac, hmap) -> Jet2:
    """Pull a jet taken in target coordinates back through a map.

    ``q`` has batch axis first and target-derivative axes last; ``jac`` is
    ``(N, n, m)`` and ``hmap`` is ``(N, n, m, m)``.
    """
    g = np.einsum("z...a,zai->z...i", q.grad, jac)
    h = (np.einsum("z...ab,zai,zbj->z...ij", q.hess, jac, jac)
         + np.einsum("z...a,zaij->z...ij", q.grad, hmap))
    h = 0.5 * (h + np.swapaxes(h, -1, -2))
    return Jet2(q.value, g, h)
