"""A small expression language for metrics, map components and weights.

Grammar (whitespace-insensitive)::

    expr  := term (('+'|'-') term)*
    term  := unary (('*'|'/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?
    atom  := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so
``-x^2`` is ``-(x^2)`` and ``x^2^3`` is ``x^(2^3)``.

Nodes are immutable and compare structurally. Python operators are
overloaded on nodes so that catalog maps and symbolic metric inverses can be
assembled without going through source text.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

from .errors import UnbalancedParen, UnexpectedToken, UnknownFunction

# name -> allowed argument counts
FUNCTIONS = {
    "sin": (1,), "cos": (1,), "tan": (1,), "exp": (1,), "log": (1,),
    "sqrt": (1,), "abs": (1,), "tanh": (1,),
    "atan2": (2,), "pow": (2,), "min": (2,), "max": (2,),
}
CONSTANTS = {"pi": math.pi}


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()

    def __add__(self, other):
        return BinOp("+", self, as_expr(other))

    def __radd__(self, other):
        return BinOp("+", as_expr(other), self)

    def __sub__(self, other):
        return BinOp("-", self, as_expr(other))

    def __rsub__(self, other):
        return BinOp("-", as_expr(other), self)

    def __mul__(self, other):
        return BinOp("*", self, as_expr(other))

    def __rmul__(self, other):
        return BinOp("*", as_expr(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, as_expr(other))

    def __rtruediv__(self, other):
        return BinOp("/", as_expr(other), self)

    def __pow__(self, other):
        return BinOp("^", self, as_expr(other))

    def __rpow__(self, other):
        return BinOp("^", as_expr(other), self)

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return to_source(self)


@dataclass(frozen=True, eq=True, repr=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Const(Expr):
    name: str


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple


ExprLike = Union[Expr, int, float, str]


def as_expr(x: ExprLike) -> Expr:
    """Coerce numbers and source strings to nodes."""
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return parse(x)
    if isinstance(x, (int, float)):
        v = float(x)
        if not math.isfinite(v):
            raise ValueError(f"non-finite literal {x!r}")
        return Neg(Num(-v)) if v < 0 else Num(v)
    raise TypeError(f"cannot make an expression from {type(x).__name__}")


def call(func: str, *args: ExprLike) -> Expr:
    if func not in FUNCTIONS:
        raise ValueError(f"unknown function {func!r}")
    if len(args) not in FUNCTIONS[func]:
        raise ValueError(f"{func} takes {FUNCTIONS[func][0]} argument(s)")
    return Call(func, tuple(as_expr(a) for a in args))


# ---------------------------------------------------------------------------
# tokenizer / parser

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


class _Tok:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind, self.text, self.pos = kind, text, pos


def _tokenize(src: str, offset: Callable[[int], int]) -> list:
    toks = []
    i, n = 0, len(src)
    while i < n:
        m = _TOKEN.match(src, i)
        if m is None or m.end() == i:
            j = i
            while j < n and src[j].isspace():
                j += 1
            if j == n:
                break
            raise UnexpectedToken(f"unexpected character {src[j]!r}", offset(j))
        kind = m.lastgroup
        if kind is None:  # trailing whitespace
            break
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        i = m.end()
    toks.append(_Tok("end", "", len(src)))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src, self.offset)
        self.i = 0
        self.open_parens = []

    def offset(self, char_index: int) -> int:
        return len(self.src[:char_index].encode("utf-8"))

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, tok: _Tok, what: str = None):
        if tok.kind == "end":
            if self.open_parens:
                raise UnbalancedParen("unclosed '('", self.offset(self.open_parens[-1]))
            raise UnexpectedToken(what or "unexpected end of input", self.offset(tok.pos))
        if tok.text == ")" and not self.open_parens:
            raise UnbalancedParen("unmatched ')'", self.offset(tok.pos))
        raise UnexpectedToken(what or f"unexpected token {tok.text!r}", self.offset(tok.pos))

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            self.fail(self.tok)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.advance().text
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.advance().text
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def expect_close(self):
        if self.tok.kind == "op" and self.tok.text == ")":
            self.advance()
            self.open_parens.pop()
            return
        if self.tok.kind == "end":
            raise UnbalancedParen("unclosed '('", self.offset(self.open_parens[-1]))
        self.fail(self.tok, f"expected ')' but found {self.tok.text!r}")

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text))
        if t.kind == "ident":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                if t.text not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {t.text!r}", self.offset(t.pos))
                self.open_parens.append(self.advance().pos)
                args = [self.expr()]
                while self.tok.kind == "op" and self.tok.text == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect_close()
                if len(args) not in FUNCTIONS[t.text]:
                    raise UnexpectedToken(
                        f"{t.text} takes {FUNCTIONS[t.text][0]} argument(s), got {len(args)}",
                        self.offset(t.pos),
                    )
                return Call(t.text, tuple(args))
            if t.text in CONSTANTS:
                return Const(t.text)
            return Var(t.text)
        if t.kind == "op" and t.text == "(":
            self.open_parens.append(self.advance().pos)
            e = self.expr()
            self.expect_close()
            return e
        self.fail(t)


def parse(src: str) -> Expr:
    """Parse source text into an expression tree.

    Raises :class:`UnknownFunction`, :class:`UnbalancedParen` or
    :class:`UnexpectedToken`, each carrying the byte offset of the problem.
    """
    return _Parser(src).parse()


# ---------------------------------------------------------------------------
# printer

_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _fmt_num(v: float) -> str:
    if v < 0 or (v == 0 and math.copysign(1.0, v) < 0):
        return f"({v!r})"
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_source(e: Expr) -> str:
    """Print ``e`` with the minimal parentheses needed to re-parse it identically."""
    out = {}

    def go(node):
        key = id(node)
        if key in out:
            return out[key]
        if isinstance(node, Num):
            r = (_fmt_num(node.value), _PREC_ATOM)
        elif isinstance(node, (Var, Const)):
            r = (node.name, _PREC_ATOM)
        elif isinstance(node, Call):
            r = (f"{node.func}({', '.join(go(a)[0] for a in node.args)})", _PREC_ATOM)
        elif isinstance(node, Neg):
            r = ("-" + wrap(node.operand, _PREC_UNARY), _PREC_UNARY)
        elif isinstance(node, BinOp):
            if node.op in "+-":
                r = (f"{wrap(node.left, _PREC_ADD)} {node.op} {wrap(node.right, _PREC_MUL)}", _PREC_ADD)
            elif node.op in "*/":
                r = (f"{wrap(node.left, _PREC_MUL)}{node.op}{wrap(node.right, _PREC_UNARY)}", _PREC_MUL)
            else:
                r = (f"{wrap(node.left, _PREC_ATOM)}^{wrap(node.right, _PREC_UNARY)}", _PREC_POW)
        else:
            raise TypeError(type(node))
        out[key] = r
        return r

    def wrap(node, prec):
        text, p = go(node)
        return text if p >= prec else f"({text})"

    return go(e)[0]


# ---------------------------------------------------------------------------
# structural utilities

def children(e: Expr) -> tuple:
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, Neg):
        return (e.operand,)
    if isinstance(e, Call):
        return e.args
    return ()


def free_vars(e: Expr) -> frozenset:
    memo = {}

    def go(node):
        key = id(node)
        if key not in memo:
            if isinstance(node, Var):
                memo[key] = frozenset((node.name,))
            else:
                s = frozenset()
                for c in children(node):
                    s |= go(c)
                memo[key] = s
        return memo[key]

    return go(e)


def node_count(e: Expr) -> int:
    """Number of distinct nodes (shared subtrees counted once)."""
    seen = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.extend(children(node))
    return len(seen)


def substitute(e: Expr, mapping: Mapping[str, ExprLike]) -> Expr:
    """Replace variables by expressions; shared subtrees stay shared."""
    repl = {k: as_expr(v) for k, v in mapping.items()}
    memo = {}

    def go(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Var):
            r = repl.get(node.name, node)
        elif isinstance(node, BinOp):
            l, rr = go(node.left), go(node.right)
            r = node if (l is node.left and rr is node.right) else BinOp(node.op, l, rr)
        elif isinstance(node, Neg):
            o = go(node.operand)
            r = node if o is node.operand else Neg(o)
        elif isinstance(node, Call):
            args = tuple(go(a) for a in node.args)
            r = node if all(a is b for a, b in zip(args, node.args)) else Call(node.func, args)
        else:
            r = node
        memo[key] = r
        return r

    return go(e)


_ONE, _TWO, _HALF = Num(1.0), Num(2.0), Num(0.5)


def _mul(a, b):
    if a is None or b is None:
        return None
    if a == _ONE:
        return b
    if b == _ONE:
        return a
    return BinOp("*", a, b)


def _add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return BinOp("+", a, b)


def _sub(a, b):
    if b is None:
        return a
    if a is None:
        return Neg(b)
    return BinOp("-", a, b)


def differentiate(e: Expr, var: str) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to ``var``.

    Identically-zero branches are pruned, nothing else is simplified. Used
    where third derivatives of map components are needed (dilation Hessians).
    """
    memo = {}

    def d(node):
        key = id(node)
        if key in memo:
            return memo[key]
        r = _d(node)
        memo[key] = r
        return r

    def _d(node):
        if isinstance(node, (Num, Const)):
            return None
        if isinstance(node, Var):
            return _ONE if node.name == var else None
        if isinstance(node, Neg):
            da = d(node.operand)
            return None if da is None else Neg(da)
        if isinstance(node, BinOp):
            a, b = node.left, node.right
            da, db = d(a), d(b)
            if node.op == "+":
                return _add(da, db)
            if node.op == "-":
                return _sub(da, db)
            if node.op == "*":
                return _add(_mul(da, b), _mul(a, db))
            if node.op == "/":
                if db is None:
                    return None if da is None else BinOp("/", da, b)
                return BinOp("/", _sub(_mul(da, b), _mul(a, db)), BinOp("^", b, _TWO))
            return _dpow(a, b, da, db)
        if isinstance(node, Call):
            return _dcall(node, [d(x) for x in node.args])
        raise TypeError(type(node))

    def _dpow(a, b, da, db):
        if db is None:
            if da is None:
                return None
            if isinstance(b, Num):
                expo = Num(b.value - 1.0) if b.value >= 1.0 else Neg(Num(1.0 - b.value))
            else:
                expo = BinOp("-", b, _ONE)
            return _mul(BinOp("*", b, BinOp("^", a, expo)), da)
        # a^b * (b' log a + b a'/a)
        inner = _add(_mul(db, Call("log", (a,))), None if da is None else BinOp("/", BinOp("*", b, da), a))
        return BinOp("*", BinOp("^", a, b), inner)

    def _dcall(node, ds):
        f, args = node.func, node.args
        a = args[0]
        da = ds[0]
        if f in ("pow",):
            return _dpow(args[0], args[1], ds[0], ds[1])
        if f == "atan2":
            y, x = args
            dy, dx = ds
            if dy is None and dx is None:
                return None
            num = _sub(_mul(x, dy), _mul(y, dx))
            return BinOp("/", num, BinOp("+", BinOp("^", x, _TWO), BinOp("^", y, _TWO)))
        if f in ("min", "max"):
            x, y = args
            dx, dy = ds
            if dx is None and dy is None:
                return None
            diff = BinOp("-", x, y)
            sgn = BinOp("/", diff, Call("abs", (diff,)))
            half_sum = _mul(_HALF, _add(dx, dy))
            half_dif = _mul(_HALF, _mul(sgn, _sub(dx, dy)))
            return _sub(half_sum, half_dif) if f == "min" else _add(half_sum, half_dif)
        if da is None:
            return None
        if f == "sin":
            return _mul(Call("cos", (a,)), da)
        if f == "cos":
            return _mul(Neg(Call("sin", (a,))), da)
        if f == "tan":
            return BinOp("/", da, BinOp("^", Call("cos", (a,)), _TWO))
        if f == "exp":
            return _mul(node, da)
        if f == "log":
            return BinOp("/", da, a)
        if f == "sqrt":
            return BinOp("/", da, BinOp("*", _TWO, node))
        if f == "abs":
            return _mul(BinOp("/", a, node), da)
        if f == "tanh":
            return _mul(BinOp("-", _ONE, BinOp("^", node, _TWO)), da)
        raise ValueError(f"no derivative rule for {f}")

    r = d(e)
    return Num(0.0) if r is None else r


def is_polynomial(e: Expr) -> bool:
    """True if ``e`` uses only + - *, numbers, variables, division by nonzero
    constants and non-negative integer powers."""
    if isinstance(e, (Num, Var)):
        return True
    if isinstance(e, Neg):
        return is_polynomial(e.operand)
    if isinstance(e, BinOp):
        if e.op in "+-*":
            return is_polynomial(e.left) and is_polynomial(e.right)
        if e.op == "/":
            return isinstance(e.right, Num) and e.right.value != 0 and is_polynomial(e.left)
        if e.op == "^":
            return (
                isinstance(e.right, Num)
                and e.right.value >= 0
                and float(e.right.value).is_integer()
                and is_polynomial(e.left)
            )
    return False
