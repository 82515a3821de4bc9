"""Radial expression language: parsing, printing and order-2 forward-mode
evaluation of smooth functions of the radial variable ``r > 0``.

Expressions are built from numeric literals, the variable ``r``, the unary
functions sin, cos, sinh, cosh, tanh, coth, exp, log, sqrt, abs and the
binary operators ``+ - * / ^`` (``^`` right-associative).  Evaluation
propagates (value, first, second derivative) triplets exactly through the
chain and product rules, so warping functions and bound functions never go
through finite differencing.

Out-of-domain evaluation (log of a non-positive value, division by zero,
the pole of coth, ...) raises :class:`~radialcap.errors.DomainError`; a NaN
is never returned silently.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, ParseError, UnknownIdentifierError

__all__ = [
    "RadialExpr",
    "Jet2",
    "parse",
    "eval_jet2",
    "FUNCTIONS",
]

FUNCTIONS = ("sin", "cos", "sinh", "cosh", "tanh", "coth", "exp", "log", "sqrt", "abs")


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    pass


@dataclass(frozen=True)
class Num(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    pass


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class Call(Node):
    name: str
    arg: Node


@dataclass(frozen=True)
class BinOp(Node):
    op: str  # one of + - * / ^
    lhs: Node
    rhs: Node


@dataclass(frozen=True)
class RadialExpr:
    """Immutable parsed expression of the radial variable.

    ``str()`` yields a canonical form whose re-parse is structurally
    identical to the original tree.  Safe for unrestricted concurrent use.
    """

    root: Node

    def __str__(self) -> str:
        return _format(self.root, 0)

    def __call__(self, r):
        """Evaluate the value only (scalar or ndarray ``r > 0``)."""
        return evaluate(self, r)

    def jet(self, r) -> "Jet2":
        return eval_jet2(self, r)


@dataclass(frozen=True)
class Jet2:
    """Second-order jet: function value with first and second derivative.

    Components are floats for scalar evaluation points or ndarrays for
    vectorized evaluation.
    """

    value: Union[float, np.ndarray]
    d1: Union[float, np.ndarray]
    d2: Union[float, np.ndarray]


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()−×÷]))"
)

_OP_ALIASES = {"−": "-", "×": "*", "÷": "/"}


def _tokenize(text: str):
    tokens = []  # (kind, value, position)
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            # skip leading spaces manually to report a clean position
            stripped = pos
            while stripped < n and text[stripped].isspace():
                stripped += 1
            if stripped >= n:
                break
            raise ParseError(f"unexpected character {text[stripped]!r}", stripped)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            op = _OP_ALIASES.get(m.group("op"), m.group("op"))
            tokens.append(("op", op, m.start("op")))
        pos = m.end()
    tokens.append(("eof", "", n))
    return tokens


class _Parser:
    """Recursive descent over the grammar:

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := unary ("^" factor)?
    unary  := ("-")? atom
    atom   := number | "r" | ident "(" expr ")" | "(" expr ")"
    """

    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, value, pos = self.peek()
        if kind == "op" and value == op:
            return self.advance()
        raise ParseError(f"got {value!r}" if kind != "eof" else "unexpected end of input",
                         pos, expected=(repr(op),))

    def parse(self) -> Node:
        node = self.expr()
        kind, value, pos = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected trailing input {value!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                node = BinOp(value, node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                node = BinOp(value, node, self.factor())
            else:
                return node

    def factor(self) -> Node:
        node = self.unary()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            node = BinOp("^", node, self.factor())  # right-associative
        return node

    def unary(self) -> Node:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Neg(self.atom())
        return self.atom()

    def atom(self) -> Node:
        kind, value, pos = self.advance()
        if kind == "num":
            return Num(float(value))
        if kind == "ident":
            if value == "r":
                return Var()
            if value in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(value, arg)
            raise UnknownIdentifierError(value, pos)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"got {value!r}" if kind != "eof" else "unexpected end of input",
                         pos, expected=("number", "'r'", "function", "'('"))


def parse(text: str) -> RadialExpr:
    """Parse expression text into a :class:`RadialExpr`.

    Raises :class:`~radialcap.errors.ParseError` (with position and expected
    set) or :class:`~radialcap.errors.UnknownIdentifierError`.
    """
    if not isinstance(text, str):
        raise TypeError("expression text must be a string")
    return RadialExpr(_Parser(text).parse())


# ---------------------------------------------------------------------------
# Canonical printing
# ---------------------------------------------------------------------------

# Precedence levels used for minimal parenthesization.  The slot a node is
# printed into carries a minimum level; anything below it gets parentheses.
_LEVEL = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _num_str(v: float) -> str:
    if math.isfinite(v) and v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _format(node: Node, min_level: int) -> str:
    if isinstance(node, Num):
        s, level = _num_str(node.value), 4
    elif isinstance(node, Var):
        s, level = "r", 4
    elif isinstance(node, Call):
        s, level = f"{node.name}({_format(node.arg, 0)})", 4
    elif isinstance(node, Neg):
        s, level = "-" + _format(node.arg, 4), 3
    elif isinstance(node, BinOp):
        op = node.op
        level = _LEVEL[op]
        if op in "+-":
            s = f"{_format(node.lhs, 1)} {op} {_format(node.rhs, 2)}"
        elif op in "*/":
            s = f"{_format(node.lhs, 2)}{op}{_format(node.rhs, 3)}"
        else:  # ^ binds its base one level tighter, exponent at own level
            s = f"{_format(node.lhs, 4)}^{_format(node.rhs, 3)}"
    else:  # pragma: no cover
        raise TypeError(f"unknown node {node!r}")
    return f"({s})" if level < min_level else s


# ---------------------------------------------------------------------------
# Jet arithmetic
# ---------------------------------------------------------------------------

def _first_bad(mask, r):
    """Return the evaluation point of the first True entry in mask."""
    mask = np.asarray(mask)
    if mask.ndim == 0:
        return r if np.ndim(r) == 0 else float(np.asarray(r).flat[0])
    idx = int(np.argmax(mask))
    return float(np.asarray(r + np.zeros_like(mask, dtype=float)).flat[idx])


def _check(bad, r, detail):
    if np.any(bad):
        raise DomainError(detail, _first_bad(bad, r))


def _jadd(a: Jet2, b: Jet2) -> Jet2:
    return Jet2(a.value + b.value, a.d1 + b.d1, a.d2 + b.d2)


def _jsub(a: Jet2, b: Jet2) -> Jet2:
    return Jet2(a.value - b.value, a.d1 - b.d1, a.d2 - b.d2)


def _jneg(a: Jet2) -> Jet2:
    return Jet2(-a.value, -a.d1, -a.d2)


def _jmul(a: Jet2, b: Jet2) -> Jet2:
    return Jet2(a.value * b.value,
                a.d1 * b.value + a.value * b.d1,
                a.d2 * b.value + 2.0 * a.d1 * b.d1 + a.value * b.d2)


def _jdiv(a: Jet2, b: Jet2, r) -> Jet2:
    _check(b.value == 0, r, "division by zero")
    w = a.value / b.value
    w1 = (a.d1 - w * b.d1) / b.value
    w2 = (a.d2 - 2.0 * w1 * b.d1 - w * b.d2) / b.value
    return Jet2(w, w1, w2)


def _chain(u: Jet2, f, fp, fpp) -> Jet2:
    """Jet of f(u) given f, f' and f'' evaluated at u.value."""
    return Jet2(f, fp * u.d1, fpp * u.d1 * u.d1 + fp * u.d2)


def _jexp(u: Jet2) -> Jet2:
    e = np.exp(u.value)
    return _chain(u, e, e, e)


def _jlog(u: Jet2, r) -> Jet2:
    _check(u.value <= 0, r, "log of non-positive value")
    inv = 1.0 / u.value
    return _chain(u, np.log(u.value), inv, -inv * inv)


def _jsqrt(u: Jet2, r) -> Jet2:
    _check(u.value <= 0, r, "sqrt of non-positive value (derivative pole at 0)")
    s = np.sqrt(u.value)
    fp = 0.5 / s
    return _chain(u, s, fp, -0.5 * fp / u.value)


def _jabs(u: Jet2, r) -> Jet2:
    _check(u.value == 0, r, "abs is not differentiable at 0")
    s = np.sign(u.value)
    return Jet2(np.abs(u.value), s * u.d1, s * u.d2)


def _jpow(base: Jet2, expo: Jet2, r) -> Jet2:
    expo_const = np.all(np.asarray(expo.d1) == 0) and np.all(np.asarray(expo.d2) == 0)
    if not expo_const:
        # u^v = exp(v log u); requires a positive base
        _check(base.value <= 0, r, "power with varying exponent needs positive base")
        return _jexp(_jmul(expo, _jlog(base, r)))

    a = expo.value
    if np.ndim(a) != 0:
        a = float(np.asarray(a).flat[0])
    if a == 0.0:
        one = np.ones_like(np.asarray(base.value, dtype=float))
        if np.ndim(base.value) == 0:
            return Jet2(1.0, 0.0, 0.0)
        return Jet2(one, 0.0 * one, 0.0 * one)
    if a == 1.0:
        return base
    integral = float(a).is_integer()
    if not integral:
        _check(np.asarray(base.value) < 0, r, "fractional power of negative value")
        if a < 2.0:
            _check(np.asarray(base.value) == 0, r,
                   "fractional power at 0 has singular derivatives")

    u, u1, u2 = base.value, base.d1, base.d2
    if integral and a >= 2.0:
        # exact at u == 0 as well: u^(a-2) with a == 2 gives u^0 == 1
        v = np.power(u, a)
        vm1 = np.power(u, a - 1.0)
        vm2 = np.power(u, a - 2.0)
    else:
        _check(np.asarray(u) == 0, r, "power at 0 with exponent below 2")
        v = np.power(u, a)
        vm1 = v / u
        vm2 = vm1 / u
    return Jet2(v, a * vm1 * u1, a * (a - 1.0) * vm2 * u1 * u1 + a * vm1 * u2)


def _jet_call(name: str, u: Jet2, r) -> Jet2:
    if name == "sin":
        s, c = np.sin(u.value), np.cos(u.value)
        return _chain(u, s, c, -s)
    if name == "cos":
        s, c = np.sin(u.value), np.cos(u.value)
        return _chain(u, c, -s, -c)
    if name == "sinh":
        s, c = np.sinh(u.value), np.cosh(u.value)
        return _chain(u, s, c, s)
    if name == "cosh":
        s, c = np.sinh(u.value), np.cosh(u.value)
        return _chain(u, c, s, c)
    if name == "tanh":
        t = np.tanh(u.value)
        sech2 = 1.0 - t * t
        return _chain(u, t, sech2, -2.0 * t * sech2)
    if name == "coth":
        _check(np.sinh(u.value) == 0, r, "pole of coth")
        s, c = np.sinh(u.value), np.cosh(u.value)
        return _jdiv(_chain(u, c, s, c), _chain(u, s, c, s), r)
    if name == "exp":
        return _jexp(u)
    if name == "log":
        return _jlog(u, r)
    if name == "sqrt":
        return _jsqrt(u, r)
    if name == "abs":
        return _jabs(u, r)
    raise DomainError(f"unknown function {name}")  # pragma: no cover


def _jet_eval(node: Node, rj: Jet2, r) -> Jet2:
    if isinstance(node, Num):
        return Jet2(node.value, 0.0, 0.0)
    if isinstance(node, Var):
        return rj
    if isinstance(node, Neg):
        return _jneg(_jet_eval(node.arg, rj, r))
    if isinstance(node, Call):
        return _jet_call(node.name, _jet_eval(node.arg, rj, r), r)
    op = node.op
    a = _jet_eval(node.lhs, rj, r)
    b = _jet_eval(node.rhs, rj, r)
    if op == "+":
        return _jadd(a, b)
    if op == "-":
        return _jsub(a, b)
    if op == "*":
        return _jmul(a, b)
    if op == "/":
        return _jdiv(a, b, r)
    return _jpow(a, b, r)


def eval_jet2(expr: RadialExpr, r) -> Jet2:
    """Evaluate ``expr`` with exact first and second derivatives at ``r``.

    ``r`` may be a positive scalar or an ndarray of positive reals; jet
    components mirror the input shape.  Raises
    :class:`~radialcap.errors.DomainError` on out-of-domain points (the
    error reports the first offending point), never a silent NaN.
    """
    scalar = np.ndim(r) == 0
    rv = float(r) if scalar else np.asarray(r, dtype=float)
    if np.any(np.asarray(rv) <= 0):
        raise DomainError("radial variable must be positive", _first_bad(np.asarray(rv) <= 0, rv))
    if scalar:
        rj = Jet2(rv, 1.0, 0.0)
    else:
        rj = Jet2(rv, np.ones_like(rv), np.zeros_like(rv))
    with np.errstate(all="ignore"):
        out = _jet_eval(expr.root, rj, rv)
        # overflow to +/-inf is tolerated (callers rely on it for growth
        # detection); NaN is always a reported domain failure
        bad = np.isnan(out.value) | np.isnan(out.d1) | np.isnan(out.d2)
        _check(bad, rv, "evaluation produced NaN")
    if scalar:
        return Jet2(float(out.value), float(out.d1), float(out.d2))
    shape = np.shape(rv)
    return Jet2(np.broadcast_to(np.asarray(out.value, dtype=float), shape).copy(),
                np.broadcast_to(np.asarray(out.d1, dtype=float), shape).copy(),
                np.broadcast_to(np.asarray(out.d2, dtype=float), shape).copy())


_VALUE_FNS = {
    "sin": np.sin, "cos": np.cos, "sinh": np.sinh, "cosh": np.cosh,
    "tanh": np.tanh, "exp": np.exp,
}


def _value_eval(node: Node, r):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return r
    if isinstance(node, Neg):
        return -_value_eval(node.arg, r)
    if isinstance(node, Call):
        u = _value_eval(node.arg, r)
        fn = _VALUE_FNS.get(node.name)
        if fn is not None:
            return fn(u)
        if node.name == "coth":
            s = np.sinh(u)
            _check(s == 0, r, "pole of coth")
            return np.cosh(u) / s
        if node.name == "log":
            _check(np.asarray(u) <= 0, r, "log of non-positive value")
            return np.log(u)
        if node.name == "sqrt":
            _check(np.asarray(u) < 0, r, "sqrt of negative value")
            return np.sqrt(u)
        return np.abs(u)  # abs
    a = _value_eval(node.lhs, r)
    op = node.op
    if op == "+":
        return a + _value_eval(node.rhs, r)
    if op == "-":
        return a - _value_eval(node.rhs, r)
    if op == "*":
        return a * _value_eval(node.rhs, r)
    if op == "/":
        b = _value_eval(node.rhs, r)
        _check(np.asarray(b) == 0, r, "division by zero")
        return a / b
    b = _value_eval(node.rhs, r)
    b_arr = np.asarray(b)
    integral = np.all(b_arr == np.floor(b_arr))
    if not integral:
        _check(np.asarray(a) < 0, r, "fractional power of negative value")
    with np.errstate(all="ignore"):
        out = np.power(a, b)
    _check(np.isnan(out), r, "power out of domain")
    return out


def evaluate(expr: RadialExpr, r):
    """Value-only evaluation.

    Same domain rules as :func:`eval_jet2` except derivative-only poles
    (``sqrt`` and ``abs`` at 0 have well-defined values), and no derivative
    work, so values near float overflow stay inf instead of turning into
    NaN through ``inf * 0`` derivative terms.
    """
    scalar = np.ndim(r) == 0
    rv = float(r) if scalar else np.asarray(r, dtype=float)
    if np.any(np.asarray(rv) <= 0):
        raise DomainError("radial variable must be positive",
                          _first_bad(np.asarray(rv) <= 0, rv))
    with np.errstate(all="ignore"):
        out = _value_eval(expr.root, rv)
        _check(np.isnan(out), rv, "evaluation produced NaN")
    if scalar:
        return float(out)
    return np.broadcast_to(np.asarray(out, dtype=float), np.shape(rv)).copy()


# ---------------------------------------------------------------------------
# Code generation (value and first derivative) for jit-compiled hot loops
# ---------------------------------------------------------------------------

_MATH_FNS = {
    "sin": "math.sin", "cos": "math.cos", "sinh": "math.sinh",
    "cosh": "math.cosh", "tanh": "math.tanh", "exp": "math.exp",
    "log": "math.log", "sqrt": "math.sqrt", "abs": "abs",
}


class _CodeGen:
    def __init__(self):
        self.lines = []
        self.n = 0

    def tmp(self, src):
        name = f"t{self.n}"
        self.n += 1
        self.lines.append(f"    {name} = {src}")
        return name

    def emit(self, node: Node):
        """Return (value_name, d1_name) source names for node."""
        if isinstance(node, Num):
            return self.tmp(repr(node.value)), "0.0"
        if isinstance(node, Var):
            return "r", "1.0"
        if isinstance(node, Neg):
            v, d = self.emit(node.arg)
            return self.tmp(f"-{v}"), self.tmp(f"-({d})")
        if isinstance(node, Call):
            v, d = self.emit(node.arg)
            if node.name == "coth":
                s = self.tmp(f"math.sinh({v})")
                c = self.tmp(f"math.cosh({v})")
                val = self.tmp(f"{c}/{s}")
                return val, self.tmp(f"(1.0 - {val}*{val})*({d})")
            if node.name == "tanh":
                val = self.tmp(f"math.tanh({v})")
                return val, self.tmp(f"(1.0 - {val}*{val})*({d})")
            fn = _MATH_FNS[node.name]
            val = self.tmp(f"{fn}({v})")
            deriv = {
                "sin": f"math.cos({v})",
                "cos": f"-math.sin({v})",
                "sinh": f"math.cosh({v})",
                "cosh": f"math.sinh({v})",
                "exp": val,
                "log": f"1.0/({v})",
                "sqrt": f"0.5/({val})",
                "abs": f"(1.0 if {v} >= 0 else -1.0)",
            }[node.name]
            return val, self.tmp(f"({deriv})*({d})")
        av, ad = self.emit(node.lhs)
        bv, bd = self.emit(node.rhs)
        op = node.op
        if op == "+":
            return self.tmp(f"{av} + {bv}"), self.tmp(f"({ad}) + ({bd})")
        if op == "-":
            return self.tmp(f"{av} - {bv}"), self.tmp(f"({ad}) - ({bd})")
        if op == "*":
            return (self.tmp(f"{av}*{bv}"),
                    self.tmp(f"({ad})*{bv} + {av}*({bd})"))
        if op == "/":
            val = self.tmp(f"{av}/{bv}")
            return val, self.tmp(f"(({ad}) - {val}*({bd}))/{bv}")
        # power: constant integer exponents stay polynomial, rest via exp/log
        if isinstance(node.rhs, Num) and float(node.rhs.value).is_integer():
            a = node.rhs.value
            val = self.tmp(f"{av}**{int(a)}")
            return val, self.tmp(f"{a!r}*({av}**{int(a) - 1})*({ad})")
        val = self.tmp(f"{av}**{bv}")
        return val, self.tmp(
            f"{val}*(({bd})*math.log({av}) + {bv}*({ad})/{av})")


def compile_value_d1(expr: RadialExpr):
    """Compile the expression to a plain ``f(r) -> (value, d1)`` function.

    The generated function uses only ``math`` calls and float arithmetic, so
    it can be jit-compiled by numba.  Domain checking is skipped; callers
    must stay inside the expression's domain.
    """
    gen = _CodeGen()
    v, d = gen.emit(expr.root)
    src = "def _generated(r):\n" + "\n".join(gen.lines) + f"\n    return {v}, {d}\n"
    namespace = {"math": math}
    exec(src, namespace)  # noqa: S102 - trusted, generated from our own AST
    fn = namespace["_generated"]
    fn.__radialcap_source__ = src
    return fn
