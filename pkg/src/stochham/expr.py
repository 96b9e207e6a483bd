"""Arithmetic expression DSL used to write field components and Hamiltonians.

Grammar (EBNF)::

    expr   = term , { ("+" | "-") , term } ;
    term   = unary , { ("*" | "/") , unary } ;
    unary  = "-" , unary | power ;
    power  = atom , [ "^" , unary ] ;
    atom   = number | name | func , "(" , expr , ")" | "(" , expr , ")" ;
    func   = "sin" | "cos" | "exp" | "log" | "sqrt" | "tanh" ;
    number = digits , [ "." , digits ] , [ ("e" | "E") , [ "+" | "-" ] , digits ] ;

``^`` binds tighter than unary minus, so ``-p^2`` is ``-(p^2)``; ``^`` is
right-associative and the binary ``* / + -`` are left-associative.
:func:`to_source` emits the same grammar.

Evaluation works on floats or on numpy arrays (one entry per point); all
arithmetic is IEEE double.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")

Number = Union[float, np.ndarray]


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    """Raised for malformed source text; ``offset`` is a 0-based byte offset."""

    def __init__(self, message: str, offset: int, expected: str | None = None):
        self.offset = offset
        self.expected = expected
        text = f"{message} at offset {offset}"
        if expected:
            text += f", expected {expected}"
        super().__init__(text)


class DomainError(ExprError):
    """Evaluation left the domain of an operation (log(0), 1/0, ...)."""

    def __init__(self, message: str, node: "Expr", points=None):
        self.node = node
        self.points = points
        super().__init__(f"{message} in '{to_source(node)}'")


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Param, Neg, BinOp, Call]


def symbols(e: Expr) -> set[str]:
    """Names of all Var and Param references in ``e``."""
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, (Var, Param)):
            out.add(node.name)
        elif isinstance(node, (Neg, Call)):
            stack.append(node.arg)
        elif isinstance(node, BinOp):
            stack.extend((node.left, node.right))
    return out


def bind_params(e: Expr, params) -> Expr:
    """Turn Var nodes whose name is in ``params`` into Param nodes."""
    params = set(params)

    def walk(node):
        if isinstance(node, Var):
            return Param(node.name) if node.name in params else node
        if isinstance(node, Neg):
            return Neg(walk(node.arg))
        if isinstance(node, Call):
            return Call(node.func, walk(node.arg))
        if isinstance(node, BinOp):
            return BinOp(node.op, walk(node.left), walk(node.right))
        return node

    return walk(e)


def rename(e: Expr, mapping: Mapping[str, str]) -> Expr:
    """Rename Var nodes according to ``mapping``."""

    def walk(node):
        if isinstance(node, Var):
            return Var(mapping.get(node.name, node.name))
        if isinstance(node, Neg):
            return Neg(walk(node.arg))
        if isinstance(node, Call):
            return Call(node.func, walk(node.arg))
        if isinstance(node, BinOp):
            return BinOp(node.op, walk(node.left), walk(node.right))
        return node

    return walk(e)


# --------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", _offset(source, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), _offset(source, pos)))
        pos = m.end()
    tokens.append(("eof", "", _offset(source, len(source))))
    return tokens


def _offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, value, off = self.peek()
        if value != text or kind == "eof":
            found = "end of input" if kind == "eof" else repr(value)
            raise ExprSyntaxError(f"unexpected {found}", off, repr(text).replace("'", '"'))
        return self.take()

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, value, off = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if value not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {value!r}", off)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            if value in FUNCTIONS:
                raise ExprSyntaxError(f"function {value!r} needs an argument", off + len(value), '"("')
            return Var(value)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "eof" else repr(value)
        raise ExprSyntaxError(f"unexpected {found}", off, "number, name or \"(\"")


def parse(source: str) -> Expr:
    """Parse ``source`` into an AST. Names are parsed as :class:`Var`."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0, "expression")
    p = _Parser(source)
    node = p.expr()
    kind, value, off = p.peek()
    if kind != "eof":
        raise ExprSyntaxError(f"unexpected {value!r}", off, "operator or end of input")
    return node


# --------------------------------------------------------------------------
# Printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(e: Expr) -> int:
    # 1: additive, 2: multiplicative, 3: unary minus, 4: power, 5: atom
    if isinstance(e, BinOp):
        return 4 if e.op == "^" else _PREC[e.op]
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Num) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return 3
    return 5


def _num(v: float) -> str:
    if not math.isfinite(v):
        raise ExprError(f"cannot print non-finite literal {v}")
    if v < 0 or math.copysign(1.0, v) < 0:
        return "-" + _num(-v)
    if v.is_integer() and v < 1e15:
        return str(int(v))
    return repr(v)


def to_source(e: Expr) -> str:
    """Print ``e`` in the parser's grammar; ``parse(to_source(e))`` evaluates identically."""
    if isinstance(e, Num):
        return _num(e.value)
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    if isinstance(e, Neg):
        inner = to_source(e.arg)
        if _prec(e.arg) < 3:
            inner = f"({inner})"
        return "-" + inner
    left, right = to_source(e.left), to_source(e.right)
    if e.op == "^":
        if _prec(e.left) < 5:
            left = f"({left})"
        if _prec(e.right) < 3:
            right = f"({right})"
        return f"{left}^{right}"
    p = _PREC[e.op]
    if _prec(e.left) < p:
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left}{e.op}{right}"


# --------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class EvalEnv:
    variables: Mapping[str, Number] = field(default_factory=dict)
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        clash = set(self.variables) & set(self.params)
        if clash:
            raise ExprError(f"symbols bound as both variable and parameter: {sorted(clash)}")

    def lookup(self, name: str):
        if name in self.variables:
            return self.variables[name]
        if name in self.params:
            return self.params[name]
        raise ExprError(f"unbound symbol {name!r}")


def _bad(mask, node, message):
    if np.any(mask):
        idx = np.flatnonzero(np.atleast_1d(mask)) if np.ndim(mask) else None
        raise DomainError(message, node, idx)


def _finite(x, node, message="non-finite result"):
    ok = np.isfinite(x)
    if not np.all(ok):
        _bad(~ok, node, message)
    return x


def _is_integer(x) -> np.ndarray:
    return np.floor(x) == x


def _pow_value(a, b, node):
    _bad((a < 0) & ~_is_integer(b), node, "negative base with non-integer exponent")
    _bad((a == 0) & (b < 0), node, "division by zero")
    return _finite(np.power(a, b), node)


def _call_value(func, a, node):
    if func == "log":
        _bad(a <= 0, node, "log of non-positive argument")
        return np.log(a)
    if func == "sqrt":
        _bad(a < 0, node, "sqrt of negative argument")
        return np.sqrt(a)
    return _finite(getattr(np, func)(a), node)


def evaluate(e: Expr, env: EvalEnv) -> Number:
    """Evaluate ``e``; raises :class:`DomainError` naming the failing subexpression."""
    with np.errstate(all="ignore"):
        return _eval(e, env)


def _eval(e, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, (Var, Param)):
        return env.lookup(e.name)
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, Call):
        return _call_value(e.func, _eval(e.arg, env), e)
    a = _eval(e.left, env)
    b = _eval(e.right, env)
    op = e.op
    if op == "+":
        return _finite(a + b, e)
    if op == "-":
        return _finite(a - b, e)
    if op == "*":
        return _finite(a * b, e)
    if op == "/":
        _bad(b == 0, e, "division by zero")
        return _finite(a / b, e)
    return _pow_value(a, b, e)


@dataclass(frozen=True)
class DualValue:
    """Value plus directional derivative; arithmetic follows the chain rule exactly."""

    value: Number
    deriv: Number

    def __add__(self, other: "DualValue") -> "DualValue":
        return DualValue(self.value + other.value, self.deriv + other.deriv)

    def __sub__(self, other: "DualValue") -> "DualValue":
        return DualValue(self.value - other.value, self.deriv - other.deriv)

    def __mul__(self, other: "DualValue") -> "DualValue":
        return DualValue(self.value * other.value,
                         self.value * other.deriv + self.deriv * other.value)

    def __truediv__(self, other: "DualValue") -> "DualValue":
        v = self.value / other.value
        return DualValue(v, (self.deriv - v * other.deriv) / other.value)

    def __neg__(self) -> "DualValue":
        return DualValue(-self.value, -self.deriv)


def eval_dual(e: Expr, env: EvalEnv, seed) -> DualValue:
    """Evaluate ``e`` and its exact partial derivative with respect to ``seed``.

    ``seed`` is a variable name, or a mapping ``name -> tangent`` for a
    general directional derivative.
    """
    if isinstance(seed, str):
        if seed not in env.variables:
            raise ExprError(f"seed {seed!r} is not a bound variable")
        tangent = {seed: 1.0}
    else:
        tangent = dict(seed)
    with np.errstate(all="ignore"):
        return _dual(e, env, tangent)


def _dual(e, env, tangent) -> DualValue:
    if isinstance(e, Num):
        return DualValue(e.value, 0.0)
    if isinstance(e, Var):
        return DualValue(env.lookup(e.name), tangent.get(e.name, 0.0))
    if isinstance(e, Param):
        return DualValue(env.lookup(e.name), 0.0)
    if isinstance(e, Neg):
        return -_dual(e.arg, env, tangent)
    if isinstance(e, Call):
        return _dual_call(e, _dual(e.arg, env, tangent))
    a = _dual(e.left, env, tangent)
    b = _dual(e.right, env, tangent)
    op = e.op
    if op == "+":
        out = a + b
    elif op == "-":
        out = a - b
    elif op == "*":
        out = a * b
    elif op == "/":
        _bad(b.value == 0, e, "division by zero")
        out = a / b
    else:
        out = _dual_pow(a, b, e)
    _finite(out.value, e)
    _finite(out.deriv, e, "non-finite derivative")
    return out


def _dual_pow(a: DualValue, b: DualValue, node) -> DualValue:
    v = _pow_value(a.value, b.value, node)
    # d(a^b) = b a^(b-1) a' + a^b log(a) b'; terms with zero tangent are skipped
    # so that e.g. q^0.5 at q=0 only fails when q is actually being varied.
    if np.any(a.deriv != 0):
        live = np.asarray(a.deriv) != 0
        base = np.where(live, a.value, 1.0)
        da = np.where(live, b.value * _pow_value(base, b.value - 1, node) * a.deriv, 0.0)
    else:
        da = 0.0
    if np.any(b.deriv != 0):
        live = np.asarray(b.deriv) != 0
        _bad(live & (a.value <= 0), node, "non-positive base with variable exponent")
        db = np.where(live, v * np.log(np.where(live, a.value, 1.0)) * b.deriv, 0.0)
    else:
        db = 0.0
    return DualValue(v, da + db)


def _dual_call(node, a: DualValue) -> DualValue:
    f = node.func
    x = a.value
    if f == "sin":
        return DualValue(np.sin(x), np.cos(x) * a.deriv)
    if f == "cos":
        return DualValue(np.cos(x), -np.sin(x) * a.deriv)
    if f == "exp":
        v = _finite(np.exp(x), node)
        return DualValue(v, v * a.deriv)
    if f == "log":
        _bad(x <= 0, node, "log of non-positive argument")
        return DualValue(np.log(x), a.deriv / x)
    if f == "sqrt":
        _bad(x < 0, node, "sqrt of negative argument")
        _bad(x == 0, node, "sqrt is not differentiable at 0")
        v = np.sqrt(x)
        return DualValue(v, a.deriv / (2 * v))
    if f == "tanh":
        v = np.tanh(x)
        return DualValue(v, (1 - v * v) * a.deriv)
    raise ExprError(f"unknown function {f!r}")


# --------------------------------------------------------------------------
# Symbolic differentiation with light constant folding

ZERO = Num(0.0)
ONE = Num(1.0)


def _is(e, v):
    return isinstance(e, Num) and e.value == v


def _fold(op, a, b):
    try:
        with np.errstate(all="raise"):
            v = float(_eval(BinOp(op, a, b), EvalEnv()))
    except (FloatingPointError, DomainError, OverflowError):
        return None
    return Num(v) if math.isfinite(v) else None


def add(a, b):
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold("+", a, b) or BinOp("+", a, b)
    return BinOp("+", a, b)


def sub(a, b):
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold("-", a, b) or BinOp("-", a, b)
    return BinOp("-", a, b)


def mul(a, b):
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold("*", a, b) or BinOp("*", a, b)
    return BinOp("*", a, b)


def div(a, b):
    if _is(b, 1):
        return a
    if _is(a, 0) and not _is(b, 0):
        return ZERO
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold("/", a, b) or BinOp("/", a, b)
    return BinOp("/", a, b)


def power(a, b):
    if _is(b, 1):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold("^", a, b) or BinOp("^", a, b)
    return BinOp("^", a, b)


def neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def differentiate(e: Expr, var: str) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to variable ``var``."""
    if isinstance(e, Num) or isinstance(e, Param):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, var))
    if isinstance(e, Call):
        a = e.arg
        da = differentiate(a, var)
        if _is(da, 0):
            return ZERO
        f = e.func
        if f == "sin":
            outer = Call("cos", a)
        elif f == "cos":
            outer = neg(Call("sin", a))
        elif f == "exp":
            outer = e
        elif f == "log":
            return div(da, a)
        elif f == "sqrt":
            return div(da, mul(Num(2.0), e))
        else:
            outer = sub(ONE, power(e, Num(2.0)))
        return mul(outer, da)
    a, b = e.left, e.right
    da, db = differentiate(a, var), differentiate(b, var)
    op = e.op
    if op == "+":
        return add(da, db)
    if op == "-":
        return sub(da, db)
    if op == "*":
        return add(mul(da, b), mul(a, db))
    if op == "/":
        return sub(div(da, b), div(mul(a, db), mul(b, b)))
    # power
    if var not in symbols(b):
        if _is(da, 0):
            return ZERO
        return mul(mul(b, power(a, sub(b, ONE))), da)
    term = mul(db, Call("log", a))
    if not _is(da, 0):
        term = add(term, div(mul(b, da), a))
    return mul(e, term)
