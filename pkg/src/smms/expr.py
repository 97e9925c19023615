"""Symbolic expressions for metric profiles and densities.

Small closed expression language used in config files and model
definitions.  Grammar (standard precedence, tightest first):

    power   ^        right-associative
    unary   -
    factor  * /      left-associative
    sum     + -      left-associative

plus parentheses and single-argument function application by name.
Known functions: sin, cos, tan, exp, log, sqrt, sinh, cosh, abs.
Identifiers that are not function names must belong to the declared
variable set, otherwise parsing fails.  ASTs are immutable, hashable
and safe to share across threads.

Derivatives are exact: `eval_expr` runs forward-mode rules on scalar
taylor triples, `diff` produces a new Expr so profile derivatives can
be compiled once and evaluated on arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expr", "Num", "Var", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Call",
    "ExprError", "ExprSyntaxError", "ExprDomainError",
    "parse_expr", "eval_expr", "diff", "pretty", "compile_expr",
    "free_variables", "DEFAULT_VARIABLES", "FUNCTIONS",
]

DEFAULT_VARIABLES = frozenset({"r", "rho", "x1", "x2", "x3"})

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "abs")


class ExprError(ValueError):
    """Base class for expression failures."""


class ExprSyntaxError(ExprError):
    """Malformed source text; carries the byte offset of the failure."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class ExprDomainError(ExprError):
    """Evaluation left the domain; names the offending subexpression."""


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


# ---------------------------------------------------------------------------
# Parser

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789")
_DIGITS = set("0123456789")


class _Parser:
    def __init__(self, source, variables):
        self.src = source
        self.pos = 0
        self.variables = variables

    def error(self, message, offset=None):
        raise ExprSyntaxError(message, self.pos if offset is None else offset)

    def skip_ws(self):
        while self.pos < len(self.src) and self.src[self.pos] in " \t\r\n":
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def parse(self):
        node = self.parse_sum()
        self.skip_ws()
        if self.pos != len(self.src):
            self.error(f"unexpected character {self.src[self.pos]!r}")
        return node

    def parse_sum(self):
        node = self.parse_term()
        while True:
            ch = self.peek()
            if ch == "+":
                self.pos += 1
                node = Add(node, self.parse_term())
            elif ch == "-":
                self.pos += 1
                node = Sub(node, self.parse_term())
            else:
                return node

    def parse_term(self):
        node = self.parse_unary()
        while True:
            ch = self.peek()
            if ch == "*":
                self.pos += 1
                node = Mul(node, self.parse_unary())
            elif ch == "/":
                self.pos += 1
                node = Div(node, self.parse_unary())
            else:
                return node

    def parse_unary(self):
        if self.peek() == "-":
            self.pos += 1
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self):
        node = self.parse_atom()
        if self.peek() == "^":
            self.pos += 1
            # exponent may itself carry a unary minus: a^-b
            return Pow(node, self.parse_unary())
        return node

    def parse_atom(self):
        ch = self.peek()
        if ch == "":
            self.error("unexpected end of expression")
        if ch == "(":
            self.pos += 1
            node = self.parse_sum()
            if self.peek() != ")":
                self.error("expected ')'")
            self.pos += 1
            return node
        if ch in _DIGITS or ch == ".":
            return self.parse_number()
        if ch in _IDENT_START:
            return self.parse_identifier()
        self.error(f"unexpected character {ch!r}")

    def parse_number(self):
        start = self.pos
        src = self.src
        while self.pos < len(src) and src[self.pos] in _DIGITS:
            self.pos += 1
        if self.pos < len(src) and src[self.pos] == ".":
            self.pos += 1
            while self.pos < len(src) and src[self.pos] in _DIGITS:
                self.pos += 1
        if self.pos < len(src) and src[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < len(src) and src[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(src) and src[self.pos] in _DIGITS:
                while self.pos < len(src) and src[self.pos] in _DIGITS:
                    self.pos += 1
            else:
                # bare 'e' belongs to a following identifier, not the number
                self.pos = mark
        text = src[start:self.pos]
        try:
            return Num(float(text))
        except ValueError:
            self.error(f"bad number {text!r}", start)

    def parse_identifier(self):
        start = self.pos
        src = self.src
        while self.pos < len(src) and src[self.pos] in _IDENT_CONT:
            self.pos += 1
        name = src[start:self.pos]
        if self.peek() == "(":
            if name not in FUNCTIONS:
                self.error(f"unknown function {name!r}", start)
            self.pos += 1
            arg = self.parse_sum()
            if self.peek() != ")":
                self.error("expected ')'")
            self.pos += 1
            return Call(name, arg)
        if name not in self.variables:
            self.error(f"unknown variable {name!r}", start)
        return Var(name)


def parse_expr(source, variables=DEFAULT_VARIABLES):
    """Parse `source` into an Expr.

    Parameters
    ----------
    source : str
        Expression text.
    variables : collection of str, optional
        Identifiers admitted as variables.  Anything else that is not a
        known function name is rejected at parse time.

    Raises
    ------
    ExprSyntaxError
        On malformed input, with the byte offset of the failure.
    """
    if not isinstance(source, str):
        raise ExprSyntaxError("expression source must be a string", 0)
    return _Parser(source, frozenset(variables)).parse()


# ---------------------------------------------------------------------------
# Evaluation with forward-mode derivatives

def _domain(node, what):
    raise ExprDomainError(f"{what} in subexpression '{pretty(node)}'")


def _pow_triple(node, a, b, order):
    """Forward-mode rule for base^exponent on taylor triples."""
    av, a1, a2 = a
    bv, b1, b2 = b
    if b1 == 0.0 and b2 == 0.0:
        # constant exponent: c*a^(c-1) chain, valid for negative bases
        c = bv
        try:
            v = math.pow(av, c)
        except (ValueError, OverflowError):
            _domain(node, f"{av!r}^{c!r} undefined")
        if av == 0.0 and c < 0.0:
            _domain(node, "zero raised to a negative power")
        d1 = d2 = 0.0
        if order >= 1 and c != 0.0:
            try:
                p1 = math.pow(av, c - 1.0)
            except ValueError:
                _domain(node, "singular derivative")
            d1 = c * p1 * a1
            if order >= 2:
                d2 = c * p1 * a2
                if c != 1.0 and a1 != 0.0:
                    try:
                        p2 = math.pow(av, c - 2.0)
                    except ValueError:
                        _domain(node, "singular second derivative")
                    d2 += c * (c - 1.0) * p2 * a1 * a1
        return v, d1, d2
    if av <= 0.0:
        _domain(node, "variable exponent needs a positive base")
    la = math.log(av)
    v = math.exp(bv * la)
    d1 = d2 = 0.0
    if order >= 1:
        u1 = b1 * la + bv * a1 / av
        d1 = v * u1
        if order >= 2:
            u2 = b2 * la + 2.0 * b1 * a1 / av + bv * (a2 / av - (a1 / av) ** 2)
            d2 = v * (u1 * u1 + u2)
    return v, d1, d2


# value, first derivative, second derivative of each function
_FN = {
    "sin": (math.sin, math.cos, lambda x: -math.sin(x)),
    "cos": (math.cos, lambda x: -math.sin(x), lambda x: -math.cos(x)),
    "tan": (math.tan, lambda x: 1.0 / math.cos(x) ** 2,
            lambda x: 2.0 * math.tan(x) / math.cos(x) ** 2),
    "exp": (math.exp, math.exp, math.exp),
    "sinh": (math.sinh, math.cosh, math.sinh),
    "cosh": (math.cosh, math.sinh, math.cosh),
}


def _call_triple(node, fn, a, order):
    av, a1, a2 = a
    if fn == "log":
        if av <= 0.0:
            _domain(node, "log of a non-positive value")
        v = math.log(av)
        d1 = a1 / av if order >= 1 else 0.0
        d2 = a2 / av - (a1 / av) ** 2 if order >= 2 else 0.0
        return v, d1, d2
    if fn == "sqrt":
        if av < 0.0:
            _domain(node, "sqrt of a negative value")
        v = math.sqrt(av)
        if order == 0:
            return v, 0.0, 0.0
        if av == 0.0:
            _domain(node, "derivative of sqrt singular at zero")
        d1 = a1 / (2.0 * v)
        d2 = a2 / (2.0 * v) - a1 * a1 / (4.0 * av * v) if order >= 2 else 0.0
        return v, d1, d2
    if fn == "abs":
        v = abs(av)
        if order == 0:
            return v, 0.0, 0.0
        if av == 0.0:
            _domain(node, "derivative of abs undefined at zero")
        s = 1.0 if av > 0.0 else -1.0
        return v, s * a1, s * a2
    f0, f1, f2 = _FN[fn]
    try:
        v = f0(av)
        d1 = f1(av) * a1 if order >= 1 else 0.0
        d2 = f2(av) * a1 * a1 + f1(av) * a2 if order >= 2 else 0.0
    except (ValueError, OverflowError):
        _domain(node, f"{fn} overflow or domain failure")
    return v, d1, d2


def _eval(node, bindings, wrt, order):
    match node:
        case Num(value):
            return value, 0.0, 0.0
        case Var(name):
            if name not in bindings:
                raise ExprDomainError(f"unbound variable {name!r}")
            return float(bindings[name]), 1.0 if name == wrt else 0.0, 0.0
        case Neg(operand):
            v, d1, d2 = _eval(operand, bindings, wrt, order)
            return -v, -d1, -d2
        case Add(left, right):
            lv, l1, l2 = _eval(left, bindings, wrt, order)
            rv, r1, r2 = _eval(right, bindings, wrt, order)
            return lv + rv, l1 + r1, l2 + r2
        case Sub(left, right):
            lv, l1, l2 = _eval(left, bindings, wrt, order)
            rv, r1, r2 = _eval(right, bindings, wrt, order)
            return lv - rv, l1 - r1, l2 - r2
        case Mul(left, right):
            lv, l1, l2 = _eval(left, bindings, wrt, order)
            rv, r1, r2 = _eval(right, bindings, wrt, order)
            return lv * rv, l1 * rv + lv * r1, l2 * rv + 2.0 * l1 * r1 + lv * r2
        case Div(left, right):
            lv, l1, l2 = _eval(left, bindings, wrt, order)
            rv, r1, r2 = _eval(right, bindings, wrt, order)
            if rv == 0.0:
                _domain(node, "division by zero")
            q = lv / rv
            q1 = (l1 - q * r1) / rv
            q2 = (l2 - 2.0 * q1 * r1 - q * r2) / rv
            return q, q1, q2
        case Pow(base, exponent):
            a = _eval(base, bindings, wrt, order)
            b = _eval(exponent, bindings, wrt, order)
            return _pow_triple(node, a, b, order)
        case Call(func, arg):
            a = _eval(arg, bindings, wrt, order)
            return _call_triple(node, func, a, order)
    raise TypeError(f"not an Expr node: {node!r}")


def eval_expr(expr, bindings, order=0, wrt=None):
    """Evaluate `expr` and, optionally, exact derivatives.

    Parameters
    ----------
    expr : Expr
    bindings : mapping str -> float
        Values for every free variable.
    order : 0, 1 or 2
        How many derivatives to return.
    wrt : str, optional
        Variable the derivatives are taken with respect to.  Required
        when order > 0.

    Returns
    -------
    float, or tuple of floats
        order 0 gives the value, order 1 gives (value, d1), order 2
        gives (value, d1, d2).  Derivatives come from forward-mode
        rules, never from finite differencing.

    Raises
    ------
    ExprDomainError
        Unbound variable, or evaluation outside the domain (the message
        names the offending subexpression).
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    if order > 0 and wrt is None:
        raise ValueError("order > 0 requires wrt")
    v, d1, d2 = _eval(expr, bindings, wrt, order)
    if order == 0:
        return v
    if order == 1:
        return v, d1
    return v, d1, d2


# ---------------------------------------------------------------------------
# Symbolic differentiation

_ZERO = Num(0.0)
_ONE = Num(1.0)


def _num(x):
    return Num(float(x))


def _add(a, b):
    if a == _ZERO:
        return b
    if b == _ZERO:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value + b.value)
    return Add(a, b)


def _sub(a, b):
    if b == _ZERO:
        return a
    if a == _ZERO:
        return Neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value - b.value)
    return Sub(a, b)


def _mul(a, b):
    if a == _ZERO or b == _ZERO:
        return _ZERO
    if a == _ONE:
        return b
    if b == _ONE:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value * b.value)
    return Mul(a, b)


def _div(a, b):
    if a == _ZERO:
        return _ZERO
    if b == _ONE:
        return a
    return Div(a, b)


def _pow(a, b):
    if b == _ONE:
        return a
    if b == _ZERO:
        return _ONE
    return Pow(a, b)


_FN_DERIV = {
    "sin": lambda a: Call("cos", a),
    "cos": lambda a: Neg(Call("sin", a)),
    "tan": lambda a: _div(_ONE, _pow(Call("cos", a), _num(2))),
    "exp": lambda a: Call("exp", a),
    "log": lambda a: _div(_ONE, a),
    "sqrt": lambda a: _div(_ONE, _mul(_num(2), Call("sqrt", a))),
    "sinh": lambda a: Call("cosh", a),
    "cosh": lambda a: Call("sinh", a),
    "abs": lambda a: _div(a, Call("abs", a)),
}


def diff(expr, wrt):
    """Symbolic derivative of `expr` with respect to variable `wrt`.

    Always representable in the same language, so derivative
    expressions can be compiled and evaluated on arrays like any
    other Expr.
    """
    match expr:
        case Num():
            return _ZERO
        case Var(name):
            return _ONE if name == wrt else _ZERO
        case Neg(operand):
            d = diff(operand, wrt)
            return _ZERO if d == _ZERO else Neg(d)
        case Add(left, right):
            return _add(diff(left, wrt), diff(right, wrt))
        case Sub(left, right):
            return _sub(diff(left, wrt), diff(right, wrt))
        case Mul(left, right):
            return _add(_mul(diff(left, wrt), right), _mul(left, diff(right, wrt)))
        case Div(left, right):
            dl, dr = diff(left, wrt), diff(right, wrt)
            if dr == _ZERO:
                return _div(dl, right)
            return _div(_sub(_mul(dl, right), _mul(left, dr)), _pow(right, _num(2)))
        case Pow(base, exponent):
            db, de = diff(base, wrt), diff(exponent, wrt)
            if de == _ZERO:
                if isinstance(exponent, Num):
                    c = exponent.value
                    return _mul(_mul(exponent, _pow(base, _num(c - 1.0))), db)
                return _mul(_mul(exponent, _pow(base, _sub(exponent, _ONE))), db)
            # general rule through exp(exponent*log(base))
            term = _add(_mul(de, Call("log", base)), _div(_mul(exponent, db), base))
            return _mul(expr, term)
        case Call(func, arg):
            da = diff(arg, wrt)
            if da == _ZERO:
                return _ZERO
            return _mul(_FN_DERIV[func](arg), da)
    raise TypeError(f"not an Expr node: {expr!r}")


# ---------------------------------------------------------------------------
# Pretty printing and compilation

_LEVEL_SUM, _LEVEL_TERM, _LEVEL_NEG, _LEVEL_POW, _LEVEL_ATOM = 1, 2, 3, 4, 5


def _level(node):
    match node:
        case Add() | Sub():
            return _LEVEL_SUM
        case Mul() | Div():
            return _LEVEL_TERM
        case Neg():
            return _LEVEL_NEG
        case Pow():
            return _LEVEL_POW
    return _LEVEL_ATOM


def _wrap(node, minimum):
    text = pretty(node)
    return f"({text})" if _level(node) < minimum else text


def pretty(expr):
    """Render `expr` with minimal parentheses; parses back to an equal tree."""
    match expr:
        case Num(value):
            return repr(value)
        case Var(name):
            return name
        case Neg(operand):
            return "-" + _wrap(operand, _LEVEL_NEG)
        case Add(left, right):
            return f"{_wrap(left, _LEVEL_SUM)} + {_wrap(right, _LEVEL_SUM + 1)}"
        case Sub(left, right):
            return f"{_wrap(left, _LEVEL_SUM)} - {_wrap(right, _LEVEL_SUM + 1)}"
        case Mul(left, right):
            return f"{_wrap(left, _LEVEL_TERM)}*{_wrap(right, _LEVEL_TERM + 1)}"
        case Div(left, right):
            return f"{_wrap(left, _LEVEL_TERM)}/{_wrap(right, _LEVEL_TERM + 1)}"
        case Pow(base, exponent):
            return f"{_wrap(base, _LEVEL_ATOM)}^{_wrap(exponent, _LEVEL_NEG)}"
        case Call(func, arg):
            return f"{func}({pretty(arg)})"
    raise TypeError(f"not an Expr node: {expr!r}")


def free_variables(expr):
    """Set of variable names appearing in `expr`."""
    match expr:
        case Num():
            return frozenset()
        case Var(name):
            return frozenset({name})
        case Neg(operand) | Call(_, operand):
            return free_variables(operand)
        case Add(left, right) | Sub(left, right) | Mul(left, right) \
                | Div(left, right) | Pow(left, right):
            return free_variables(left) | free_variables(right)
    raise TypeError(f"not an Expr node: {expr!r}")


_NP_FN = {"abs": "np.abs", "log": "np.log", "sqrt": "np.sqrt", "exp": "np.exp",
          "sin": "np.sin", "cos": "np.cos", "tan": "np.tan",
          "sinh": "np.sinh", "cosh": "np.cosh"}


def _emit(node, names):
    match node:
        case Num(value):
            return repr(value)
        case Var(name):
            return names[name]
        case Neg(operand):
            return f"(-{_emit(operand, names)})"
        case Add(left, right):
            return f"({_emit(left, names)} + {_emit(right, names)})"
        case Sub(left, right):
            return f"({_emit(left, names)} - {_emit(right, names)})"
        case Mul(left, right):
            return f"({_emit(left, names)} * {_emit(right, names)})"
        case Div(left, right):
            return f"({_emit(left, names)} / {_emit(right, names)})"
        case Pow(base, exponent):
            return f"({_emit(base, names)} ** {_emit(exponent, names)})"
        case Call(func, arg):
            return f"{_NP_FN[func]}({_emit(arg, names)})"
    raise TypeError(f"not an Expr node: {node}")


def compile_expr(expr, var_order):
    """Compile `expr` to a vectorized callable over numpy arrays.

    The callable takes one positional array per name in `var_order`
    (unused variables are accepted and ignored) and broadcasts like the
    underlying numpy operations.  No domain checking happens here; the
    scalar path `eval_expr` is the checked one.
    """
    var_order = list(var_order)
    missing = free_variables(expr) - set(var_order)
    if missing:
        raise ExprDomainError(f"unbound variables {sorted(missing)}")
    args = [f"_v{i}" for i in range(len(var_order))]
    names = dict(zip(var_order, args))
    body = _emit(expr, names) if not isinstance(expr, Num) else None
    if body is None:
        # constant: still broadcast against the first argument if present
        const = expr.value
        if args:
            def const_fn(*arrays):
                return np.full(np.shape(arrays[0]), const, dtype=float)
            return const_fn
        return lambda: const
    source = f"lambda {', '.join(args)}: {body}"
    return eval(source, {"np": np})  # noqa: S307 - generated from a closed AST
