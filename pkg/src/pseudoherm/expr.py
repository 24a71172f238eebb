"""Expression language for real profile functions of a single variable ``x``.

Expressions are immutable trees.  They evaluate on floats or numpy arrays,
differentiate exactly, and print back to text that parses to the same tree::

    >>> e = parse("exp(-x^2)")
    >>> e.diff().eval(1.0)
    -0.7357588823428847
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

Number = Union[int, float]

FUNCTIONS = ("exp", "ln", "sqrt", "sin", "cos", "tan", "sinh", "cosh", "tanh")


class ExprError(ValueError):
    """Base class for expression errors."""


class ParseError(ExprError):
    """Syntax error; ``offset`` is the byte offset into the UTF-8 source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ParseError):
    pass


class EmptyExpressionError(ParseError):
    pass


class DomainError(ExprError, ArithmeticError):
    """Raised when a sub-expression is evaluated outside its domain.

    ``expr`` is the offending sub-expression and ``index`` the flat index of
    the first offending sample when evaluating on an array.
    """

    def __init__(self, expr: "Expr", reason: str, index: int | None = None):
        where = "" if index is None else f" (sample {index})"
        super().__init__(f"{reason} in {expr.to_text()}{where}")
        self.expr = expr
        self.reason = reason
        self.index = index


def _first_bad(mask) -> int | None:
    if np.ndim(mask) == 0:
        return None
    return int(np.flatnonzero(mask)[0])


def _check(node: "Expr", mask, reason: str):
    if np.any(mask):
        raise DomainError(node, reason, _first_bad(mask))


def _finite(node: "Expr", value):
    _check(node, ~np.isfinite(value), "overflow")
    return value


class Expr:
    """Base node.  Subclasses are frozen dataclasses, so ``==`` is structural."""

    __slots__ = ()

    # --- evaluation -------------------------------------------------------
    def eval(self, x):
        """Evaluate at a float or array of floats.

        Raises :class:`DomainError` instead of returning a non-finite value.
        """
        arr = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = self._eval(arr)
        out = np.broadcast_to(out, arr.shape)
        if arr.ndim == 0:
            return float(out)
        return np.array(out, dtype=float)

    __call__ = eval

    def _eval(self, x):
        raise NotImplementedError

    # --- calculus ---------------------------------------------------------
    def diff(self) -> "Expr":
        """Exact d/dx, simplified."""
        return self._diff().simplify()

    def _diff(self) -> "Expr":
        raise NotImplementedError

    def simplify(self) -> "Expr":
        e = self
        for _ in range(16):
            s = e._simplify()
            if s == e:
                return s
            e = s
        return e

    def _simplify(self) -> "Expr":
        return self

    def has_var(self) -> bool:
        return False

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0

    # --- printing ---------------------------------------------------------
    _prec = 5

    def to_text(self) -> str:
        return self._text(top=True)

    def _text(self, top: bool = False) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_text()

    # --- arithmetic sugar -------------------------------------------------
    def __add__(self, other):
        other = _lift(other)
        return NotImplemented if other is None else Add(self, other)

    def __radd__(self, other):
        other = _lift(other)
        return NotImplemented if other is None else Add(other, self)

    def __sub__(self, other):
        other = _lift(other)
        return NotImplemented if other is None else Sub(self, other)

    def __rsub__(self, other):
        other = _lift(other)
        return NotImplemented if other is None else Sub(other, self)

    def __mul__(self, other):
        other = _lift(other)
        return NotImplemented if other is None else Mul(self, other)

    def __rmul__(self, other):
        other = _lift(other)
        return NotImplemented if other is None else Mul(other, self)

    def __truediv__(self, other):
        other = _lift(other)
        return NotImplemented if other is None else Div(self, other)

    def __rtruediv__(self, other):
        other = _lift(other)
        return NotImplemented if other is None else Div(other, self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            return NotImplemented
        return Pow(self, Const(float(p)))


def _lift(v) -> Expr | None:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, np.integer, np.floating)):
        return Const(float(v))
    return None


def _is(e: Expr, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


def _fmt(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float
    name: str | None = None

    def _eval(self, x):
        return self.value

    def _diff(self):
        return Const(0.0)

    def _text(self, top=False):
        if self.name:
            return self.name
        s = _fmt(self.value)
        if self.value < 0 or (self.value == 0 and math.copysign(1.0, self.value) < 0):
            s = _fmt(abs(self.value))
            return "-" + s if top else f"(-{s})"
        return s


@dataclass(frozen=True, eq=True)
class Var(Expr):
    def _eval(self, x):
        return x

    def _diff(self):
        return Const(1.0)

    def has_var(self):
        return True

    def _text(self, top=False):
        return "x"


X = Var()
PI = Const(math.pi, "pi")


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr
    _prec = 3

    def _eval(self, x):
        return -self.arg._eval(x)

    def _diff(self):
        return Neg(self.arg._diff())

    def has_var(self):
        return self.arg.has_var()

    def _simplify(self):
        a = self.arg._simplify()
        if isinstance(a, Const):
            return Const(-a.value)
        if isinstance(a, Neg):
            return a.arg
        return Neg(a)

    def _text(self, top=False):
        inner = self.arg._text()
        if self.arg._prec < self._prec:
            inner = f"({inner})"
        return "-" + inner


@dataclass(frozen=True, eq=True)
class _Binary(Expr):
    left: Expr
    right: Expr
    _op = "?"

    def has_var(self):
        return self.left.has_var() or self.right.has_var()

    def _text(self, top=False):
        lt = self.left._text()
        if self.left._prec < self._prec:
            lt = f"({lt})"
        rt = self.right._text()
        if self.right._prec <= self._prec:
            rt = f"({rt})"
        sep = f" {self._op} " if self._prec == 1 else self._op
        return f"{lt}{sep}{rt}"

    def _fold(self, left, right) -> Expr | None:
        if isinstance(left, Const) and isinstance(right, Const):
            node = type(self)(left, right)
            try:
                return Const(node.eval(0.0))
            except DomainError:
                return None
        return None


@dataclass(frozen=True, eq=True)
class Add(_Binary):
    _op = "+"
    _prec = 1

    def _eval(self, x):
        return _finite(self, self.left._eval(x) + self.right._eval(x))

    def _diff(self):
        return Add(self.left._diff(), self.right._diff())

    def _simplify(self):
        l, r = self.left._simplify(), self.right._simplify()
        folded = self._fold(l, r)
        if folded is not None:
            return folded
        if _is(l, 0):
            return r
        if _is(r, 0):
            return l
        if isinstance(r, Neg):
            return Sub(l, r.arg)
        if isinstance(l, Neg):
            return Sub(r, l.arg)
        return Add(l, r)


@dataclass(frozen=True, eq=True)
class Sub(_Binary):
    _op = "-"
    _prec = 1

    def _eval(self, x):
        return _finite(self, self.left._eval(x) - self.right._eval(x))

    def _diff(self):
        return Sub(self.left._diff(), self.right._diff())

    def _simplify(self):
        l, r = self.left._simplify(), self.right._simplify()
        folded = self._fold(l, r)
        if folded is not None:
            return folded
        if _is(r, 0):
            return l
        if _is(l, 0):
            return Neg(r)
        if l == r:
            return Const(0.0)
        if isinstance(r, Neg):
            return Add(l, r.arg)
        return Sub(l, r)


@dataclass(frozen=True, eq=True)
class Mul(_Binary):
    _op = "*"
    _prec = 2

    def _eval(self, x):
        return _finite(self, self.left._eval(x) * self.right._eval(x))

    def _diff(self):
        return Add(Mul(self.left._diff(), self.right), Mul(self.left, self.right._diff()))

    def _simplify(self):
        l, r = self.left._simplify(), self.right._simplify()
        folded = self._fold(l, r)
        if folded is not None:
            return folded
        if _is(l, 0) or _is(r, 0):
            return Const(0.0)
        if _is(l, 1):
            return r
        if _is(r, 1):
            return l
        if _is(l, -1):
            return Neg(r)
        if _is(r, -1):
            return Neg(l)
        if isinstance(l, Neg):
            return Neg(Mul(l.arg, r))
        if isinstance(r, Neg):
            return Neg(Mul(l, r.arg))
        # constants migrate to the front
        if isinstance(r, Const) and not isinstance(l, Const):
            return Mul(r, l)
        if isinstance(l, Const) and isinstance(r, Mul) and isinstance(r.left, Const):
            return Mul(Const(l.value * r.left.value), r.right)
        if not isinstance(l, Const) and isinstance(r, Mul) and isinstance(r.left, Const):
            return Mul(r.left, Mul(l, r.right))
        if isinstance(l, Mul) and isinstance(l.left, Const):
            return Mul(l.left, Mul(l.right, r))
        return Mul(l, r)


def _exact_reciprocal(c: float) -> bool:
    if c == 0 or not math.isfinite(c):
        return False
    m, _ = math.frexp(c)
    return abs(m) == 0.5


@dataclass(frozen=True, eq=True)
class Div(_Binary):
    _op = "/"
    _prec = 2

    def _eval(self, x):
        num = self.left._eval(x)
        den = self.right._eval(x)
        _check(self, np.asarray(den) == 0, "division by zero")
        return _finite(self, num / den)

    def _diff(self):
        u, v = self.left, self.right
        return Div(Sub(Mul(u._diff(), v), Mul(u, v._diff())), Pow(v, Const(2.0)))

    def _simplify(self):
        l, r = self.left._simplify(), self.right._simplify()
        folded = self._fold(l, r)
        if folded is not None:
            return folded
        if _is(r, 1):
            return l
        if _is(l, 0) and not _is(r, 0):
            return Const(0.0)
        if isinstance(r, Const) and _exact_reciprocal(r.value):
            return Mul(Const(1.0 / r.value), l)
        if isinstance(l, Neg):
            return Neg(Div(l.arg, r))
        return Div(l, r)


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: Const
    _prec = 4

    def __post_init__(self):
        if not isinstance(self.exponent, Const):
            raise ExprError("Pow exponent must be a constant node")

    def has_var(self):
        return self.base.has_var()

    def _eval(self, x):
        b = self.base._eval(x)
        p = self.exponent.value
        b_arr = np.asarray(b)
        if not float(p).is_integer():
            _check(self, b_arr < 0, "fractional power of a negative value")
        if p < 0:
            _check(self, b_arr == 0, "negative power of zero")
        return _finite(self, np.power(b, p))

    def _diff(self):
        p = self.exponent.value
        if p == 0:
            return Const(0.0)
        return Mul(Mul(Const(p), Pow(self.base, Const(p - 1))), self.base._diff())

    def _simplify(self):
        b = self.base._simplify()
        p = self.exponent.value
        if p == 1:
            return b
        if p == 0:
            return Const(1.0)
        if isinstance(b, Const):
            try:
                return Const(Pow(b, self.exponent).eval(0.0))
            except DomainError:
                pass
        if isinstance(b, Pow) and float(p).is_integer():
            return Pow(b.base, Const(b.exponent.value * p))
        return Pow(b, self.exponent)

    def _text(self, top=False):
        bt = self.base._text()
        if self.base._prec <= self._prec:
            bt = f"({bt})"
        return f"{bt}^{self.exponent._text()}"


_DERIV: dict[str, Callable[[Expr], Expr]] = {
    "exp": lambda u: Apply("exp", u),
    "ln": lambda u: Div(Const(1.0), u),
    "sqrt": lambda u: Div(Const(1.0), Mul(Const(2.0), Apply("sqrt", u))),
    "sin": lambda u: Apply("cos", u),
    "cos": lambda u: Neg(Apply("sin", u)),
    "tan": lambda u: Div(Const(1.0), Pow(Apply("cos", u), Const(2.0))),
    "sinh": lambda u: Apply("cosh", u),
    "cosh": lambda u: Apply("sinh", u),
    "tanh": lambda u: Div(Const(1.0), Pow(Apply("cosh", u), Const(2.0))),
}

_NUMPY = {
    "exp": np.exp,
    "ln": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
}


@dataclass(frozen=True, eq=True)
class Apply(Expr):
    func: str
    arg: Expr

    def __post_init__(self):
        if self.func not in _NUMPY:
            raise ExprError(f"unknown function {self.func!r}")

    def has_var(self):
        return self.arg.has_var()

    def _eval(self, x):
        u = self.arg._eval(x)
        if self.func == "ln":
            _check(self, np.asarray(u) <= 0, "logarithm of a non-positive value")
        elif self.func == "sqrt":
            _check(self, np.asarray(u) < 0, "square root of a negative value")
        return _finite(self, _NUMPY[self.func](u))

    def _diff(self):
        return Mul(_DERIV[self.func](self.arg), self.arg._diff())

    def _simplify(self):
        a = self.arg._simplify()
        if isinstance(a, Const):
            try:
                return Const(Apply(self.func, a).eval(0.0))
            except DomainError:
                pass
        return Apply(self.func, a)

    def _text(self, top=False):
        return f"{self.func}({self.arg._text(top=True)})"


# --- module-level API --------------------------------------------------------


def evaluate(e, x):
    """Evaluate an expression (or any profile object) at ``x``."""
    return e.eval(x)


def differentiate(e):
    return e.diff()


def simplify(e):
    return e.simplify()


def to_text(e) -> str:
    return e.to_text()


def const(v: Number) -> Const:
    return Const(float(v))


# --- parser ------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks: list[tuple[str, str, int]] = []
        pos = 0
        while True:
            while pos < len(src) and src[pos].isspace():
                pos += 1
            if pos >= len(src):
                break
            m = _TOKEN.match(src, pos)
            if not m:
                raise ParseError(f"unexpected character {src[pos]!r}", self._byte(pos))
            kind = m.lastgroup
            start = m.start(kind)
            self.toks.append((kind, m.group(kind), start))
            pos = m.end()
        self.i = 0

    def _byte(self, char_pos: int) -> int:
        return len(self.src[:char_pos].encode("utf-8"))

    def _peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def _offset(self) -> int:
        tok = self._peek()
        return self._byte(tok[2] if tok else len(self.src))

    def _take(self, value: str | None = None):
        tok = self._peek()
        if tok is None:
            raise ParseError("unexpected end of input", self._offset())
        if value is not None and tok[1] != value:
            raise ParseError(f"expected {value!r}, found {tok[1]!r}", self._offset())
        self.i += 1
        return tok

    def _at(self, *values) -> bool:
        tok = self._peek()
        return tok is not None and tok[0] == "op" and tok[1] in values

    def parse(self) -> Expr:
        if not self.toks:
            raise EmptyExpressionError("empty expression", 0)
        e = self.expr()
        if self._peek() is not None:
            raise ParseError(f"unexpected token {self._peek()[1]!r}", self._offset())
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self._at("+", "-"):
            op = self._take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self._at("*", "/"):
            op = self._take()[1]
            rhs = self.factor()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def factor(self) -> Expr:
        if self._at("-"):
            self._take()
            inner = self.factor()
            if isinstance(inner, Const) and inner.name is None:
                return Const(-inner.value)
            return Neg(inner)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self._at("^"):
            self._take()
            start = self._offset()
            exponent = self.exponent()
            if exponent.has_var():
                raise ParseError("exponent must be constant", start)
            try:
                value = exponent.eval(0.0)
            except DomainError as exc:
                raise ParseError(f"invalid exponent: {exc}", start) from None
            return Pow(base, Const(value))
        return base

    def exponent(self) -> Expr:
        if self._at("-"):
            self._take()
            return Neg(self.exponent())
        return self.power()

    def atom(self) -> Expr:
        tok = self._peek()
        if tok is None:
            raise ParseError("unexpected end of input", self._offset())
        kind, text, _ = tok
        if kind == "num":
            self._take()
            return Const(float(text))
        if kind == "id":
            offset = self._offset()
            self._take()
            if text == "x":
                return X
            if text == "pi":
                return PI
            if text in FUNCTIONS:
                if not self._at("("):
                    raise ParseError(f"expected '(' after {text}", self._offset())
                self._take("(")
                arg = self.expr()
                self._take(")")
                return Apply(text, arg)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", offset)
        if text == "(":
            self._take()
            e = self.expr()
            self._take(")")
            return e
        raise ParseError(f"unexpected token {text!r}", self._offset())


def parse(source: str) -> Expr:
    """Parse ``source`` into an expression tree.

    Grammar (lowest to highest precedence)::

        expr   := term (('+'|'-') term)*
        term   := factor (('*'|'/') factor)*
        factor := '-' factor | power
        power  := atom ('^' exponent)?      exponent must be constant
        atom   := number | 'x' | 'pi' | func '(' expr ')' | '(' expr ')'

    A unary minus applied directly to a numeric literal folds into a
    negative constant.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    return _Parser(source).parse()


def as_expr(value) -> Expr:
    """Coerce text, a number or an Expr into an Expr."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value)
    lifted = _lift(value)
    if lifted is None:
        raise TypeError(f"cannot interpret {value!r} as an expression")
    return lifted
