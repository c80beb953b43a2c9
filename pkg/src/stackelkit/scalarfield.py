"""Coefficient functions on a coordinate chart.

A :class:`ScalarField` is either EXACT (a reduced rational function with
rational coefficients, see :mod:`stackelkit.ratfunc`) or NUMERIC (an
expression DAG from :mod:`stackelkit.expr`, which also admits ``sin``,
``cos``, ``exp`` and ``sqrt``). Both support arithmetic, exact symbolic
partial derivatives and pointwise evaluation.

Coordinate indices are 0-based throughout the Python API; reports and error
messages print them 1-based.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from numbers import Rational, Real

import numpy as np
from . import expr as E
from .ratfunc import RationalFunction, context, poly_terms

log = logging.getLogger(__name__)


class Backend(str, enum.Enum):
    EXACT = "exact"
    NUMERIC = "numeric"


class ExpressionError(ValueError):
    """Malformed expression text; ``position`` is a 0-based character offset."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class ParseError(ExpressionError):
    pass


class UnknownIdentifierError(ExpressionError):
    pass


class TranscendentalError(ExpressionError):
    pass


class EvaluationError(ArithmeticError):
    pass


class PoleError(EvaluationError):
    """Raised when a denominator vanishes at the evaluation point."""


class BackendMismatchError(TypeError):
    pass


_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*\Z")




@dataclass(frozen=True)
class Chart:
    coordinate_names: tuple

    def __post_init__(self):
        names = tuple(self.coordinate_names)
        object.__setattr__(self, "coordinate_names", names)
        if len(names) < 1:
            raise ValueError("a chart needs at least one coordinate")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate coordinate names in {names}")
        for name in names:
            if not _IDENT.match(name) or name in E.FUNCTIONS:
                raise ValueError(f"invalid coordinate name {name!r}")

    @classmethod
    def standard(cls, n: int) -> "Chart":
        return cls(tuple(f"x{i + 1}" for i in range(n)))

    @property
    def dimension(self) -> int:
        return len(self.coordinate_names)

    def index(self, name: str) -> int:
        return self.coordinate_names.index(name)

    @cached_property
    def exact_context(self):
        return context(self.coordinate_names)




def _poly_source(terms) -> str:
    parts = []
    for monom, c in terms:
        factors = [repr(float(c))]
        for i, e in enumerate(monom):
            if e == 1:
                factors.append(f"x[{i}]")
            elif e > 1:
                factors.append(f"x[{i}]**{e}")
        parts.append("*".join(factors))
    return " + ".join(parts) if parts else "0.0"


def _eval_terms(terms, point):
    total = 0
    for monom, c in terms:
        v = c
        for xi, e in zip(point, monom):
            if e:
                v *= xi**e
        total += v
    return total


class ScalarField:
    """A function of the chart coordinates.

    Instances are immutable; arithmetic returns new fields. Plain numbers
    mix freely with fields of either backend.
    """

    __slots__ = ("chart", "backend", "payload", "_cache")

    def __init__(self, chart: Chart, backend: Backend, payload):
        self.chart = chart
        self.backend = Backend(backend)
        self.payload = payload
        self._cache = {}

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, chart, value, backend=Backend.EXACT) -> "ScalarField":
        backend = Backend(backend)
        if backend is Backend.EXACT:
            return cls(chart, backend, RationalFunction.constant(chart.exact_context, _as_exact_number(value)))
        return cls(chart, backend, E.const(value))

    @classmethod
    def coordinate(cls, chart, i: int, backend=Backend.EXACT) -> "ScalarField":
        backend = Backend(backend)
        if backend is Backend.EXACT:
            return cls(chart, backend, RationalFunction.gen(chart.exact_context, i))
        return cls(chart, backend, E.var(i))

    @classmethod
    def zero(cls, chart, backend=Backend.EXACT):
        return cls.constant(chart, 0, backend)

    # -- arithmetic ---------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if other.backend is not self.backend:
                raise BackendMismatchError(
                    f"cannot combine {self.backend.value} and {other.backend.value} fields"
                )
            if other.chart != self.chart:
                raise ValueError("fields live on different charts")
            return other
        if isinstance(other, (Real, Rational)):
            return ScalarField.constant(self.chart, other, self.backend)
        return NotImplemented

    def _binary(self, other, exact_op, numeric_op, reflected=False):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        a, b = (other, self) if reflected else (self, other)
        if self.backend is Backend.EXACT:
            return ScalarField(self.chart, self.backend, exact_op(a.payload, b.payload))
        return ScalarField(self.chart, self.backend, numeric_op(a.payload, b.payload))

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b, E.add)

    def __radd__(self, other):
        return self._binary(other, lambda a, b: a + b, E.add, reflected=True)

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b, E.sub)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: a - b, E.sub, reflected=True)

    def __mul__(self, other):
        return self._binary(other, lambda a, b: a * b, E.mul)

    def __rmul__(self, other):
        return self._binary(other, lambda a, b: a * b, E.mul, reflected=True)

    def __truediv__(self, other):
        return self._binary(other, _exact_div, E.div)

    def __rtruediv__(self, other):
        return self._binary(other, _exact_div, E.div, reflected=True)

    def __neg__(self):
        if self.backend is Backend.EXACT:
            return ScalarField(self.chart, self.backend, -self.payload)
        return ScalarField(self.chart, self.backend, E.neg(self.payload))

    def __pos__(self):
        return self

    def __pow__(self, k):
        if not isinstance(k, int):
            raise TypeError("only integer powers are supported")
        if self.backend is Backend.EXACT:
            if k < 0 and not self.payload:
                raise PoleError("zero raised to a negative power")
            return ScalarField(self.chart, self.backend, self.payload**k)
        return ScalarField(self.chart, self.backend, E.power(self.payload, k))

    def apply(self, name: str) -> "ScalarField":
        """Apply one of the transcendental functions (NUMERIC only)."""
        if self.backend is Backend.EXACT:
            raise TranscendentalError(f"{name} is not available under the EXACT backend")
        return ScalarField(self.chart, self.backend, E.func(name, self.payload))

    def __eq__(self, other):
        if isinstance(other, (Real, Rational)) and self.backend is Backend.EXACT:
            other = ScalarField.constant(self.chart, other)
        if not isinstance(other, ScalarField):
            return NotImplemented
        if self.backend is Backend.EXACT and other.backend is Backend.EXACT:
            return self.chart == other.chart and self.payload == other.payload
        return self is other

    def __hash__(self):
        if self.backend is Backend.EXACT:
            return hash((self.chart, self.payload))
        return id(self)

    # -- queries ------------------------------------------------------
    def is_zero(self) -> bool:
        """Identically zero for EXACT; structurally the constant 0 for NUMERIC."""
        if self.backend is Backend.EXACT:
            return not self.payload
        return self.payload.is_const(0.0)

    def is_constant(self) -> bool:
        return not self.variables()

    def variables(self) -> frozenset:
        """Coordinate indices the field syntactically depends on."""
        if self.backend is Backend.EXACT:
            used = set()
            for poly in (self.payload.numer, self.payload.denom):
                used.update(i for i, e in enumerate(poly.degrees()) if e > 0)
            return frozenset(used)
        return self.payload.variables()

    def partial(self, i: int) -> "ScalarField":
        if not 0 <= i < self.chart.dimension:
            raise IndexError(f"coordinate index {i} out of range")
        key = ("d", i)
        if key not in self._cache:
            if self.backend is Backend.EXACT:
                self._cache[key] = ScalarField(self.chart, self.backend, self.payload.diff(i))
            else:
                self._cache[key] = ScalarField(self.chart, self.backend, self.payload.diff(i))
        return self._cache[key]

    # -- evaluation ---------------------------------------------------
    def _exact_terms(self):
        if "terms" not in self._cache:
            self._cache["terms"] = (
                poly_terms(self.payload.numer),
                poly_terms(self.payload.denom),
            )
        return self._cache["terms"]

    def compiled(self):
        """A float-valued Python callable of a point sequence."""
        if "fn" not in self._cache:
            if self.backend is Backend.EXACT:
                num, den = self._exact_terms()
                src = f"lambda x: ({_poly_source(num)}) / ({_poly_source(den)})"
                self._cache["fn"] = eval(src, {})
            else:
                self._cache["fn"] = self.payload.compiled()
        return self._cache["fn"]

    def evaluate(self, point):
        n = self.chart.dimension
        if len(point) != n:
            raise ValueError(f"expected a point with {n} coordinates, got {len(point)}")
        if self.backend is Backend.EXACT and all(
            isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in point
        ):
            num, den = self._exact_terms()
            d = _eval_terms(den, point)
            if d == 0:
                raise PoleError(f"pole at {tuple(str(v) for v in point)}")
            return Fraction(_eval_terms(num, point)) / d
        try:
            return float(self.compiled()([float(v) for v in point]))
        except ZeroDivisionError as exc:
            raise PoleError(f"pole at {tuple(point)}") from exc
        except (ValueError, OverflowError) as exc:
            raise EvaluationError(f"cannot evaluate at {tuple(point)}: {exc}") from exc

    __call__ = evaluate

    # -- conversion ---------------------------------------------------
    def to_numeric(self) -> "ScalarField":
        if self.backend is Backend.NUMERIC:
            return self
        num, den = self._exact_terms()
        node = E.div(_terms_node(num), _terms_node(den))
        return ScalarField(self.chart, Backend.NUMERIC, node)

    def to_text(self) -> str:
        """Render in the input grammar; ``parse_expression`` reads it back."""
        names = dict(enumerate(self.chart.coordinate_names))
        if self.backend is Backend.NUMERIC:
            return E.to_text(self.payload, names)
        num, den = self._exact_terms()
        if len(den) == 1 and not any(den[0][0]):
            c = den[0][1]
            return _terms_text([(m, Fraction(v, c)) for m, v in num], names)
        top = _terms_text(num, names)
        bottom = _terms_text(den, names)
        if len(num) > 1:
            top = f"({top})"
        return f"{top}/({bottom})"

    def __repr__(self):
        return f"ScalarField[{self.backend.value}]({self.to_text()})"


def _exact_div(a, b):
    if not b:
        raise PoleError("division by the zero function")
    return a / b


def _as_exact_number(value):
    if isinstance(value, bool):
        value = int(value)
    if isinstance(value, Rational):
        return Fraction(int(value.numerator), int(value.denominator))
    return Fraction(value)


def _terms_node(terms):
    parts = []
    for monom, c in terms:
        factors = [E.const(float(c))]
        for i, e in enumerate(monom):
            if e:
                factors.append(E.power(E.var(i), e))
        parts.append(E.mul(*factors))
    return E.add(*parts)


def _fraction_text(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _terms_text(terms, names) -> str:
    # highest total degree first, ties in the polynomial term order
    ordered = sorted(terms, key=lambda t: -sum(t[0]))
    out = []
    for k, (monom, c) in enumerate(ordered):
        sign = "-" if c < 0 else "+"
        c = abs(c)
        factors = [
            names[i] if e == 1 else f"{names[i]}^{e}" for i, e in enumerate(monom) if e
        ]
        if c != 1 or not factors:
            factors.insert(0, _fraction_text(c))
        body = "*".join(factors)
        if k == 0:
            out.append(f"-{body}" if sign == "-" else body)
        else:
            out.append(f" {sign} {body}")
    return "".join(out) if out else "0"


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = len(text) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, chart, backend):
        self.tokens = _tokenize(text)
        self.k = 0
        self.chart = chart
        self.backend = backend

    def peek(self):
        return self.tokens[self.k]

    def take(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind != "op":
            found = text or "end of input"
            raise ParseError(f"expected {value!r}, found {found!r}", pos)

    def parse(self):
        value = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos)
        return value

    def expr(self):
        value = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self):
        value = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.take()
            rhs = self.factor()
            if op == "*":
                value = value * rhs
            else:
                if self.backend is Backend.EXACT and rhs.is_zero():
                    raise PoleError(f"division by zero (at position {pos})")
                value = value / rhs
        return value

    def factor(self):
        kind, text, pos = self.peek()
        if kind == "op" and text in ("-", "+"):
            self.take()
            inner = self.factor()
            return -inner if text == "-" else inner
        base = self.base()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            sign = 1
            kind, text, pos = self.peek()
            if kind == "op" and text in ("-", "+"):
                self.take()
                sign = -1 if text == "-" else 1
                kind, text, pos = self.peek()
            if kind != "number" or not text.isdigit():
                raise ParseError("exponent must be an integer", pos)
            self.take()
            k = sign * int(text)
            if k < 0 and self.backend is Backend.EXACT and base.is_zero():
                raise PoleError(f"zero raised to a negative power (at position {pos})")
            base = base**k
        return base

    def base(self):
        kind, text, pos = self.take()
        if kind == "number":
            value = Fraction(text) if self.backend is Backend.EXACT else float(text)
            return ScalarField.constant(self.chart, value, self.backend)
        if kind == "ident":
            if text in E.FUNCTIONS:
                if self.backend is Backend.EXACT:
                    raise TranscendentalError(
                        f"{text} is transcendental and not allowed under the EXACT backend", pos
                    )
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return arg.apply(text)
            if text not in self.chart.coordinate_names:
                raise UnknownIdentifierError(f"unknown identifier {text!r}", pos)
            return ScalarField.coordinate(self.chart, self.chart.index(text), self.backend)
        if kind == "op" and text == "(":
            value = self.expr()
            self.expect(")")
            return value
        found = text or "end of input"
        raise ParseError(f"unexpected {found!r}", pos)


def parse_expression(text: str, chart: Chart, backend=Backend.EXACT) -> ScalarField:
    """Parse ``text`` in the expression grammar into a field on ``chart``.

    Grammar (``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``)::

        expr   := term (('+'|'-') term)*
        term   := factor (('*'|'/') factor)*
        factor := ('+'|'-') factor | base ('^' integer)?
        base   := number | ident | '(' expr ')' | func '(' expr ')'

    ``func`` is one of sin, cos, exp, sqrt and is rejected under EXACT.
    """
    backend = Backend(backend)
    if not isinstance(text, str):
        text = str(text)
    return _Parser(text, chart, backend).parse()


def evaluate(f: ScalarField, point):
    return f.evaluate(point)


def partial(f: ScalarField, i: int) -> ScalarField:
    return f.partial(i)


def field_sum(values) -> ScalarField:
    """Sum of fields sharing a chart and backend.

    Exact sums are formed over a common denominator and reduced once,
    instead of cancelling after every addition.
    """
    values = list(values)
    first = values[0]
    if len(values) == 1:
        return first
    for v in values[1:]:
        first._coerce(v)
    if first.backend is not Backend.EXACT:
        total = first
        for v in values[1:]:
            total = total + v
        return total
    return ScalarField(first.chart, Backend.EXACT, RationalFunction.sum(v.payload for v in values))


def variable_support(f: ScalarField, rng=None, probes: int = 8) -> frozenset:
    """Coordinates the field actually depends on.

    EXACT fields are reduced, so the syntactic answer is exact. For NUMERIC
    fields each syntactically present variable is confirmed by evaluating
    its partial derivative at ``probes`` random points; a variable whose
    derivative vanishes at all of them (e.g. ``x2 - x2`` after no
    simplification) is dropped and logged.
    """
    syntactic = f.variables()
    if f.backend is Backend.EXACT:
        return syntactic
    rng = np.random.default_rng(0) if rng is None else rng
    n = f.chart.dimension
    confirmed = set()
    for i in sorted(syntactic):
        d = f.partial(i)
        evaluated = 0
        for _ in range(4 * probes):
            if evaluated == probes:
                break
            point = rng.uniform(0.5, 1.5, size=n)
            try:
                dv = d.evaluate(point)
                fv = f.evaluate(point)
            except EvaluationError:
                continue
            evaluated += 1
            if abs(dv) > 1e-12 * (1 + abs(fv)):
                confirmed.add(i)
                break
        if i not in confirmed:
            log.warning(
                "variable %s appears in %s but the field does not vary with it at %d probes",
                f.chart.coordinate_names[i], f.to_text(), evaluated,
            )
    return frozenset(confirmed)


def random_point(chart: Chart, rng, box=(0.5, 2.0), rational=True, denominator=1024):
    """A random point in ``box`` per coordinate, with rational coordinates by default."""
    lo, hi = box
    if rational:
        ints = rng.integers(int(lo * denominator), int(hi * denominator) + 1, size=chart.dimension)
        return tuple(Fraction(int(v), denominator) for v in ints)
    return tuple(float(v) for v in rng.uniform(lo, hi, size=chart.dimension))
