"""Polynomials in the fibre momenta with scalar-field coefficients.

The canonical Poisson bracket used everywhere in the package is

    {F, G} = sum_i (dF/dp_i * dG/dx^i - dF/dx^i * dG/dp_i),

so that d/dt G = {H, G} along the flow of H.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .scalarfield import Backend, BackendMismatchError, Chart, EvaluationError, ScalarField, field_sum


@dataclass(frozen=True)
class PhaseState:
    position: tuple
    momentum: tuple

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(self.position))
        object.__setattr__(self, "momentum", tuple(self.momentum))
        if len(self.position) != len(self.momentum):
            raise ValueError("position and momentum must have the same length")


@dataclass(frozen=True)
class ZeroReport:
    flag: bool
    residual: float

    def __bool__(self):
        return self.flag


class MomentaPolynomial:
    """``sum_a c_a(x) p^a`` with exponent tuples ``a`` of length n.

    Zero coefficients are never stored (EXACT: identically zero; NUMERIC:
    the literal constant 0).
    """

    __slots__ = ("chart", "backend", "terms")

    def __init__(self, chart: Chart, backend, terms=None):
        self.chart = chart
        self.backend = Backend(backend)
        clean = {}
        n = chart.dimension
        for exps, coeff in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n or min(exps, default=0) < 0:
                raise ValueError(f"bad momentum exponent {exps} for a {n}-dimensional chart")
            if not isinstance(coeff, ScalarField):
                coeff = ScalarField.constant(chart, coeff, self.backend)
            elif coeff.backend is not self.backend:
                raise BackendMismatchError("coefficient backend differs from polynomial backend")
            if not coeff.is_zero():
                clean[exps] = coeff
        self.terms = clean

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, chart, backend=Backend.EXACT):
        return cls(chart, backend, {})

    @classmethod
    def momentum(cls, chart, i: int, backend=Backend.EXACT):
        exps = [0] * chart.dimension
        exps[i] = 1
        return cls(chart, backend, {tuple(exps): 1})

    @classmethod
    def scalar(cls, f: ScalarField):
        return cls(f.chart, f.backend, {(0,) * f.chart.dimension: f})

    # -- algebra ------------------------------------------------------
    def _check(self, other):
        if other.backend is not self.backend:
            raise BackendMismatchError(
                f"cannot combine {self.backend.value} and {other.backend.value} polynomials"
            )
        if other.chart != self.chart:
            raise ValueError("polynomials live on different charts")

    def _lift(self, other):
        if isinstance(other, MomentaPolynomial):
            self._check(other)
            return other
        if isinstance(other, ScalarField):
            return MomentaPolynomial.scalar(other)
        try:
            return MomentaPolynomial.scalar(ScalarField.constant(self.chart, other, self.backend))
        except (TypeError, ValueError):
            return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return MomentaPolynomial(self.chart, self.backend, _merge([self.terms, other.terms]))

    __radd__ = __add__

    def __neg__(self):
        return MomentaPolynomial(self.chart, self.backend, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out = {}
        for (a, ca), (b, cb) in product(self.terms.items(), other.terms.items()):
            key = tuple(x + y for x, y in zip(a, b))
            out.setdefault(key, []).append(ca * cb)
        return MomentaPolynomial(self.chart, self.backend, {k: _sum(v) for k, v in out.items()})

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = MomentaPolynomial.scalar(ScalarField.constant(self.chart, 1, self.backend))
        for _ in range(k):
            out = out * self
        return out

    def d_dp(self, i: int) -> "MomentaPolynomial":
        out = {}
        for a, c in self.terms.items():
            if a[i]:
                b = a[:i] + (a[i] - 1,) + a[i + 1:]
                out[b] = c * a[i]
        return MomentaPolynomial(self.chart, self.backend, out)

    def d_dx(self, i: int) -> "MomentaPolynomial":
        return MomentaPolynomial(
            self.chart, self.backend, {a: c.partial(i) for a, c in self.terms.items()}
        )

    def map_coefficients(self, fn) -> "MomentaPolynomial":
        out = {a: fn(c) for a, c in self.terms.items()}
        backend = next(iter(out.values())).backend if out else self.backend
        return MomentaPolynomial(self.chart, backend, out)

    def to_numeric(self) -> "MomentaPolynomial":
        return self.map_coefficients(ScalarField.to_numeric)

    # -- queries ------------------------------------------------------
    def is_zero_polynomial(self) -> bool:
        return not self.terms

    def degrees(self) -> set:
        return {sum(a) for a in self.terms}

    def homogeneous_degree(self):
        """Total momentum degree if homogeneous, else ``None`` (zero: ``None``)."""
        d = self.degrees()
        return d.pop() if len(d) == 1 else None

    def coefficient(self, exps) -> ScalarField:
        exps = tuple(exps)
        if exps in self.terms:
            return self.terms[exps]
        return ScalarField.zero(self.chart, self.backend)

    def evaluate(self, state: PhaseState):
        x, p = state.position, state.momentum
        total = 0
        for a, c in self.terms.items():
            mono = 1
            for pi, e in zip(p, a):
                if e:
                    mono = mono * pi**e
            total = total + c.evaluate(x) * mono
        return total

    def __repr__(self):
        if not self.terms:
            return "MomentaPolynomial(0)"
        parts = []
        for a in sorted(self.terms, reverse=True):
            mono = "*".join(
                f"p{i + 1}" if e == 1 else f"p{i + 1}^{e}" for i, e in enumerate(a) if e
            )
            parts.append(f"({self.terms[a].to_text()})" + (f"*{mono}" if mono else ""))
        return "MomentaPolynomial(" + " + ".join(parts) + ")"


def _sum(values):
    return field_sum(values)


def _merge(term_dicts):
    acc = {}
    for terms in term_dicts:
        for a, c in terms.items():
            acc.setdefault(a, []).append(c)
    return {a: _sum(v) for a, v in acc.items()}


def poly_evaluate(P: MomentaPolynomial, s: PhaseState):
    return P.evaluate(s)


def poisson_bracket(F: MomentaPolynomial, G: MomentaPolynomial) -> MomentaPolynomial:
    F._check(G)
    n = F.chart.dimension
    pieces = {}
    for i in range(n):
        fp, gx = F.d_dp(i), G.d_dx(i)
        fx, gp = F.d_dx(i), G.d_dp(i)
        for left, right, sign in ((fp, gx, 1), (fx, gp, -1)):
            if not left.terms or not right.terms:
                continue
            for (a, ca), (b, cb) in product(left.terms.items(), right.terms.items()):
                key = tuple(x + y for x, y in zip(a, b))
                term = ca * cb
                pieces.setdefault(key, []).append(term if sign > 0 else -term)
    return MomentaPolynomial(F.chart, F.backend, {k: _sum(v) for k, v in pieces.items()})


def sample_positions(chart, count, rng, box=(0.5, 2.0), fields=()):
    """``count`` random float positions at which every field in ``fields`` evaluates."""
    points = []
    attempts = 0
    while len(points) < count:
        attempts += 1
        if attempts > 50 * count:
            raise EvaluationError("could not find sample points avoiding poles")
        x = tuple(rng.uniform(box[0], box[1], size=chart.dimension))
        try:
            for f in fields:
                f.evaluate(x)
        except EvaluationError:
            continue
        points.append(x)
    return points


def is_zero(P: MomentaPolynomial, samples=32, rng=None, threshold=1e-9, box=(0.5, 2.0)) -> ZeroReport:
    """Zero test with the residual always reported.

    EXACT polynomials are zero iff no coefficient survives reduction; the
    residual is then 0, otherwise it is the largest sampled coefficient
    magnitude. NUMERIC polynomials are zero iff the largest sampled
    coefficient magnitude is below ``threshold``.
    """
    if not P.terms:
        return ZeroReport(True, 0.0)
    rng = np.random.default_rng(0) if rng is None else rng
    coeffs = list(P.terms.values())
    points = sample_positions(P.chart, samples, rng, box, coeffs)
    residual = max(abs(float(c.evaluate(x))) for x in points for c in coeffs)
    if P.backend is Backend.EXACT:
        return ZeroReport(False, residual)
    return ZeroReport(residual < threshold, residual)
