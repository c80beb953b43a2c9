"""Symmetric (2,0)-tensor fields: the inverse metric and quadratic integrals."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .phase_poly import MomentaPolynomial, poisson_bracket
from .scalarfield import Backend, Chart, EvaluationError, PoleError, ScalarField


class SingularMetricError(PoleError):
    pass


def _as_field(chart, backend, value):
    if isinstance(value, ScalarField):
        return value
    return ScalarField.constant(chart, value, backend)


def _field_matrix(chart, backend, rows):
    n = chart.dimension
    rows = [list(r) for r in rows]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ValueError(f"expected an {n}x{n} matrix")
    return tuple(tuple(_as_field(chart, backend, v) for v in r) for r in rows)


def _agree_numerically(a, b, probes=8):
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(10 * probes):
        x = rng.uniform(0.5, 2.0, size=a.chart.dimension)
        try:
            va, vb = a.evaluate(x), b.evaluate(x)
        except EvaluationError:
            continue
        if abs(va - vb) > 1e-12 * (1 + abs(va)):
            return False
        checked += 1
        if checked == probes:
            return True
    return checked > 0


def _check_symmetric(m, what):
    n = len(m)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = m[i][j], m[j][i]
            if a is b:
                continue
            if a.backend is Backend.EXACT:
                same = a == b
            else:
                same = a.to_text() == b.to_text() or _agree_numerically(a, b)
            if not same:
                raise ValueError(f"{what} is not symmetric at ({i + 1},{j + 1})")


def determinant(m):
    """Determinant of a square matrix of fields by memoized Laplace expansion."""
    n = len(m)

    @lru_cache(maxsize=None)
    def det(row, cols):
        if row == n:
            return None  # empty product
        total = None
        sign = 1
        for k, c in enumerate(cols):
            entry = m[row][c]
            if entry.is_zero():
                sign = -sign
                continue
            rest = cols[:k] + cols[k + 1:]
            minor = det(row + 1, rest)
            term = entry if minor is None else entry * minor
            term = term if sign > 0 else -term
            total = term if total is None else total + term
            sign = -sign
        if total is None:
            total = m[0][0] * 0
        return total

    result = det(0, tuple(range(n)))
    return m[0][0] * 0 + 1 if result is None else result


def inverse(m):
    """Symbolic inverse via the adjugate; raises if the determinant is identically zero."""
    n = len(m)
    d = determinant(m)
    if d.is_zero():
        raise SingularMetricError("matrix is singular (determinant is identically zero)")
    if n == 1:
        return ((1 / d,),)
    inv = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[m[a][b] for b in range(n) if b != i] for a in range(n) if a != j]
            c = determinant(minor)
            inv[i][j] = (c if (i + j) % 2 == 0 else -c) / d
    return tuple(tuple(r) for r in inv)


def evaluate_matrix(m, point) -> np.ndarray:
    return np.array([[float(f.evaluate(point)) for f in row] for row in m])


class SymmetricTensor:
    """Common base: an n x n symmetric matrix of scalar fields on a chart."""

    def __init__(self, chart: Chart, components, backend=None):
        if backend is None:
            backend = _infer_backend(components)
        self.chart = chart
        self.backend = Backend(backend)
        self.components = _field_matrix(chart, self.backend, components)
        _check_symmetric(self.components, type(self).__name__)

    @property
    def n(self):
        return self.chart.dimension

    def at(self, point) -> np.ndarray:
        return evaluate_matrix(self.components, point)

    def is_diagonal(self) -> bool:
        return all(
            self.components[i][j].is_zero()
            for i in range(self.n) for j in range(self.n) if i != j
        )

    def diagonal(self):
        return tuple(self.components[i][i] for i in range(self.n))

    def to_numeric(self):
        n = self.n
        comps = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                comps[i][j] = comps[j][i] = self.components[i][j].to_numeric()
        return self._rebuild(comps, Backend.NUMERIC)


def _infer_backend(components):
    for row in components:
        for v in row:
            if isinstance(v, ScalarField):
                return v.backend
    return Backend.EXACT


class Metric(SymmetricTensor):
    """A (pseudo-)Riemannian metric stored through its inverse components g^{ij}."""

    def __init__(self, chart, inverse_components, backend=None):
        super().__init__(chart, inverse_components, backend)
        if self.backend is Backend.EXACT and determinant(self.components).is_zero():
            raise SingularMetricError("inverse metric has identically vanishing determinant")
        self._lower = None

    @property
    def inverse_components(self):
        return self.components

    def _rebuild(self, comps, backend):
        return Metric(self.chart, comps, backend)

    def lower(self):
        """g_{ij}, the symbolic matrix inverse of g^{ij} (cached)."""
        if self._lower is None:
            self._lower = inverse(self.components)
        return self._lower

    def lower_at(self, point) -> np.ndarray:
        up = self.at(point)
        if abs(np.linalg.det(up)) == 0.0:
            raise SingularMetricError(f"metric is singular at {tuple(point)}")
        return np.linalg.inv(up)

    def as_integral(self, label="2H") -> "QuadraticIntegral":
        return QuadraticIntegral(self.chart, self.components, label, self.backend)

    def hamiltonian(self) -> MomentaPolynomial:
        """H = 1/2 g^{ij} p_i p_j."""
        return quadratic_to_poly(self.as_integral()) * Fraction(1, 2)


class QuadraticIntegral(SymmetricTensor):
    def __init__(self, chart, components, label="I", backend=None):
        super().__init__(chart, components, backend)
        self.label = label

    def _rebuild(self, comps, backend):
        return QuadraticIntegral(self.chart, comps, self.label, backend)

    def __repr__(self):
        return f"QuadraticIntegral({self.label!r}, n={self.n}, {self.backend.value})"


@dataclass(frozen=True)
class CombinationSpec:
    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(Fraction(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if not coeffs or all(c == 0 for c in coeffs):
            raise ValueError("combination coefficients must not all vanish")

    @classmethod
    def random(cls, count: int, rng, scale=1000) -> "CombinationSpec":
        """Seeded rational coefficients in [-1, 1] with denominator ``scale``, none zero."""
        while True:
            ints = rng.integers(-scale, scale + 1, size=count)
            if all(ints != 0):
                return cls(tuple(Fraction(int(v), scale) for v in ints))

    def __len__(self):
        return len(self.coefficients)


def quadratic_to_poly(K: SymmetricTensor) -> MomentaPolynomial:
    """K^{ij} p_i p_j, with off-diagonal entries doubled."""
    n = K.n
    terms = {}
    for i in range(n):
        for j in range(i, n):
            c = K.components[i][j]
            if c.is_zero():
                continue
            exps = [0] * n
            exps[i] += 1
            exps[j] += 1
            terms[tuple(exps)] = c if i == j else c * 2
    return MomentaPolynomial(K.chart, K.backend, terms)


def killing_residual(g: Metric, K: QuadraticIntegral) -> MomentaPolynomial:
    """{g^{ij} p_i p_j, K^{kl} p_k p_l}; zero iff K is a Killing tensor of g."""
    return poisson_bracket(quadratic_to_poly(g.as_integral()), quadratic_to_poly(K))


def one_one(K: SymmetricTensor, g: Metric):
    """The (1,1)-tensor K^i_j = K^{si} g_{sj} as a matrix of fields."""
    low = g.lower()
    n = K.n
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            terms = [K.components[s][i] * low[s][j] for s in range(n)
                     if not K.components[s][i].is_zero() and not low[s][j].is_zero()]
            total = terms[0] if terms else ScalarField.zero(K.chart, K.backend)
            for t in terms[1:]:
                total = total + t
            row.append(total)
        out.append(tuple(row))
    return tuple(out)


def one_one_at(K_at, g_at) -> np.ndarray:
    """Numeric K^i_j at a point from the numeric upper-index matrices."""
    return np.asarray(K_at) @ np.linalg.inv(np.asarray(g_at))


def generic_combination(Ks, lam: CombinationSpec, label="I") -> QuadraticIntegral:
    Ks = list(Ks)
    if len(Ks) != len(lam):
        raise ValueError(f"{len(Ks)} integrals but {len(lam)} combination coefficients")
    if not Ks:
        raise ValueError("need at least one integral")
    n = Ks[0].n
    comps = []
    for i in range(n):
        row = []
        for j in range(n):
            total = None
            for K, c in zip(Ks, lam.coefficients):
                if c == 0 or K.components[i][j].is_zero():
                    continue
                term = K.components[i][j] * c
                total = term if total is None else total + term
            row.append(total if total is not None else ScalarField.zero(Ks[0].chart, Ks[0].backend))
        comps.append(row)
    return QuadraticIntegral(Ks[0].chart, comps, label, Ks[0].backend)
