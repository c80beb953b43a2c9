"""Stäckel construction: S I = P with row i of S depending on x^i only."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .phase_poly import MomentaPolynomial, ZeroReport, is_zero, poisson_bracket
from .scalarfield import Backend, Chart, EvaluationError, ScalarField, parse_expression, variable_support
from .tensorcalc import Metric, QuadraticIntegral, determinant, inverse, quadratic_to_poly


class StackelError(ValueError):
    """Carries a diagnostic ``code`` and 1-based ``indices``."""

    def __init__(self, code, indices=(), message=""):
        self.code = code
        self.indices = tuple(indices)
        label = f"{code}({','.join(str(i) for i in self.indices)})" if self.indices else code
        super().__init__(f"{label}: {message}" if message else label)


@dataclass(frozen=True)
class Issue:
    code: str
    indices: tuple = ()
    message: str = ""

    def __str__(self):
        idx = f"({','.join(str(i) for i in self.indices)})" if self.indices else ""
        return f"{self.code}{idx}" + (f": {self.message}" if self.message else "")


@dataclass
class StackelDiagnostics:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_first(self):
        if self.errors:
            e = self.errors[0]
            raise StackelError(e.code, e.indices, e.message)


class StackelMatrix:
    def __init__(self, chart: Chart, entries, backend=None):
        n = chart.dimension
        rows = [list(r) for r in entries]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError(f"expected an {n}x{n} Stäckel matrix")
        if backend is None:
            backend = next(
                (v.backend for r in rows for v in r if isinstance(v, ScalarField)), Backend.EXACT
            )
        self.chart = chart
        self.backend = Backend(backend)
        self.entries = tuple(
            tuple(v if isinstance(v, ScalarField) else ScalarField.constant(chart, v, self.backend)
                  for v in r)
            for r in rows
        )

    @classmethod
    def parse(cls, chart, rows, backend=Backend.EXACT):
        return cls(chart, [[parse_expression(str(s), chart, backend) for s in r] for r in rows], backend)

    @property
    def n(self):
        return self.chart.dimension


@dataclass
class StackelSystem:
    metric: Metric
    integrals: list
    source: StackelMatrix
    hamiltonian_row: int = 0

    @property
    def chart(self):
        return self.metric.chart

    def polynomials(self):
        return [quadratic_to_poly(K) for K in self.integrals]


def validate_stackel(S: StackelMatrix, hamiltonian_row: int = 0, rng=None) -> StackelDiagnostics:
    """Univariance of rows, non-degeneracy, and the no-zeros condition on the Hamiltonian row of S^-1."""
    diag = StackelDiagnostics()
    n = S.n
    for i in range(n):
        for j in range(n):
            extra = variable_support(S.entries[i][j]) - {i}
            if extra:
                names = ", ".join(S.chart.coordinate_names[k] for k in sorted(extra))
                diag.errors.append(
                    Issue("UNIVARIANCE_VIOLATION", (i + 1, j + 1), f"entry depends on {names}")
                )
    if diag.errors:
        return diag
    if not _nonsingular(S, rng):
        diag.errors.append(Issue("SINGULAR", (), "det S vanishes"))
        return diag
    inv = inverse(S.entries)
    for j in range(n):
        if _vanishes(inv[hamiltonian_row][j], rng):
            diag.warnings.append(
                Issue("FIRST_ROW_ZERO", (j + 1,),
                      f"(S^-1)[{hamiltonian_row + 1},{j + 1}] is zero; that row cannot serve as 2H")
            )
    return diag


def _vanishes(f: ScalarField, rng) -> bool:
    if f.backend is Backend.EXACT:
        return f.is_zero()
    return is_zero(MomentaPolynomial.scalar(f), samples=16, rng=_rng(rng)).flag


def _nonsingular(S: StackelMatrix, rng) -> bool:
    d = determinant(S.entries)
    if S.backend is Backend.EXACT:
        return not d.is_zero()
    rng = _rng(rng)
    values = []
    while len(values) < 16:
        x = rng.uniform(0.5, 2.0, size=S.n)
        try:
            values.append(abs(d.evaluate(x)))
        except EvaluationError:
            continue
    return min(values) > 1e-9


def _rng(rng):
    return np.random.default_rng(0) if rng is None else rng


def stackel_integrals(S: StackelMatrix, hamiltonian_row: int = 0) -> StackelSystem:
    """Solve S I = P for the n diagonal quadratic integrals.

    Integral alpha has K^{jj} = (S^-1)[alpha, j]. The integral from
    ``hamiltonian_row`` becomes 2H and is listed first; the others keep
    their row order.
    """
    diag = validate_stackel(S, hamiltonian_row)
    diag.raise_first()
    if diag.warnings:
        # a zero on the Hamiltonian row leaves the metric degenerate
        w = diag.warnings[0]
        raise StackelError(w.code, w.indices, w.message)
    inv = inverse(S.entries)
    n = S.n
    zero = ScalarField.zero(S.chart, S.backend)
    integrals = []
    for alpha in range(n):
        comps = [[inv[alpha][j] if i == j else zero for j in range(n)] for i in range(n)]
        integrals.append(QuadraticIntegral(S.chart, comps, f"I{alpha + 1}", S.backend))
    order = [hamiltonian_row] + [a for a in range(n) if a != hamiltonian_row]
    integrals = [integrals[a] for a in order]
    metric = Metric(S.chart, integrals[0].components, S.backend)
    return StackelSystem(metric, integrals, S, hamiltonian_row)


def involution_matrix(Is, samples=32, rng=None):
    """Zero reports for every pairwise bracket {I_a, I_b}."""
    Is = list(Is)
    k = len(Is)
    out = [[None] * k for _ in range(k)]
    for a in range(k):
        out[a][a] = ZeroReport(True, 0.0)
        for b in range(a + 1, k):
            report = is_zero(poisson_bracket(Is[a], Is[b]), samples=samples, rng=rng)
            out[a][b] = out[b][a] = report
    return out


def round_trip_residuals(system: StackelSystem):
    """Componentwise S . I - P, in the original row order of S; all zero for a correct system."""
    S = system.source
    n = S.n
    by_row = [None] * n
    order = [system.hamiltonian_row] + [a for a in range(n) if a != system.hamiltonian_row]
    for pos, alpha in enumerate(order):
        by_row[alpha] = quadratic_to_poly(system.integrals[pos])
    out = []
    for i in range(n):
        total = -(MomentaPolynomial.momentum(S.chart, i, S.backend) ** 2)
        for alpha in range(n):
            total = total + by_row[alpha] * S.entries[i][alpha]
        out.append(total)
    return out


EXAMPLES = {
    "flat": (("x1", "x2"), [["1", "-1"], ["0", "1"]]),
    "polar": (("x1", "x2"), [["1", "-1/x1^2"], ["0", "1"]]),
    "liouville": (("x1", "x2"), [["x1", "-1"], ["x2", "-1"]]),
}


def example(name: str, backend=Backend.EXACT) -> StackelMatrix:
    names, rows = EXAMPLES[name]
    return StackelMatrix.parse(Chart(names), rows, backend)


def random_stackel(n: int, rng, backend=Backend.EXACT, max_tries=100) -> StackelMatrix:
    """Random valid S with entries a + b x_i + c x_i^2 and small rational a, b, c.

    Retries until S is non-degenerate and the first row of S^-1 has no
    zero entries.
    """
    chart = Chart.standard(n)
    for _ in range(max_tries):
        rows = []
        for i in range(n):
            x = ScalarField.coordinate(chart, i, backend)
            row = []
            for _j in range(n):
                a, b, c = (Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 4))) for _ in range(3))
                row.append(a + b * x + c * x * x)
            rows.append(row)
        S = StackelMatrix(chart, rows, backend)
        if validate_stackel(S).ok and not validate_stackel(S).warnings:
            return S
    raise RuntimeError("could not draw a valid random Stäckel matrix")
