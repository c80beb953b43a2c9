"""Seeded random inputs shared by the test modules."""

from fractions import Fraction
from itertools import product

from stackelkit.phase_poly import MomentaPolynomial
from stackelkit.scalarfield import Backend, Chart, ScalarField


def random_coefficient(chart, rng, backend=Backend.EXACT):
    """a + b x_i + c x_j x_k, divided by (1 + x_l^2) half of the time."""
    n = chart.dimension
    x = [ScalarField.coordinate(chart, i, backend) for i in range(n)]
    a, b, c = (Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 4))) for _ in range(3))
    i, j, k, m = (int(v) for v in rng.integers(0, n, size=4))
    f = a + b * x[i] + c * x[j] * x[k]
    if rng.random() < 0.5:
        f = f / (1 + x[m] * x[m])
    return f


def random_polynomial(chart, rng, max_degree=2, density=0.5, backend=Backend.EXACT):
    n = chart.dimension
    terms = {}
    for exps in product(range(max_degree + 1), repeat=n):
        if sum(exps) <= max_degree and rng.random() < density:
            terms[exps] = random_coefficient(chart, rng, backend)
    if not terms:
        terms[(0,) * n] = random_coefficient(chart, rng, backend)
    return MomentaPolynomial(chart, backend, terms)


def random_triples(count, rng, max_degree=2):
    """(F, G, H) on charts of dimension 1..3, cycling through the dimensions."""
    out = []
    for k in range(count):
        chart = Chart.standard(1 + k % 3)
        out.append(tuple(random_polynomial(chart, rng, max_degree) for _ in range(3)))
    return out
