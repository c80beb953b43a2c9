import numpy as np
import pytest

from stackelkit.phase_poly import MomentaPolynomial
from stackelkit.scalarfield import Backend, Chart, parse_expression
from stackelkit.stackel import (
    StackelError,
    StackelMatrix,
    example,
    involution_matrix,
    random_stackel,
    round_trip_residuals,
    stackel_integrals,
    validate_stackel,
)
from stackelkit.tensorcalc import killing_residual, quadratic_to_poly

CHART = Chart(("x1", "x2"))


def f(text):
    return parse_expression(text, CHART)


def p(i):
    return MomentaPolynomial.momentum(CHART, i)


def polys(system):
    return [quadratic_to_poly(K) for K in system.integrals]


@pytest.mark.parametrize("name", ["flat", "polar", "liouville"])
def test_examples_validate(name):
    diag = validate_stackel(example(name))
    assert diag.ok and not diag.warnings


def test_univariance_violation():
    S = StackelMatrix.parse(CHART, [["1", "x2"], ["0", "1"]])
    diag = validate_stackel(S)
    assert [(e.code, e.indices) for e in diag.errors] == [("UNIVARIANCE_VIOLATION", (1, 2))]
    with pytest.raises(StackelError) as info:
        stackel_integrals(S)
    assert info.value.code == "UNIVARIANCE_VIOLATION" and info.value.indices == (1, 2)


def test_singular():
    S = StackelMatrix.parse(CHART, [["1", "2"], ["1/2", "1"]])
    assert [e.code for e in validate_stackel(S).errors] == ["SINGULAR"]
    num = StackelMatrix.parse(CHART, [["1", "2"], ["1/2", "1"]], Backend.NUMERIC)
    assert [e.code for e in validate_stackel(num).errors] == ["SINGULAR"]


def test_first_row_zero_warning():
    # S^-1 = [[1, 0], [0, 1]] has a zero in its first row
    diag = validate_stackel(StackelMatrix.parse(CHART, [["1", "0"], ["0", "1"]]))
    assert diag.ok
    assert [(w.code, w.indices) for w in diag.warnings] == [("FIRST_ROW_ZERO", (2,))]


def test_flat_system():
    I1, I2 = polys(stackel_integrals(example("flat")))
    assert (I1 - (p(0) ** 2 + p(1) ** 2)).terms == {}
    assert (I2 - p(1) ** 2).terms == {}


def test_polar_system():
    system = stackel_integrals(example("polar"))
    I1, I2 = polys(system)
    assert (I1 - (p(0) ** 2 + p(1) ** 2 * f("1/x1^2"))).terms == {}
    assert (I2 - p(1) ** 2).terms == {}
    assert system.integrals[0].components == system.metric.inverse_components


def test_liouville_system():
    I1, I2 = polys(stackel_integrals(example("liouville")))
    d = f("1/(x2 - x1)")
    assert (I1 - (p(1) ** 2 - p(0) ** 2) * d).terms == {}
    assert (I2 - (p(1) ** 2 * f("x1") - p(0) ** 2 * f("x2")) * d).terms == {}


def test_other_hamiltonian_row():
    system = stackel_integrals(example("liouville"), hamiltonian_row=1)
    assert system.hamiltonian_row == 1
    assert [K.label for K in system.integrals] == ["I2", "I1"]
    assert (polys(system)[0] - (p(1) ** 2 * f("x1") - p(0) ** 2 * f("x2")) * f("1/(x2 - x1)")).terms == {}
    assert all(not r.terms for r in round_trip_residuals(system))


def test_degenerate_hamiltonian_row_rejected():
    with pytest.raises(StackelError) as info:
        stackel_integrals(example("polar"), hamiltonian_row=1)
    assert info.value.code == "FIRST_ROW_ZERO" and info.value.indices == (1,)


def test_involution_examples():
    for name in ("flat", "polar"):
        inv = involution_matrix(polys(stackel_integrals(example(name))))
        assert all(z.flag for row in inv for z in row)
    inv = involution_matrix([p(0) ** 2, p(1) ** 2 * f("x1")])
    assert not inv[0][1].flag and not inv[1][0].flag and inv[0][0].flag


@pytest.mark.parametrize("n,seed", [(2, 0), (2, 1), (3, 2), (3, 3), (4, 4)])
def test_random_systems_exact_identities(n, seed):
    S = random_stackel(n, np.random.default_rng(seed))
    system = stackel_integrals(S)
    assert all(not r.terms for r in round_trip_residuals(system))
    for K in system.integrals:
        assert K.is_diagonal()
        assert killing_residual(system.metric, K).terms == {}
    assert all(z.flag for row in involution_matrix(polys(system)) for z in row)


def test_random_stackel_seeded():
    a = random_stackel(3, np.random.default_rng(5))
    b = random_stackel(3, np.random.default_rng(5))
    assert a.entries == b.entries
    for i, row in enumerate(a.entries):
        assert all(e.variables() <= {i} for e in row)


def test_numeric_backend_system():
    system = stackel_integrals(example("polar", Backend.NUMERIC))
    inv = involution_matrix(polys(system), rng=np.random.default_rng(0))
    assert all(z.flag for row in inv for z in row)
    x = (1.5, 0.2)
    assert np.allclose(system.metric.at(x), np.diag([1, 1 / 2.25]), atol=1e-15)
