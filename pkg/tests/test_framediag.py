import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stackelkit.framediag import (
    NON_DIAGONALIZABLE,
    DiagonalizationFailure,
    PointFrame,
    block_partition,
    diagnose_point,
    distinct_eigenvalue_check,
    restriction_rank,
    simultaneous_diagonalize,
)
from stackelkit.scalarfield import random_point
from stackelkit.stackel import example, random_stackel, stackel_integrals

I2 = np.eye(2)


def test_diagonal_input():
    frame = simultaneous_diagonalize(I2, [np.diag([2.0, 3.0])])
    assert np.allclose(np.abs(frame.basis), [[0, 1], [1, 0]])
    assert sorted(frame.diagonals[1]) == [2.0, 3.0]
    assert list(frame.signs) == [1, 1]


def test_symmetric_two_by_two():
    K = np.array([[2.0, 1.0], [1.0, 2.0]])
    frame = simultaneous_diagonalize(I2, [K])
    assert np.allclose(frame.diagonals[1], [3, 1], atol=1e-12)
    r = 1 / np.sqrt(2)
    assert np.allclose(frame.basis, [[r, r], [r, -r]], atol=1e-12)


def test_lorentzian_off_diagonal_fails():
    with pytest.raises(DiagonalizationFailure) as info:
        simultaneous_diagonalize(np.diag([1.0, -1.0]), [np.array([[0.0, 1.0], [1.0, 0.0]])])
    assert info.value.reason == NON_DIAGONALIZABLE


def test_lorentzian_diagonal_signs():
    g = np.diag([-1.0, 4.0])
    frame = simultaneous_diagonalize(g, [np.diag([2.0, 1.0])])
    assert sorted(frame.signs) == [-1, 1]
    V = frame.basis
    D = np.linalg.inv(V).T @ g @ np.linalg.inv(V)
    assert np.allclose(D, np.diag(frame.signs))


def test_degenerate_block_split_by_second_tensor():
    g = np.eye(3)
    K1 = np.diag([1.0, 1.0, 2.0])
    K2 = np.diag([5.0, 7.0, 7.0])
    frame = simultaneous_diagonalize(g, [K1, K2], rng=np.random.default_rng(0))
    assert restriction_rank(frame) == 3
    rows = {tuple(np.round(frame.eigenvalues[:, s], 9)) for s in range(3)}
    assert rows == {(1, 1, 5), (1, 1, 7), (1, 2, 7)}


@pytest.mark.parametrize("values,m,sizes", [
    ((3, 1), 2, (1, 1)),
    ((5, 5), 1, (2,)),
    ((0, 1, 1 + 1e-12), 2, (1, 2)),
])
def test_block_partition(values, m, sizes):
    part = block_partition(None, values, 1e-9)
    assert (part.m, part.sizes) == (m, sizes)
    again = block_partition(None, [values[[j for j, b in enumerate(part.assignment) if b == k][0]]
                                   for k in part.assignment], 1e-9)
    assert (again.m, again.sizes) == (m, sizes)


def test_restriction_rank_examples():
    polar = PointFrame((1, 0), np.eye(2), np.array([[1.0, 1.0], [0.0, 1.0]]), np.ones(2))
    assert restriction_rank(polar) == 2
    dup = PointFrame((1, 0), np.eye(2), np.array([[1.0, 2.0], [1.0, 2.0]]), np.ones(2))
    assert restriction_rank(dup) == 1
    one = PointFrame((1,), np.eye(1), np.array([[1.0]]), np.ones(1))
    assert restriction_rank(one) == 1


def test_distinct_eigenvalue_examples():
    g_polar = np.diag([1.0, 1 / 4])
    flag, gap = distinct_eigenvalue_check(g_polar, np.diag([0.0, 1.0]))
    assert flag and abs(gap - 4) < 1e-12
    assert tuple(distinct_eigenvalue_check(g_polar, g_polar)) == (False, 0.0)
    flag, gap = distinct_eigenvalue_check(np.eye(3), np.diag([1.0, 2.0, 3.0]))
    assert flag and abs(gap - 1) < 1e-12
    bad = distinct_eigenvalue_check(np.diag([1.0, -1.0]), np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert not bad.flag and "complex" in bad.reason


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100.0), st.integers(0, 2**16))
def test_distinct_flag_invariant_under_positive_scaling(c, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3))
    g = A @ A.T + 3 * np.eye(3)
    B = rng.normal(size=(3, 3))
    K = B + B.T
    assert distinct_eigenvalue_check(g, K).flag == distinct_eigenvalue_check(g, c * K).flag


def _systems():
    out = [stackel_integrals(example(name)) for name in ("flat", "polar", "liouville")]
    rng = np.random.default_rng(31)
    out += [stackel_integrals(random_stackel(n, rng)) for n in (2, 3, 3)]
    return out


@pytest.mark.parametrize("system", _systems())
def test_stackel_systems_pointwise(system):
    rng = np.random.default_rng(4)
    lam = rng.uniform(-1, 1, size=system.metric.n - 1)
    done = 0
    while done < 32:
        x = random_point(system.chart, rng)
        try:
            mats = [K.at(x) for K in system.integrals]
        except ArithmeticError:
            continue
        if not np.all(np.isfinite(mats)):
            continue
        rep = diagnose_point(mats[0], mats[1:], lam, rng=rng, point=x)
        assert rep.frame is not None, rep.failure
        assert rep.restriction_rank == system.metric.n
        assert rep.eigen_check.flag
        # frame verification: every tensor diagonal in the frame
        Vinv = np.linalg.inv(rep.frame.basis)
        for T in mats:
            D = Vinv.T @ T @ Vinv
            off = D - np.diag(np.diag(D))
            assert np.abs(off).max() <= 1e-9 * max(np.linalg.norm(T), np.linalg.norm(D))
        done += 1
