"""Pointwise linear algebra behind the n = m argument.

Given a frame v_1..v_n diagonalizing the metric and the integrals, with
blocks B_1..B_m on which a generic combination is constant, write
V_j = sum_{s in B_j} eps_s u_s^2 so that 2H = V_1 + ... + V_m and
I = sum_j rho_j V_j. Then

    {2H, I} = sum_{s,j} 2 eps_s v_s(rho_j) u_s V_j + sum_{i,j} rho_j {V_i, V_j}

is cubic in the frame momenta u. Every coefficient must vanish, which is a
linear system A D = b for the n*m directional derivatives D[s, j] =
v_s(rho_j). The monomial u_t^2 u_s (t != s) carries only D[s, block(t)];
u_s^3 carries only D[s, block(s)]. Hence D is determined by the rho values
alone, so the integrals form a space of dimension at most m.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .framediag import BlockPartition, block_partition
from .phase_poly import MomentaPolynomial, poisson_bracket
from .scalarfield import Backend, ScalarField
from .tensorcalc import CombinationSpec, Metric, quadratic_to_poly


class InconsistentBlocksError(ValueError):
    pass


class SingularFrameError(ValueError):
    pass


class FrameField:
    """Smooth frame v_1..v_n given by rows of scalar fields, with a block partition and signs."""

    def __init__(self, chart, rows, blocks: BlockPartition, signs):
        n = chart.dimension
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError("frame needs n rows of n components")
        self.chart = chart
        self.rows = tuple(tuple(r) for r in rows)
        self.blocks = blocks
        self.signs = tuple(int(e) for e in signs)
        if sum(blocks.sizes) != n or len(self.signs) != n:
            raise InconsistentBlocksError("blocks and signs must cover the n frame vectors")
        self._brackets = {}

    @property
    def n(self):
        return self.chart.dimension

    def at(self, point) -> np.ndarray:
        return np.array([[float(f.evaluate(point)) for f in row] for row in self.rows])

    def linear_forms(self):
        """u_s = sum_i v_s^i p_i as momenta polynomials."""
        out = []
        for row in self.rows:
            backend = row[0].backend
            terms = {}
            for i, f in enumerate(row):
                exps = [0] * self.n
                exps[i] = 1
                terms[tuple(exps)] = f
            out.append(MomentaPolynomial(self.chart, backend, terms))
        return out

    def block_polynomials(self, blocks=None):
        blocks = blocks or self.blocks
        u = self.linear_forms()
        out = []
        for members in blocks.blocks():
            total = None
            for s in members:
                term = u[s] * u[s] * self.signs[s]
                total = term if total is None else total + term
            out.append(total)
        return out

    def structure_brackets(self, blocks=None):
        """{V_i, V_j} for all block pairs, computed symbolically and cached."""
        blocks = blocks or self.blocks
        if blocks not in self._brackets:
            V = self.block_polynomials(blocks)
            m = len(V)
            table = [[None] * m for _ in range(m)]
            for i in range(m):
                table[i][i] = MomentaPolynomial.zero(self.chart, V[i].backend)
                for j in range(i + 1, m):
                    table[i][j] = poisson_bracket(V[i], V[j])
                    table[j][i] = -table[i][j]
            self._brackets[blocks] = table
        return self._brackets[blocks]


def _sqrt_field(f: ScalarField) -> ScalarField:
    return f.to_numeric().apply("sqrt")


def coordinate_frame(metric: Metric, integrals, lam: CombinationSpec, point) -> FrameField:
    """Coordinate frame rescaled to unit length: v_j = sqrt(|g^{jj}|) d_j.

    Requires the metric and every integral to be diagonal in the chart.
    ``integrals`` excludes 2H; ``lam`` combines them to fix the blocks at
    ``point``.
    """
    n = metric.n
    for K in [metric, *integrals]:
        if not K.is_diagonal():
            raise SingularFrameError(f"{getattr(K, 'label', 'metric')} is not diagonal in the chart")
    g_diag = [float(f.evaluate(point)) for f in metric.diagonal()]
    if any(v == 0.0 for v in g_diag):
        raise SingularFrameError(f"g^jj vanishes at {tuple(point)}")
    signs = [1 if v > 0 else -1 for v in g_diag]
    zero = ScalarField.zero(metric.chart, Backend.NUMERIC)
    rows = []
    for j in range(n):
        entry = _sqrt_field(metric.diagonal()[j] * signs[j])
        rows.append([entry if i == j else zero for i in range(n)])
    combo = np.zeros(n)
    for c, K in zip(lam.coefficients, integrals):
        combo += float(c) * np.array([float(f.evaluate(point)) for f in K.diagonal()]) / g_diag
    blocks = block_partition(None, combo)
    return FrameField(metric.chart, rows, blocks, signs)


def frame_from_stackel(system, lam: CombinationSpec, point) -> FrameField:
    return coordinate_frame(system.metric, system.integrals[1:], lam, point)


def _upoly_mul(a, b):
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            key = tuple(x + y for x, y in zip(ea, eb))
            out[key] = out.get(key, 0.0) + ca * cb
    return out


def _unit(n, s):
    e = [0] * n
    e[s] = 1
    return tuple(e)


def monomials(n, degree):
    """Exponent tuples of the given total degree in graded lexicographic order."""
    out = set()
    for combo in combinations_with_replacement(range(n), degree):
        e = [0] * n
        for s in combo:
            e[s] += 1
        out.add(tuple(e))
    return sorted(out, reverse=True)


def to_frame_momenta(P: MomentaPolynomial, frame: FrameField, point) -> dict:
    """Numeric coefficients of P at ``point`` as a polynomial in the frame momenta u."""
    n = frame.n
    V = frame.at(point)
    if abs(np.linalg.det(V)) < 1e-300:
        raise SingularFrameError(f"frame is singular at {tuple(point)}")
    Vinv = np.linalg.inv(V)
    # p_i = sum_s Vinv[i, s] u_s
    p_forms = [{_unit(n, s): Vinv[i, s] for s in range(n) if Vinv[i, s] != 0.0} for i in range(n)]
    out = {}
    for a, c in P.terms.items():
        acc = {(0,) * n: float(c.evaluate(point))}
        for i, e in enumerate(a):
            for _ in range(e):
                acc = _upoly_mul(acc, p_forms[i])
        for k, v in acc.items():
            out[k] = out.get(k, 0.0) + v
    return {k: out[k] for k in sorted(out, reverse=True) if out[k] != 0.0}


@dataclass
class RhoSolution:
    derivatives: np.ndarray
    rank: int
    residual: float

    @property
    def unique(self):
        return self.rank == self.derivatives.size


@dataclass
class RhoSystem:
    point: tuple
    unknowns: list
    matrix: np.ndarray
    rhs: np.ndarray
    rho_values: tuple
    monomials: list
    blocks: BlockPartition
    isolating_rows: dict = field(default_factory=dict)

    def solve(self) -> RhoSolution:
        n = len(self.blocks.assignment)
        m = self.blocks.m
        D, _, rank, _ = np.linalg.lstsq(self.matrix, self.rhs, rcond=None)
        residual = float(np.max(np.abs(self.matrix @ D - self.rhs))) if self.rhs.size else 0.0
        return RhoSolution(D.reshape(n, m), int(rank), residual)

    def residual_of(self, derivatives) -> float:
        """max |A D - b| for a candidate derivative matrix D[s, j]."""
        D = np.asarray(derivatives, dtype=float).reshape(-1)
        return float(np.max(np.abs(self.matrix @ D - self.rhs)))


def _check_blocks(frame, blocks, m_values):
    n = frame.n
    if sum(blocks.sizes) != n or len(blocks.assignment) != n:
        raise InconsistentBlocksError("block sizes do not add up to n")
    if m_values is not None and len(m_values) != blocks.m:
        raise InconsistentBlocksError(f"{len(m_values)} rho values for {blocks.m} blocks")


def rho_values(I: MomentaPolynomial, frame: FrameField, point, blocks=None, tol=1e-8):
    """rho_1..rho_m of I = sum_j rho_j V_j at ``point``.

    Raises :class:`InconsistentBlocksError` if I is not diagonal in the
    frame or its coefficients are not constant on each block.
    """
    blocks = blocks or frame.blocks
    _check_blocks(frame, blocks, None)
    coeffs = to_frame_momenta(I, frame, point)
    n = frame.n
    diag = np.array([coeffs.get(tuple(2 * e for e in _unit(n, s)), 0.0) for s in range(n)])
    scale = 1 + float(np.max(np.abs(diag))) if diag.size else 1.0
    for k, v in coeffs.items():
        if max(k) < 2 and abs(v) > tol * scale:
            raise InconsistentBlocksError(f"integral is not diagonal in the frame at {tuple(point)}")
    rho = diag * np.array(frame.signs)
    out = []
    for members in blocks.blocks():
        vals = rho[list(members)]
        if np.max(vals) - np.min(vals) > tol * scale:
            raise InconsistentBlocksError(f"rho is not constant on block {[s + 1 for s in members]}")
        out.append(float(np.mean(vals)))
    return tuple(out)


def build_rho_system(g: Metric, frame: FrameField, blocks, rho, point) -> RhoSystem:
    """Assemble A D = b from the cubic coefficients of {2H, I} in the frame momenta.

    Rows follow the graded lexicographic order of cubic monomials in u.
    A row with a single unknown is scaled so that unknown has coefficient 1;
    ``isolating_rows`` maps each such monomial to the unknown (s, j) it isolates.
    """
    blocks = blocks or frame.blocks
    _check_blocks(frame, blocks, rho)
    n, m = frame.n, blocks.m
    eps = frame.signs

    metric_coeffs = to_frame_momenta(quadratic_to_poly(g.as_integral()), frame, point)
    scale = 1 + max(abs(v) for v in metric_coeffs.values())
    for s in range(n):
        key = tuple(2 * e for e in _unit(n, s))
        metric_coeffs[key] = metric_coeffs.get(key, 0.0) - eps[s]
    if max(abs(v) for v in metric_coeffs.values()) > 1e-9 * scale:
        raise InconsistentBlocksError(f"frame does not orthonormalize the metric at {tuple(point)}")

    rows = monomials(n, 3)
    index = {mono: r for r, mono in enumerate(rows)}
    unknowns = [(s, j) for s in range(n) for j in range(m)]
    A = np.zeros((len(rows), len(unknowns)))
    b = np.zeros(len(rows))

    # 2 eps_s u_s V_j, expanded directly in u
    for col, (s, j) in enumerate(unknowns):
        for t in blocks.blocks()[j]:
            e = [0] * n
            e[s] += 1
            e[t] += 2
            A[index[tuple(e)], col] += 2 * eps[s] * eps[t]

    table = frame.structure_brackets(blocks)
    for j in range(m):
        if rho[j] == 0.0:
            continue
        for i in range(m):
            if i == j:
                continue
            for mono, c in to_frame_momenta(table[i][j], frame, point).items():
                b[index[mono]] -= rho[j] * c

    isolating = {}
    for r, mono in enumerate(rows):
        nz = np.flatnonzero(A[r])
        if nz.size == 1:
            c = A[r, nz[0]]
            A[r] /= c
            b[r] /= c
            isolating[mono] = unknowns[nz[0]]
    return RhoSystem(tuple(point), unknowns, A, b, tuple(rho), rows, blocks, isolating)


@dataclass
class SolutionSpaceReport:
    bound: int
    dimension: int
    integral_count: int
    witness_ranks: list
    solvable: list
    counterexample: bool
    details: str = ""

    @property
    def witness_rank(self):
        return min(self.witness_ranks) if self.witness_ranks else 0


def solution_space_bound(g: Metric, frame: FrameField, integrals, sample_points, blocks=None) -> SolutionSpaceReport:
    """Certify dim(solution space) <= m and test n = m on the supplied integrals.

    ``integrals`` are momenta polynomials (normally 2H first). At every
    sample point the derivative system must be uniquely solvable, and the
    matrix of rho vectors must have rank equal to the number of integrals;
    a deficiency is returned as a counterexample, never raised.
    """
    blocks = blocks or frame.blocks
    pts = list(sample_points)
    if not pts:
        raise ValueError("need at least one sample point")
    n, m = frame.n, blocks.m
    ranks, solvable, notes = [], [], []
    for x in pts:
        R = np.array([rho_values(I, frame, x, blocks) for I in integrals])
        system = build_rho_system(g, frame, blocks, R[0], x)
        sol = system.solve()
        solvable.append(sol.unique)
        sv = np.linalg.svd(R, compute_uv=False)
        rank = int(np.sum(sv > 1e-9 * sv[0])) if sv.size and sv[0] > 0 else 0
        ranks.append(rank)
        if not sol.unique:
            notes.append(f"derivative system not uniquely solvable at {tuple(float(v) for v in x)}")
        if rank < len(integrals):
            notes.append(
                f"rho vectors of {len(integrals)} integrals have rank {rank} "
                f"at {tuple(float(v) for v in x)} (m = {m}, n = {n})"
            )
    counterexample = bool(notes) or m != n
    return SolutionSpaceReport(m, n, len(integrals), ranks, solvable, counterexample, "; ".join(notes))
