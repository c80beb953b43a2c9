"""Pointwise simultaneous diagonalization of quadratic integrals.

Conventions. Frame vectors v_s are tangent vectors (rows of
``PointFrame.basis``); the frame momenta are u_s = v_s^i p_i. A quadratic
integral K^{ij} p_i p_j becomes sum_s D_s u_s^2 in the frame, with
D = V^{-T} K V^{-1}. For the metric D_s = eps_s in {-1, +1}; for an
integral, D_s = rho_s * eps_s where rho_s is the eigenvalue of the
(1,1)-tensor K^i_j = K^{si} g_{sj} on v_s.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

NON_DIAGONALIZABLE = "NON_DIAGONALIZABLE"
VERIFICATION_FAILED = "VERIFICATION_FAILED"

# eigenvalue imaginary parts below this (relative) are treated as round-off
_IMAG_TOL = 1e-7
# a computed eigenspace must be annihilated to this relative accuracy
_NULL_TOL = 1e-6


class DiagonalizationFailure(Exception):
    def __init__(self, reason, detail=""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


@dataclass
class PointFrame:
    point: tuple
    basis: np.ndarray
    diagonals: np.ndarray
    signs: np.ndarray

    @property
    def n(self):
        return self.basis.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        """rho values: diagonals divided by the metric signs (row 0 is all ones)."""
        return self.diagonals / self.signs


@dataclass(frozen=True)
class BlockPartition:
    m: int
    sizes: tuple
    assignment: tuple

    def blocks(self):
        return [tuple(s for s, b in enumerate(self.assignment) if b == j) for j in range(self.m)]


@dataclass
class EigenvalueCheck:
    flag: bool
    min_gap: float
    eigenvalues: tuple = ()
    reason: str = ""

    def __iter__(self):
        return iter((self.flag, self.min_gap))


@dataclass
class DiagonalizationReport:
    point: tuple
    frame: PointFrame = None
    failure: str = ""
    partition: BlockPartition = None
    restriction_rank: int = 0
    min_eigen_gap: float = float("nan")
    eigen_check: EigenvalueCheck = None
    details: dict = field(default_factory=dict)


def _random_coefficients(k, rng):
    ints = rng.integers(1, 1001, size=k) * rng.choice([-1, 1], size=k)
    return np.array([float(Fraction(int(v), 1000)) for v in ints])


def _is_scalar(R, tol):
    k = R.shape[0]
    mu = np.trace(R) / k
    return np.linalg.norm(R - mu * np.eye(k)) <= tol * (1 + np.linalg.norm(R))


def _split(Ls, basis, rng, retries, tol):
    """Decompose span(basis) into common eigenspaces of all operators in Ls."""
    k = basis.shape[1]
    pinv = np.linalg.pinv(basis)
    restricted = [pinv @ L @ basis for L in Ls]
    active = [R for R in restricted if not _is_scalar(R, tol)]
    if k == 1 or not active:
        return [basis]
    last = ""
    for _attempt in range(1 + retries):
        c = _random_coefficients(len(active), rng)
        R = sum(ci * Ri for ci, Ri in zip(c, active))
        mus = np.linalg.eigvals(R)
        scale = 1 + np.max(np.abs(mus))
        if np.max(np.abs(mus.imag)) > _IMAG_TOL * scale:
            last = f"complex eigenvalues {np.round(mus, 12).tolist()}"
            continue
        mus = np.sort(mus.real)
        clusters = [[mus[0]]]
        for mu in mus[1:]:
            if mu - clusters[-1][-1] <= max(tol, 1e-8) * scale:
                clusters[-1].append(mu)
            else:
                clusters.append([mu])
        subspaces = []
        norm_R = 1 + np.linalg.norm(R)
        for cl in clusters:
            mult = len(cl)
            mu = float(np.mean(cl))
            _, sv, vt = np.linalg.svd(R - mu * np.eye(k))
            if sv[k - mult] > _NULL_TOL * norm_R:
                last = f"defective eigenvalue {mu:.12g} (multiplicity {mult})"
                subspaces = None
                break
            subspaces.append(vt[k - mult:].T)
        if subspaces is None:
            continue
        out = []
        for sub in subspaces:
            out.extend(_split(Ls, basis @ sub, rng, retries, tol))
        return out
    raise DiagonalizationFailure(NON_DIAGONALIZABLE, last)


def simultaneous_diagonalize(g_at, Ks_at, tol=1e-9, rng=None, retries=3, point=()) -> PointFrame:
    """Find a frame at one point in which g and every K in ``Ks_at`` are diagonal.

    A seeded random combination of the (1,1)-tensors K G is diagonalized;
    eigenspaces of dimension > 1 are split recursively by the remaining
    tensors. Each common eigenspace is then orthonormalized with respect
    to g (vectors with eps = +1 first). Raises :class:`DiagonalizationFailure`
    with reason NON_DIAGONALIZABLE (complex or defective after ``retries``
    fresh combinations) or VERIFICATION_FAILED (an off-diagonal entry in the
    frame exceeds ``tol`` times the tensor norm).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    g = np.asarray(g_at, dtype=float)
    Ks = [np.asarray(K, dtype=float) for K in Ks_at]
    n = g.shape[0]
    G = np.linalg.inv(g)
    Ls = [K @ G for K in Ks]
    blocks = _split(Ls, np.eye(n), rng, retries, tol)

    vectors, signs, keys = [], [], []
    for B in blocks:
        M = B.T @ G @ B
        M = (M + M.T) / 2
        w, Q = np.linalg.eigh(M)
        if np.min(np.abs(w)) <= 1e-12 * (1 + np.max(np.abs(w))):
            raise DiagonalizationFailure(NON_DIAGONALIZABLE, "metric degenerates on an eigenspace")
        C = B @ Q / np.sqrt(np.abs(w))
        for col in range(C.shape[1]):
            # the first component of (near) maximal magnitude is made positive
            mags = np.abs(C[:, col])
            lead = int(np.argmax(mags >= mags.max() * (1 - 1e-9)))
            if C[lead, col] < 0:
                C[:, col] = -C[:, col]
        eps = np.sign(w)
        pinv = np.linalg.pinv(C[:, :1])
        rho = tuple(float((pinv @ L @ C[:, :1])[0, 0]) for L in Ls)
        for col in np.argsort(-eps, kind="stable"):
            vectors.append(C[:, col])
            signs.append(eps[col])
            keys.append(tuple(-r for r in rho))
    order = sorted(range(n), key=lambda s: (keys[s], -signs[s]))
    V = np.array([vectors[s] for s in order])
    signs = np.array([signs[s] for s in order])

    Vinv = np.linalg.inv(V)
    diagonals = [signs.astype(float)]
    for label, T in [("metric", g)] + [(f"K{a + 1}", K) for a, K in enumerate(Ks)]:
        D = Vinv.T @ T @ Vinv
        off = D - np.diag(np.diag(D))
        bound = tol * max(np.linalg.norm(T), np.linalg.norm(D))
        if np.max(np.abs(off)) > bound:
            raise DiagonalizationFailure(
                VERIFICATION_FAILED, f"{label} off-diagonal residual {np.max(np.abs(off)):.3g}"
            )
        if label != "metric":
            diagonals.append(np.diag(D).copy())
    return PointFrame(tuple(point), V, np.array(diagonals), signs)


def block_partition(frame, combo_diag, tol=1e-9) -> BlockPartition:
    """Group frame indices whose combination eigenvalues agree within tol * (1 + max|entry|)."""
    values = [float(v) for v in combo_diag]
    thresh = tol * (1 + max(abs(v) for v in values))
    reps, assignment = [], []
    for v in values:
        for j, r in enumerate(reps):
            if abs(v - r) <= thresh:
                assignment.append(j)
                break
        else:
            reps.append(v)
            assignment.append(len(reps) - 1)
    sizes = tuple(assignment.count(j) for j in range(len(reps)))
    return BlockPartition(len(reps), sizes, tuple(assignment))


def restriction_rank(frame: PointFrame, tol=1e-9) -> int:
    """Numeric rank of the matrix of diagonal entries (metric row plus each integral)."""
    sv = np.linalg.svd(np.asarray(frame.diagonals, dtype=float), compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def distinct_eigenvalue_check(g_at, K_at, tol=1e-9) -> EigenvalueCheck:
    """Whether K^i_j = K^{si} g_{sj} has n pairwise distinct real eigenvalues."""
    L = np.asarray(K_at, dtype=float) @ np.linalg.inv(np.asarray(g_at, dtype=float))
    mus = np.linalg.eigvals(L)
    scale = 1 + np.max(np.abs(mus))
    if np.max(np.abs(mus.imag)) > _IMAG_TOL * scale:
        return EigenvalueCheck(False, float("nan"), tuple(complex(m) for m in mus),
                               "complex eigenvalues")
    real = np.sort(mus.real)
    gap = float(np.min(np.diff(real))) if real.size > 1 else float("inf")
    flag = gap > tol
    return EigenvalueCheck(flag, gap, tuple(float(m) for m in real),
                           "" if flag else f"eigenvalues coincide (gap {gap:.3g})")


def diagnose_point(g_at, integrals_at, lam, tol=1e-9, rng=None, point=()) -> DiagonalizationReport:
    """All pointwise checks for one point.

    ``integrals_at`` are the upper-index matrices of the integrals other
    than 2H, ``lam`` their combination coefficients.
    """
    report = DiagonalizationReport(tuple(point))
    combo = sum(float(c) * np.asarray(K, dtype=float) for c, K in zip(lam, integrals_at))
    report.eigen_check = distinct_eigenvalue_check(g_at, combo, tol)
    report.min_eigen_gap = report.eigen_check.min_gap
    try:
        frame = simultaneous_diagonalize(g_at, integrals_at, tol, rng, point=point)
    except DiagonalizationFailure as exc:
        report.failure = str(exc)
        return report
    report.frame = frame
    report.restriction_rank = restriction_rank(frame)
    combo_rho = sum(float(c) * frame.eigenvalues[a + 1] for a, c in enumerate(lam))
    report.partition = block_partition(frame, combo_rho, max(tol, 1e-9))
    return report
