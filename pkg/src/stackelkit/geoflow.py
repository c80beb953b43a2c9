"""Geodesic flow of H = 1/2 g^{ij} p_i p_j by the implicit midpoint rule."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .phase_poly import MomentaPolynomial, PhaseState
from .scalarfield import EvaluationError, PoleError


class FlowError(RuntimeError):
    def __init__(self, message, step=None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


class NoConvergenceError(FlowError):
    pass


def _compile_polys(polys, n):
    """One Python function (x, p) -> tuple of values of the given momenta polynomials."""
    ns = {}
    exprs = []
    for P in polys:
        parts = []
        for a, c in P.terms.items():
            name = f"c{len(ns)}"
            ns[name] = c.compiled()
            mono = "".join(
                f"*p[{i}]" if e == 1 else f"*p[{i}]**{e}" for i, e in enumerate(a) if e
            )
            parts.append(f"{name}(x){mono}")
        exprs.append(" + ".join(parts) if parts else "0.0")
    src = f"def _f(x, p):\n    return ({', '.join(exprs)},)\n"
    exec(compile(src, "<stackelkit.geoflow>", "exec"), ns)
    return ns["_f"]


class CompiledHamiltonian:
    """Gradient and Hessian of a momenta polynomial H, compiled to Python code."""

    def __init__(self, H: MomentaPolynomial):
        n = H.chart.dimension
        self.H = H
        self.n = n
        dp = [H.d_dp(i) for i in range(n)]
        dx = [H.d_dx(i) for i in range(n)]
        hess = []
        for i in range(n):
            hess += [dp[i].d_dx(j) for j in range(n)]  # d2H / dp_i dx_j
            hess += [dp[i].d_dp(j) for j in range(n)]  # d2H / dp_i dp_j
        for i in range(n):
            hess += [dx[i].d_dx(j) for j in range(n)]  # d2H / dx_i dx_j
            hess += [dx[i].d_dp(j) for j in range(n)]  # d2H / dx_i dp_j
        self._grad = _compile_polys(dp + dx, n)
        self._hess = _compile_polys(hess, n)
        self._value = _compile_polys([H], n)

    @classmethod
    def of(cls, H):
        return H if isinstance(H, cls) else cls(H)

    def _call(self, fn, z):
        n = self.n
        z = z.tolist() if isinstance(z, np.ndarray) else [float(v) for v in z]
        try:
            out = np.array(fn(z[:n], z[n:]), dtype=float)
        except ZeroDivisionError as exc:
            raise PoleError(f"pole at x = {tuple(z[:n])}") from exc
        except (ValueError, OverflowError) as exc:
            raise EvaluationError(f"cannot evaluate at x = {tuple(z[:n])}: {exc}") from exc
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"non-finite value at x = {tuple(z[:n])}")
        return out

    def value(self, z):
        return self._call(self._value, z)[0]

    def vector_field(self, z):
        """(dH/dp, -dH/dx) at the flat state vector z = (x, p)."""
        g = self._call(self._grad, z)
        n = self.n
        return np.concatenate([g[:n], -g[n:]])

    def jacobian(self, z):
        n = self.n
        h = self._call(self._hess, z).reshape(2 * n, 2 * n)
        h[n:] = -h[n:]
        return h


def hamiltonian_vector_field(H, s: PhaseState):
    """dx/dt = dH/dp and dp/dt = -dH/dx at state s."""
    ch = CompiledHamiltonian.of(H)
    z = np.concatenate([np.asarray(s.position, float), np.asarray(s.momentum, float)])
    v = ch.vector_field(z)
    return tuple(float(c) for c in v[: ch.n]), tuple(float(c) for c in v[ch.n:])


def _midpoint(ch, z0, dt, newton_tol, max_iter):
    if dt == 0:
        return z0.copy()
    dim = z0.size
    eye = np.eye(dim)
    z = z0 + dt * ch.vector_field(z0)
    for _ in range(max_iter):
        mid = 0.5 * (z0 + z)
        F = z - z0 - dt * ch.vector_field(mid)
        J = eye - 0.5 * dt * ch.jacobian(mid)
        try:
            if np.linalg.cond(J) > 1e12:
                raise np.linalg.LinAlgError("ill-conditioned")
            delta = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            delta = F  # fixed-point update z <- z0 + dt X(mid)
        z = z - delta
        if not np.all(np.isfinite(z)):
            break
        if np.max(np.abs(delta)) <= newton_tol * max(1.0, np.max(np.abs(z))):
            return z
    raise NoConvergenceError(f"implicit midpoint did not converge in {max_iter} iterations")


def implicit_midpoint_step(H, s: PhaseState, dt, newton_tol=1e-12, max_iter=50) -> PhaseState:
    """Solve s' = s + dt X_H((s + s')/2) by Newton iteration with the analytic Jacobian."""
    ch = CompiledHamiltonian.of(H)
    z0 = np.concatenate([np.asarray(s.position, float), np.asarray(s.momentum, float)])
    z = _midpoint(ch, z0, dt, newton_tol, max_iter)
    return PhaseState(tuple(z[: ch.n]), tuple(z[ch.n:]))


@dataclass
class Trajectory:
    dt: float
    times: np.ndarray
    positions: np.ndarray
    momenta: np.ndarray
    monitor_values: np.ndarray = None

    @property
    def states(self):
        return [PhaseState(tuple(x), tuple(p)) for x, p in zip(self.positions, self.momenta)]

    def __len__(self):
        return len(self.times)


@dataclass
class DriftEntry:
    label: str
    initial: float
    max_abs_drift: float
    relative_drift: float


@dataclass
class DriftReport:
    entries: list = field(default_factory=list)

    def __getitem__(self, k):
        return self.entries[k]

    def max_relative(self):
        return max((e.relative_drift for e in self.entries), default=0.0)


def integrate(H, s0: PhaseState, dt, steps, monitors=(), labels=None,
              newton_tol=1e-12, max_iter=50):
    """``steps`` midpoint steps from s0, recording every state and the monitors.

    The relative drift of a monitor is max|I(t) - I(0)| / |I(0)|, or the
    absolute drift when I(0) = 0.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    ch = CompiledHamiltonian.of(H)
    n = ch.n
    monitors = list(monitors)
    labels = list(labels) if labels is not None else [f"I{k + 1}" for k in range(len(monitors))]
    mon = _compile_polys(monitors, n) if monitors else None

    Z = np.empty((steps + 1, 2 * n))
    Z[0] = np.concatenate([np.asarray(s0.position, float), np.asarray(s0.momentum, float)])
    values = np.empty((steps + 1, len(monitors)))

    def record(k):
        if mon is None:
            return
        try:
            values[k] = mon(Z[k, :n].tolist(), Z[k, n:].tolist())
        except ZeroDivisionError as exc:
            raise FlowError("pole while evaluating monitors", k) from exc

    record(0)
    for k in range(steps):
        try:
            Z[k + 1] = _midpoint(ch, Z[k], dt, newton_tol, max_iter)
        except NoConvergenceError as exc:
            raise NoConvergenceError(str(exc), k + 1) from exc
        except EvaluationError as exc:
            raise FlowError(str(exc), k + 1) from exc
        record(k + 1)

    times = dt * np.arange(steps + 1)
    traj = Trajectory(dt, times, Z[:, :n].copy(), Z[:, n:].copy(), values)
    report = DriftReport()
    for k, label in enumerate(labels):
        col = values[:, k]
        drift = float(np.max(np.abs(col - col[0])))
        rel = float(drift / abs(col[0])) if col[0] != 0 else drift
        report.entries.append(DriftEntry(label, float(col[0]), drift, rel))
    return traj, report


def write_csv(path, traj: Trajectory):
    """Columns t, x1..xn, p1..pn, I1..Ik with 17 significant digits."""
    n = traj.positions.shape[1]
    k = 0 if traj.monitor_values is None else traj.monitor_values.shape[1]
    header = (["t"] + [f"x{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]
              + [f"I{j + 1}" for j in range(k)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in range(len(traj.times)):
            row = [traj.times[r], *traj.positions[r], *traj.momenta[r]]
            if k:
                row += list(traj.monitor_values[r])
            w.writerow([f"{v:.17g}" for v in row])
