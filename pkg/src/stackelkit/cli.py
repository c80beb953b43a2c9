"""Command-line front end.

Exit codes: 0 every check passed, 1 a check failed or a counterexample was
found, 2 the input could not be read.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .framediag import diagnose_point
from .geoflow import FlowError, integrate, write_csv
from .phase_poly import PhaseState, is_zero
from .scalarfield import EvaluationError, ExpressionError, random_point
from .stackel import StackelError, involution_matrix, stackel_integrals, validate_stackel
from .systemfile import (
    SchemaError,
    digest,
    load_stackel,
    load_system,
    read_json,
    system_to_json,
)
from .tensorcalc import CombinationSpec, killing_residual, quadratic_to_poly
from .theoremlab import InconsistentBlocksError, SingularFrameError, coordinate_frame, solution_space_bound


class InputError(Exception):
    pass


def _num(v):
    if v is None:
        return None
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        return str(v)
    return v


class Report:
    def __init__(self, command, raw, seed, parameters):
        self.data = {
            "command": command,
            "inputs_digest": digest(raw) if raw is not None else None,
            "seed": seed,
            "parameters": parameters,
            "checks": [],
            "summary": {},
        }

    def check(self, name, passed, residual=None, details=""):
        self.data["checks"].append(
            {"name": name, "passed": bool(passed), "residual": _num(residual), "details": details}
        )

    @property
    def passed(self):
        return all(c["passed"] for c in self.data["checks"])

    def dumps(self):
        self.data["passed"] = self.passed
        return json.dumps(self.data, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(report, out):
    text = report.dumps()
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args):
    try:
        data, raw = read_json(args.file)
        system = load_system(data, args.backend)
    except OSError as exc:
        raise InputError(f"cannot read {args.file}: {exc}") from exc
    except (SchemaError, ExpressionError) as exc:
        raise InputError(str(exc)) from exc
    except (ValueError, ArithmeticError) as exc:
        raise InputError(str(exc)) from exc
    return system, raw


def _box(text):
    lo, hi = (float(v) for v in text.split(","))
    return lo, hi


def _sample(system, count, rng, box):
    """Seeded rational points avoiding poles and metric degeneracy."""
    tensors = [system.metric] + list(system.integrals)
    points, rejected = [], 0
    while len(points) < count:
        if rejected > 100 * count:
            raise InputError("could not find sample points away from poles; try --box")
        x = random_point(system.chart, rng, box)
        try:
            mats = [T.at(x) for T in tensors]
        except EvaluationError:
            rejected += 1
            continue
        if not all(np.all(np.isfinite(M)) for M in mats) or np.linalg.det(mats[0]) == 0:
            rejected += 1
            continue
        points.append((x, mats))
    return points, rejected


def _lam(system, rng):
    if not system.integrals:
        return None
    return CombinationSpec.random(len(system.integrals), rng)


def _fmt_point(x):
    return "(" + ", ".join(str(v) for v in x) + ")"


def _pointwise(report, system, points, lam, tol, rng, prefix):
    ranks, gaps, ms = [], [], []
    n = system.n
    for k, (x, mats) in enumerate(points):
        tag = f"{prefix}[{k}] {_fmt_point(x)}"
        coeffs = lam.coefficients if lam is not None else ()
        if lam is None:
            # n = 1: 2H alone, nothing to combine
            report.check(f"{tag} diagonalize", True, 0.0, "single tensor")
            report.check(f"{tag} restriction_rank", n == 1, None, "rank 1")
            ranks.append(1)
            ms.append(1)
            continue
        rep = diagnose_point(mats[0], mats[1:], coeffs, tol, rng, point=x)
        if rep.frame is None:
            report.check(f"{tag} diagonalize", False, None, rep.failure)
        else:
            report.check(f"{tag} diagonalize", True, 0.0, "")
            report.check(f"{tag} restriction_rank", rep.restriction_rank == n,
                         rep.restriction_rank, f"rank {rep.restriction_rank} of {n}")
            ranks.append(rep.restriction_rank)
            ms.append(rep.partition.m)
        ec = rep.eigen_check
        report.check(f"{tag} distinct_eigenvalues", ec.flag, ec.min_gap, ec.reason)
        if ec.flag or not math.isnan(ec.min_gap):
            gaps.append(ec.min_gap)
    return ranks, gaps, ms


def cmd_verify(args):
    system, raw = _load(args)
    report = Report("verify", raw, args.seed, {
        "samples": args.samples, "tol": args.tol, "box": list(args.box), "backend": system.backend.value,
    })
    rng = np.random.default_rng(args.seed)
    for K in system.integrals:
        z = is_zero(killing_residual(system.metric, K), rng=np.random.default_rng(args.seed))
        report.check(f"killing[{K.label}]", z.flag, z.residual)
    polys = [quadratic_to_poly(system.metric.as_integral())] + [quadratic_to_poly(K) for K in system.integrals]
    labels = ["2H"] + [K.label for K in system.integrals]
    inv = involution_matrix(polys, rng=np.random.default_rng(args.seed))
    for a in range(len(polys)):
        for b in range(a + 1, len(polys)):
            report.check(f"involution[{labels[a]},{labels[b]}]", inv[a][b].flag, inv[a][b].residual)
    lam = _lam(system, rng)
    points, rejected = _sample(system, args.samples, rng, args.box)
    ranks, gaps, ms = _pointwise(report, system, points, lam, args.tol, rng, "point")
    report.data["summary"] = {
        "n": system.n,
        "lambda": [str(c) for c in lam.coefficients] if lam else [],
        "rejected_points": rejected,
        "min_rank": min(ranks) if ranks else None,
        "min_eigen_gap": _num(min(gaps)) if gaps else None,
    }
    return report


def cmd_theorem1(args):
    system, raw = _load(args)
    report = Report("theorem1", raw, args.seed, {
        "samples": args.samples, "tol": args.tol, "box": list(args.box), "backend": system.backend.value,
    })
    rng = np.random.default_rng(args.seed)
    lam = _lam(system, rng)
    points, rejected = _sample(system, args.samples, rng, args.box)
    ranks, gaps, ms = _pointwise(report, system, points, lam, args.tol, rng, "point")

    lab = {"status": "skipped"}
    diagonal = system.metric.is_diagonal() and all(K.is_diagonal() for K in system.integrals)
    if lam is not None and diagonal:
        polys = [quadratic_to_poly(system.metric.as_integral())] + [quadratic_to_poly(K) for K in system.integrals]
        bounds, witness = [], []
        for k, (x, _) in enumerate(points):
            tag = f"lab[{k}] {_fmt_point(x)}"
            try:
                frame = coordinate_frame(system.metric, system.integrals, lam, x)
                res = solution_space_bound(system.metric, frame, polys, [x])
            except (SingularFrameError, InconsistentBlocksError, EvaluationError) as exc:
                report.check(f"{tag} solution_space", False, None, str(exc))
                continue
            bounds.append(res.bound)
            witness.append(res.witness_rank)
            detail = (f"m = {res.bound}, witness rank {res.witness_rank}, n = {res.dimension}"
                      + (f"; counterexample: {res.details}" if res.counterexample else ""))
            report.check(f"{tag} solution_space", not res.counterexample, res.witness_rank, detail)
        lab = {
            "status": "ran",
            "m_observed": sorted(set(bounds)),
            "witness_rank_min": min(witness) if witness else None,
        }
    elif not diagonal:
        lab["reason"] = "integrals are not diagonal in the chart; no coordinate frame available"
    report.data["summary"] = {
        "n": system.n,
        "lambda": [str(c) for c in lam.coefficients] if lam else [],
        "rejected_points": rejected,
        "m_observed": sorted(set(ms)),
        "rank_min": min(ranks) if ranks else None,
        "rank_max": max(ranks) if ranks else None,
        "min_eigen_gap": _num(min(gaps)) if gaps else None,
        "proof_lab": lab,
    }
    return report


def cmd_generate(args):
    try:
        data, raw = read_json(args.file)
        S, row = load_stackel(data, args.backend)
    except OSError as exc:
        raise InputError(f"cannot read {args.file}: {exc}") from exc
    except (SchemaError, ExpressionError, ValueError, ArithmeticError) as exc:
        raise InputError(str(exc)) from exc
    if args.hamiltonian_row is not None:
        row = args.hamiltonian_row - 1
    if not 0 <= row < S.n:
        raise InputError(f"hamiltonian row {row + 1} out of range")
    report = Report("generate", raw, args.seed, {"hamiltonian_row": row + 1, "backend": S.backend.value})
    diag = validate_stackel(S, row)
    if not diag.ok or diag.warnings:
        for e in diag.errors + diag.warnings:
            report.check("validate_stackel", False, None, str(e))
        return report, None
    report.check("validate_stackel", True, 0.0, "")
    system = stackel_integrals(S, row)
    rng_seed = args.seed
    for K in system.integrals[1:]:
        z = is_zero(killing_residual(system.metric, K), rng=np.random.default_rng(rng_seed))
        report.check(f"killing[{K.label}]", z.flag, z.residual)
    polys = system.polynomials()
    inv = involution_matrix(polys, rng=np.random.default_rng(rng_seed))
    labels = [K.label for K in system.integrals]
    for a in range(len(polys)):
        for b in range(a + 1, len(polys)):
            report.check(f"involution[{labels[a]},{labels[b]}]", inv[a][b].flag, inv[a][b].residual)
    out = system_to_json(system, data.get("description"))
    report.data["summary"] = {"n": S.n, "integrals": labels}
    return report, out


def _parse_init(text, n):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"--init must be comma-separated numbers: {exc}") from exc
    if len(values) != 2 * n:
        raise InputError(f"--init needs {2 * n} numbers (x1..x{n}, p1..p{n}), got {len(values)}")
    return PhaseState(tuple(values[:n]), tuple(values[n:]))


def cmd_flow(args):
    system, raw = _load(args)
    s0 = _parse_init(args.init, system.n)
    if args.steps < 1 or not args.dt > 0:
        raise InputError("--steps must be >= 1 and --dt > 0")
    report = Report("flow", raw, args.seed, {
        "init": list(s0.position) + list(s0.momentum), "dt": args.dt, "steps": args.steps,
        "backend": system.backend.value,
    })
    H = system.metric.hamiltonian()
    monitors = [quadratic_to_poly(system.metric.as_integral())] + [quadratic_to_poly(K) for K in system.integrals]
    labels = ["2H"] + [K.label for K in system.integrals]
    try:
        traj, drift = integrate(H, s0, args.dt, args.steps, monitors, labels)
    except (FlowError, EvaluationError) as exc:
        report.check("integrate", False, None, str(exc))
        report.data["summary"] = {"error_step": getattr(exc, "step", None)}
        return report
    report.check("integrate", True, 0.0, f"{args.steps} steps")
    for e in drift.entries:
        entry = {"label": e.label, "initial": _num(e.initial), "max_abs_drift": _num(e.max_abs_drift),
                 "relative_drift": _num(e.relative_drift)}
        report.data.setdefault("drift", []).append(entry)
        if args.drift_tol is not None:
            report.check(f"drift[{e.label}]", e.relative_drift < args.drift_tol, e.relative_drift)
    if args.out_csv:
        write_csv(args.out_csv, traj)
    report.data["summary"] = {
        "final_position": [_num(v) for v in traj.positions[-1]],
        "final_momentum": [_num(v) for v in traj.momenta[-1]],
    }
    return report


def build_parser():
    p = argparse.ArgumentParser(prog="stackelkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sampling=True):
        sp.add_argument("file", help="system JSON file, or builtin:NAME")
        sp.add_argument("--backend", choices=["exact", "numeric"], default=None)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None, help="write the report here instead of stdout")
        if sampling:
            sp.add_argument("--samples", type=int, default=16)
            sp.add_argument("--tol", type=float, default=1e-9)
            sp.add_argument("--box", type=_box, default=(0.5, 2.0),
                            help="coordinate range LO,HI for sample points")

    common(sub.add_parser("verify", help="check Killing, involution and pointwise conditions"))
    common(sub.add_parser("theorem1", help="restriction rank, eigenvalues and the n = m lab"))
    g = sub.add_parser("generate", help="system file from a Stäckel matrix")
    common(g, sampling=False)
    g.add_argument("--hamiltonian-row", type=int, default=None)
    g.add_argument("--report", default=None, help="write the report here instead of stdout")
    f = sub.add_parser("flow", help="integrate the geodesic flow and monitor the integrals")
    common(f, sampling=False)
    f.add_argument("--init", required=True, help="x1,..,xn,p1,..,pn")
    f.add_argument("--dt", type=float, default=1e-3)
    f.add_argument("--steps", type=int, default=10000)
    f.add_argument("--out-csv", default=None)
    f.add_argument("--drift-tol", type=float, default=None,
                   help="fail if any relative drift reaches this value")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not 0 <= args.seed < 2**64:
        sys.stderr.write("error: --seed must be an unsigned 64-bit integer\n")
        return 2
    try:
        if args.command == "generate":
            report, out = cmd_generate(args)
            if out is not None:
                text = json.dumps(out, indent=2) + "\n"
                if args.out:
                    with open(args.out, "w") as fh:
                        fh.write(text)
                else:
                    sys.stdout.write(text)
            if args.out or args.report:
                _emit(report, args.report)
            else:
                sys.stderr.write(report.dumps())
        else:
            handler = {"verify": cmd_verify, "theorem1": cmd_theorem1, "flow": cmd_flow}[args.command]
            report = handler(args)
            _emit(report, args.out)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except StackelError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
