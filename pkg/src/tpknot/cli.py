"""Command-line entry point: ``tpknot <command> ...``.

Exit codes: 0 success, 1 a verification check failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import _parallel
from .curve_core import Curve, CurveError, EnergyParams, Interval, derivative, tangent_field
from .energies import refinement_table, tp_energy, tp_energy_local, tp_equals_e_check
from .flow import FlowConfig, detect_concentration, minimize
from .gluing import luckhaus_estimate_report
from .sobolev import SeminormSpec, gagliardo_seminorm
from .suites import run_suite
from .variation import (
    VariationField,
    e_energy_fd_variation,
    el_breakdown,
    eta_weight,
    fd_variation_oracle,
    tp_first_variation,
)
from . import zoo

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


# ------------------------------------------------------------------ I/O


def _plain(obj):
    """Convert numpy scalars and arrays into JSON-ready Python objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """JSON text; floats use the shortest repr that round-trips exactly."""
    return json.dumps(_plain(obj), indent=2, sort_keys=True)


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def read_curve(path: str) -> Curve:
    return Curve.from_dict(_read_json(path))


def write_curve(c: Curve, path: str) -> None:
    Path(path).write_text(dumps(c.to_dict()) + "\n")


def export_curve(c: Curve, fmt: str, path: str) -> None:
    if fmt == "json":
        write_curve(c, path)
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for t, row in zip(c.grid(), c.points):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    elif fmt == "obj":
        with open(path, "w") as fh:
            for x, y, z in c.points:
                fh.write(f"v {float(x)!r} {float(y)!r} {float(z)!r}\n")
            fh.write("l " + " ".join(str(i + 1) for i in range(c.n)) + " 1\n")
    else:
        raise InputError(f"unknown export format {fmt!r}")


def _read_vectors(path: str, key: str) -> np.ndarray:
    data = _read_json(path)
    if key not in data:
        raise InputError(f"{path}: missing key {key!r}")
    return np.asarray(data[key], dtype=float)


def _emit(payload: dict, out: str | None) -> None:
    text = dumps(payload)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _params(args) -> EnergyParams:
    return EnergyParams(args.p, args.q)


def _interval(center, radius) -> Interval | None:
    if center is None and radius is None:
        return None
    if center is None or radius is None:
        raise InputError("give both a center and a radius")
    return Interval(center, radius)


# ------------------------------------------------------------- commands


def cmd_energy(args) -> int:
    c = read_curve(args.input)
    params = _params(args)
    local = Interval(*args.interval) if args.interval else None
    val = tp_energy(c, params) if local is None else tp_energy_local(c, local, params, args.mode)
    payload = {"n": c.n, "p": params.p, "q": params.q, "value": val.value, "infinite": val.infinite,
               "clamped_pairs": val.clamped_pairs}
    if args.refine:
        payload["refinement_table"] = refinement_table(c, params, args.refine)
    if args.tp_equals_e:
        payload["tp_equals_e_discrepancy"] = tp_equals_e_check(c, params)
    _emit(payload, args.out)
    return EXIT_OK


def cmd_seminorm(args) -> int:
    c = read_curve(args.input)
    if args.field == "gamma":
        values = c.points
    elif args.field == "gammaprime":
        values = derivative(c)
    else:
        values = _read_vectors(args.field, "values")
        if values.shape[0] != c.n:
            raise InputError(f"field must have {c.n} samples")
    domain = Interval(*args.interval) if args.interval else None
    spec = SeminormSpec(args.s, args.p, domain)
    value = gagliardo_seminorm(values, spec)
    _emit({"n": c.n, "s": spec.s, "p": spec.p, "field": args.field, "seminorm": value}, args.out)
    return EXIT_OK


def cmd_variation(args) -> int:
    c = read_curve(args.input)
    params = _params(args)
    phi = _read_vectors(args.phi, "vectors")
    if phi.shape != (c.n, 3):
        raise InputError(f"phi must have shape ({c.n}, 3), got {phi.shape}")
    analytic = tp_first_variation(c, params, phi)
    fd = fd_variation_oracle(c, params, phi, args.h)
    payload = {"first_variation": analytic, "fd_oracle": fd,
               "rel_error": abs(analytic - fd) / abs(fd) if fd != 0.0 else abs(analytic)}
    if args.el_breakdown:
        u = tangent_field(c, "edge")
        tangential = phi - np.sum(phi * u.vectors, axis=1)[:, None] * u.vectors
        field = VariationField(tangential)
        eta = None
        if args.eta_center is not None:
            eta = eta_weight(c.n, _interval(args.eta_center, args.eta_radius))
        br = el_breakdown(u, params, field, eta, "bump" if eta is not None else "none")
        el_fd = e_energy_fd_variation(u, params, field, eta, args.h)
        payload["el"] = {"Q": br.Q, "R": list(br.R), "total": br.total, "eta": br.eta_used,
                         "fd_oracle": el_fd,
                         "rel_error": abs(br.total - el_fd) / abs(el_fd) if el_fd != 0.0 else abs(br.total)}
    _emit(payload, args.out)
    return EXIT_OK


def cmd_minimize(args) -> int:
    c = read_curve(args.input)
    config = FlowConfig(max_steps=args.steps, step_init=args.step_init,
                        guard_min_distance=args.guard_dist, guard_exclusion=args.guard_exclusion)
    callback = None
    if args.snapshot_every:
        folder = Path(args.snapshot_dir)
        folder.mkdir(parents=True, exist_ok=True)

        def callback(step, cur):
            if step % args.snapshot_every == 0:
                write_curve(cur, str(folder / f"curve_{step:04d}.json"))

    out, trace = minimize(c, _params(args), config, callback)
    if args.out_trace:
        with open(args.out_trace, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "energy", "step_size", "guard", "bilipschitz_lower",
                             "max_local_energy", "reprojected"])
            for r in trace.records:
                writer.writerow([r.step, repr(r.energy), repr(r.step_size), repr(r.guard),
                                 repr(r.bilipschitz_lower), repr(r.max_local_energy), int(r.reprojected)])
    if args.out_curve:
        write_curve(out, args.out_curve)
    _emit({"steps": len(trace.records) - 1, "initial_energy": trace.records[0].energy,
           "final_energy": trace.records[-1].energy, "monotone": trace.is_monotone(),
           "stalled": trace.stalled, "converged": trace.converged}, args.out)
    return EXIT_OK


def cmd_detect(args) -> int:
    curves = [read_curve(p) for p in args.input]
    params = _params(args)
    prof = detect_concentration(curves, params, args.epsilon, args.lam, delta=args.delta, scales=args.scales)
    levels = [{"radius": lvl.radius,
               "intervals": [{"center": iv.center, "radius": iv.radius, "energy": e}
                             for iv, e in zip(lvl.intervals, lvl.energies)],
               "flagged": list(lvl.flagged)} for lvl in prof.levels]
    _emit({"epsilon": prof.epsilon, "lambda": prof.lam, "global_energy": prof.global_energy,
           "bound": prof.bound, "levels": levels,
           "candidates": [{"center": iv.center, "radius": iv.radius} for iv in prof.candidates]}, args.out)
    return EXIT_OK


def cmd_glue(args) -> int:
    u = _read_vectors(args.u, "values")
    v = _read_vectors(args.v, "values")
    m = (u.shape[0] + 1) // 4
    if 4 * m - 1 != u.shape[0] or v.shape[0] != 2 * m + 1:
        raise InputError("u needs 4m - 1 samples on (-2, 2) and v 2m + 1 samples on [-1, 1]")
    rep = luckhaus_estimate_report(u, v, args.delta, args.s, args.p, args.r, spacing=1.0 / m)
    _emit({"lhs": rep.lhs, "terms": rep.terms, "empirical_C": rep.empirical_C}, args.out)
    return EXIT_OK


def cmd_zoo(args) -> int:
    kwargs = {}
    if args.scale is not None:
        kwargs["scale" if args.name == "trefoil" else "radius"] = args.scale
    if args.k is not None:
        kwargs["k"] = args.k
    if args.name == "pulltight" and "k" not in kwargs:
        raise InputError("pulltight needs --k")
    try:
        c = zoo.make(args.name, args.n, **kwargs)
    except TypeError as exc:
        raise InputError(f"option not accepted by {args.name}: {exc}") from exc
    write_curve(c, args.out)
    _emit({"name": args.name, "n": c.n, "out": args.out}, None)
    return EXIT_OK


def cmd_verify(args) -> int:
    start = time.perf_counter()
    results = run_suite(args.suite)
    checks = {name: [c.to_dict() for c in lst] for name, lst in results.items()}
    passed = all(c["passed"] for lst in checks.values() for c in lst)
    report = {
        "command": ["verify", args.suite],
        "inputs_hash": hashlib.sha256(args.suite.encode()).hexdigest(),
        "checks": checks,
        "passed": passed,
    }
    for name, lst in results.items():
        for c in lst:
            print(f"[{'PASS' if c.passed else 'FAIL'}] {name}: {c.name} ({c.value:.3e} vs {c.threshold:.3e})",
                  file=sys.stderr)
    report["wall_time"] = time.perf_counter() - start
    _emit(report, args.out)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_export(args) -> int:
    export_curve(read_curve(args.input), args.format, args.out)
    return EXIT_OK


# --------------------------------------------------------------- parser


def _add_pq(p: argparse.ArgumentParser, p_default=4.0, q_default=2.0) -> None:
    p.add_argument("--p", type=float, default=p_default)
    p.add_argument("--q", type=float, default=q_default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tpknot", description="Tangent-point energies of closed curves.")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for pair sums (default: KNOT_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("energy", help="TP energy of a curve")
    p.add_argument("--input", required=True)
    _add_pq(p)
    p.add_argument("--interval", type=float, nargs=2, metavar=("CENTER", "RADIUS"))
    p.add_argument("--mode", choices=["aa", "ahalf"], default="aa")
    p.add_argument("--refine", type=int, default=0, help="levels of n -> 2n refinement to tabulate")
    p.add_argument("--tp-equals-e", action="store_true", help="also report |TP - E(gamma')| / TP")
    p.add_argument("--out")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("seminorm", help="Gagliardo seminorm of a sampled field on the curve grid")
    p.add_argument("--input", required=True)
    p.add_argument("--field", default="gammaprime",
                   help='gamma, gammaprime, or a JSON file with "values" (one row per sample)')
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--interval", type=float, nargs=2, metavar=("CENTER", "RADIUS"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_seminorm)

    p = sub.add_parser("variation", help="first variation against a finite-difference oracle")
    p.add_argument("--input", required=True)
    p.add_argument("--phi", required=True, help='JSON with "vectors": n x 3')
    _add_pq(p)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--el-breakdown", action="store_true")
    p.add_argument("--eta-center", type=float)
    p.add_argument("--eta-radius", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_variation)

    p = sub.add_parser("minimize", help="guarded energy descent")
    p.add_argument("--input", required=True)
    _add_pq(p)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--step-init", type=float, default=1.0)
    p.add_argument("--guard-dist", type=float, default=1e-3)
    p.add_argument("--guard-exclusion", type=float, default=0.05)
    p.add_argument("--out-trace")
    p.add_argument("--out-curve")
    p.add_argument("--snapshot-every", type=int, default=0)
    p.add_argument("--snapshot-dir", default=".")
    p.add_argument("--out")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("detect", help="concentration detection on dyadic covers")
    p.add_argument("--input", required=True, nargs="+", help="one curve or a sequence (last = limit proxy)")
    _add_pq(p)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--scales", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("glue", help="gluing estimate report")
    p.add_argument("--u", required=True, help='JSON with "values" on (-2, 2)')
    p.add_argument("--v", required=True, help='JSON with "values" on [-1, 1]')
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--r", type=float, default=1.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_glue)

    p = sub.add_parser("zoo", help="write a fixture curve")
    p.add_argument("--name", required=True, choices=sorted(zoo.ZOO))
    p.add_argument("--n", type=int)
    p.add_argument("--scale", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_zoo)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("--suite", default="all",
                   choices=["identities", "invariance", "gap", "el", "gluing", "concentration", "all"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="convert a curve to json, csv or obj")
    p.add_argument("--input", required=True)
    p.add_argument("--format", required=True, choices=["json", "csv", "obj"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        if args.threads is not None:
            _parallel.set_threads(args.threads)
        return args.func(args)
    except (InputError, CurveError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    finally:
        _parallel.set_threads(None)


if __name__ == "__main__":
    sys.exit(main())
