"""Command line entry point: ``morseindex --config run.json --command index``.

The report is a JSON document on standard output.  Exit codes: 0 when
every ``match`` field is true, 2 for configuration errors, 3 for violated
preconditions, 4 for numerical failures, 5 when a check does not match.
"""

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .config import build_problem, load_config
from .errors import MorseIndexError, NumericalError
from .geodesics import require_index_setting
from .indexform import (INERTIA_TOL, form_A, index_function, kernel_nullity,
                        morse_index, two_endpoint_index)
from .jacobi import RANK_TOL, focal_points, p_jacobi_basis
from .oracle import dense_index_levels, boundary_identity_trial, minimality_check

COMMANDS = ("focal", "index", "two_endpoint", "oracle_check", "index_curve")
EXIT_MISMATCH = 5
IDENTITY_TRIALS = 10
IDENTITY_TOL = 1e-5
MINIMALITY_TRIALS = 20
MINIMALITY_TOL = 1e-7


def _inertia_dict(inert):
    return {"n_plus": inert.n_plus, "n_zero": inert.n_zero, "n_minus": inert.n_minus}


def _focal_list(focal):
    return [{"t0": f.t0, "multiplicity": f.multiplicity} for f in focal]


def _matches(node):
    """Every ``match`` value in a nested report."""
    if isinstance(node, dict):
        for key, value in node.items():
            if key == "match":
                yield bool(value)
            else:
                yield from _matches(value)
    elif isinstance(node, list):
        for item in node:
            yield from _matches(item)


def _curve_checks(samples, focal, offset):
    values = dict(samples)
    monotone = all(i0 <= i1 for (_, i0), (_, i1) in zip(samples, samples[1:]))
    jumps = []
    for f in focal:
        before, after = values.get(f.t0 - offset), values.get(f.t0 + offset)
        at = values.get(f.t0)
        if at is None or before is None:
            continue
        entry = {"t0": f.t0, "multiplicity": f.multiplicity, "left_continuous": at == before}
        if after is not None:
            entry["jump"] = after - at
            entry["match"] = entry["left_continuous"] and after - at == f.multiplicity
        else:
            entry["match"] = entry["left_continuous"]
        jumps.append(entry)
    return {"monotone": monotone, "match": monotone}, jumps


def run_report(config, command, tol_rank=None, tol_inertia=None, mesh=None, seed=0, csv_path=None):
    """Build the report document for ``command``; raises the library errors unchanged."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    problem = build_problem(config)
    geo, P, Q = problem.geodesic, problem.P, problem.Q
    tol_rank = config.tolerances["rank"] if tol_rank is None else tol_rank
    tol = config.tolerances["inertia"] if tol_inertia is None else tol_inertia
    mesh = config.oracle["mesh"] if mesh is None else mesh
    seed_basis = require_index_setting(geo, P)

    report = {
        "version": __version__,
        "command": command,
        "name": config.name,
        "dimension": geo.dim,
        "signature": geo.manifold.signature.value,
        "interval": [geo.a, geo.b],
        "causal_character": seed_basis.character.value,
        "energy_drift": geo.energy_drift,
        "P": config.P or {"type": "point"},
    }
    focal = focal_points(p_jacobi_basis(geo, P), tol_rank=tol_rank)
    report["focal_points"] = _focal_list(focal)
    if command == "focal":
        return report

    if command == "index_curve":
        from .indexform import JUMP_OFFSET
        samples = index_function(geo, P, focal_data=focal, tol=tol)
        report["index_curve"] = [{"t": t, "index": i} for t, i in samples]
        report["monotone"], report["jumps"] = _curve_checks(samples, focal, JUMP_OFFSET)
        if csv_path is not None:
            with open(csv_path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["t", "index"])
                writer.writerows((repr(t), i) for t, i in samples)
        return report

    result = morse_index(geo, P, focal, tol)
    report["morse_index"] = result._asdict()
    if command == "index":
        report["nullity"] = kernel_nullity(geo, P, focal_data=focal, tol=tol)._asdict()
        return report

    report["Q"] = config.Q or {"type": "point"}
    boundary = form_A(geo, P, Q, tol)
    report["form_A"] = {"matrix": boundary.matrix.tolist(), "inertia": _inertia_dict(boundary.inertia)}
    total = two_endpoint_index(geo, P, Q, focal, tol)
    report["two_endpoint_index"] = total._asdict()
    if command == "two_endpoint":
        return report

    levels = dense_index_levels(geo, P, Q, mesh, tol)
    oracle_minus = levels[-1][1].n_minus
    report["oracle"] = {
        "levels": [{"mesh": M, "inertia": _inertia_dict(inert)} for M, inert in levels],
        "n_minus": oracle_minus,
        "match": oracle_minus == total.total,
    }
    deviations = [boundary_identity_trial(geo, P, seed + k) for k in range(IDENTITY_TRIALS)]
    report["boundary_identity"] = {"trials": IDENTITY_TRIALS, "seed": seed, "max_deviation": max(deviations),
                                "match": max(deviations) < IDENTITY_TOL}
    if any(f.t0 <= geo.b for f in focal):
        report["minimality"] = {"skipped": "focal point in ]a, b]"}
    else:
        check = minimality_check(geo, P, trials=MINIMALITY_TRIALS, seed=seed)
        report["minimality"] = {"trials": check.trials, "seed": seed, "min_gap": check.min_gap,
                                "match": check.min_gap >= -MINIMALITY_TOL}
    return report


def build_parser():
    parser = argparse.ArgumentParser(prog="morseindex", description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True, metavar="PATH", help="JSON run configuration")
    parser.add_argument("--command", choices=COMMANDS, default="index")
    parser.add_argument("--steps", type=int, metavar="N", help="override geodesic.steps")
    parser.add_argument("--mesh", type=int, metavar="M", help="dense oracle mesh (default: adaptive)")
    parser.add_argument("--tol-rank", type=float, metavar="X", help=f"rank tolerance (default {RANK_TOL})")
    parser.add_argument("--tol-inertia", type=float, metavar="X",
                        help=f"inertia zero threshold (default {INERTIA_TOL})")
    parser.add_argument("--csv", metavar="PATH", help="write the i(t) curve as CSV (index_curve)")
    parser.add_argument("--seed", type=int, default=0, metavar="N", help="seed for randomized checks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def _emit(document):
    sys.stdout.write(json.dumps(document, indent=2, sort_keys=True) + "\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        overrides = {}
        if args.steps is not None:
            overrides["geodesic.steps"] = args.steps
        if args.mesh is not None:
            overrides["oracle.mesh"] = args.mesh
        if args.tol_rank is not None:
            overrides["tolerances.rank"] = args.tol_rank
        if args.tol_inertia is not None:
            overrides["tolerances.inertia"] = args.tol_inertia
        if overrides:
            config = config.replace(**overrides)
        report = run_report(config, args.command, seed=args.seed, csv_path=args.csv)
    except MorseIndexError as exc:
        _emit({"error": exc.to_dict()})
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        err = NumericalError(f"{type(exc).__name__}: {exc}")
        _emit({"error": err.to_dict()})
        return err.exit_code
    except OSError as exc:
        _emit({"error": {"code": "IO_ERROR", "message": str(exc), "exit_code": 2}})
        return 2
    report["match"] = all(_matches(report))
    _emit(report)
    return 0 if report["match"] else EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
