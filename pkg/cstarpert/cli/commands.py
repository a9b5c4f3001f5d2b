"""CLI command handlers."""

import argparse
import logging
import sys
from dataclasses import replace
from typing import List, Optional

import numpy as np

from cstarpert import Toolkit, __version__
from cstarpert.core.matrices import op_norm
from cstarpert.utils.config import TOLERANCE_PRESETS, Settings, get_preset
from cstarpert.utils.exceptions import CStarPertError, NumericalBreakdown, TooFar
from cstarpert.utils.serialization import (
    cluster_report_to_json,
    distance_to_json,
    dumps,
    expectation_to_json,
    matrix_to_json,
    module_operator_to_json,
    perturbation_report_to_json,
    quasi_basis_to_json,
)
from cstarpert.utils.validation import validate_tolerance

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TOO_FAR = 2
EXIT_BREAKDOWN = 3

AUDIT_LIMIT = 1e-7
DEMO_SCENARIO = "M2-in-M4-tower"


def _common_options(settings: Settings, suppress: bool) -> argparse.ArgumentParser:
    """Options accepted both before and after the subcommand name."""

    def default(value):
        return argparse.SUPPRESS if suppress else value

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--tol",
        type=float,
        default=default(settings.tol),
        help=f"Membership tolerance for algebra checks (default: {settings.tol:g})",
    )
    common.add_argument(
        "--preset",
        choices=sorted(TOLERANCE_PRESETS),
        default=default("default"),
        help="Tolerance preset for the remaining thresholds (default: default)",
    )
    common.add_argument(
        "--samples",
        type=int,
        default=default(settings.audit_samples),
        help=f"Sampled unit-ball elements per bound (default: {settings.audit_samples})",
    )
    common.add_argument(
        "--seed",
        type=int,
        default=default(0),
        help="Random seed (default: 0)",
    )
    common.add_argument(
        "--json",
        action="store_true",
        default=default(False),
        help="Print the full JSON report",
    )
    common.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        default=default(False),
        help="Log debug diagnostics to stderr",
    )
    return common


def build_parser(settings: Optional[Settings] = None) -> argparse.ArgumentParser:
    """Build the argument parser."""
    settings = settings or Settings.from_env()
    parser = argparse.ArgumentParser(
        prog="cstarpert",
        description="Perturbation of intermediate subalgebras of finite-dimensional inclusions",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        parents=[_common_options(settings, suppress=False)],
    )
    parser.add_argument(
        "-V",
        "--version",
        action="version",
        version=f"cstarpert {__version__}",
    )
    common = _common_options(settings, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("demo", parents=[common], help="Plant and recover on the M2-in-M4 tower")

    perturb = sub.add_parser("perturb", parents=[common], help="Plant u0 A u0* and recover a conjugating unitary")
    perturb.add_argument("--scenario", required=True, help="Catalog scenario name")
    perturb.add_argument("--eps", type=float, required=True, help="Distance of the planted unitary from I")
    perturb.add_argument("--timings", action="store_true", help="Include per-stage timings in the JSON report")

    audit = sub.add_parser("audit", parents=[common], help="Randomized sweeps of the standalone estimates")
    audit.add_argument("--trials", type=int, default=100, help="Trials per estimate (default: 100)")

    index = sub.add_parser("index", parents=[common], help="Watatani index of a scenario")
    index.add_argument("--scenario", required=True, help="Catalog scenario name")

    qb = sub.add_parser("quasi-basis", parents=[common], help="Quasi-basis of a scenario")
    qb.add_argument("--scenario", required=True, help="Catalog scenario name")
    qb.add_argument("--unit-ball", action="store_true", help="Rescale into the unit ball")

    jones = sub.add_parser("jones", parents=[common], help="Jones projections e_C and e_A of a scenario")
    jones.add_argument("--scenario", required=True, help="Catalog scenario name")

    distance = sub.add_parser("distance", parents=[common], help="Distance bracket between A and u0 A u0*")
    distance.add_argument("--scenario", required=True, help="Catalog scenario name")
    distance.add_argument("--eps", type=float, required=True, help="Distance of the planted unitary from I")

    cluster = sub.add_parser("cluster", parents=[common], help="Cluster A, u0 A u0* and alternative intermediates")
    cluster.add_argument("--scenario", required=True, help="Catalog scenario name")
    cluster.add_argument("--eps", type=float, default=1e-6, help="Distance of the planted unitary from I (default: 1e-6)")
    cluster.add_argument(
        "--attempt-below",
        type=float,
        default=1.0,
        help="Attempt the construction when Jones projections are closer than this (default: 1.0)",
    )

    sub.add_parser("scenarios", parents=[common], help="List catalog scenarios and exit")
    return parser


def _configure_logging(verbose: bool, settings: Settings) -> None:
    level = logging.DEBUG if verbose else getattr(logging, settings.log_level, logging.WARNING)
    logging.basicConfig(
        stream=sys.stderr,
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _emit(args, data: dict, lines: List[str]) -> None:
    if args.json:
        print(dumps(data))
    else:
        for line in lines:
            print(line)


def _run_perturb(toolkit: Toolkit, args, scenario: str, eps: float, timings: bool) -> int:
    result = toolkit.recover(scenario, eps, args.seed)
    report = result.report
    data = {
        "scenario": scenario,
        "eps": eps,
        "seed": args.seed,
        "tol": args.tol,
        "planted": matrix_to_json(result.planted),
        "report": perturbation_report_to_json(report, include_timings=timings),
    }
    violations = report.violations(toolkit.tolerances.bound_slack)
    lines = [
        f"Scenario: {scenario} (eps={eps:g}, seed={args.seed})",
        f"  N = {report.n_quasi_basis}, gamma = {report.gamma:.6g}",
        f"  d(A, B) in [{report.d_estimate.lower:.3e}, {report.d_estimate.upper:.3e}]",
        f"  delta = {report.delta:.3e}, ||s - I|| = {report.s_gap:.3e}",
        f"  ||u - I|| = {report.u_bound_lhs:.3e} (bound {report.u_bound_rhs:.3e})",
        f"  conjugation residual = {report.conjugation_residual:.3e}",
        f"  bounds checked: {len(report.bounds)}, violated: {len(violations)}",
    ]
    _emit(args, data, lines)
    return EXIT_OK


def _run_audit(toolkit: Toolkit, args) -> int:
    results = toolkit.audit(args.trials, args.seed)
    passed = all(r.passed(AUDIT_LIMIT) for r in results)
    data = {
        "trials": args.trials,
        "seed": args.seed,
        "limit": AUDIT_LIMIT,
        "audits": [r.to_dict() for r in results],
        "passed": passed,
    }
    lines = [f"Audit ({args.trials} trials, seed {args.seed}):"]
    lines.extend(
        f"  {r.name:<26} max violation {r.max_violation:+.3e}  max residual {r.max_residual:.3e}"
        for r in results
    )
    lines.append("All estimates hold." if passed else "Violations found.")
    _emit(args, data, lines)
    return EXIT_OK if passed else EXIT_ERROR


def _run_index(toolkit: Toolkit, args) -> int:
    scenario = toolkit.scenario(args.scenario)
    index = toolkit.index(args.scenario)
    evals = np.linalg.eigvalsh((index + index.conj().T) / 2)
    data = {
        "scenario": args.scenario,
        "index": matrix_to_json(index),
        "norm": op_norm(index),
        "min_eigenvalue": float(evals[0]),
        "expected": scenario.expected,
    }
    lines = [
        f"Scenario: {args.scenario}",
        f"  ||Index E|| = {op_norm(index):.10g}",
        f"  spectrum in [{evals[0]:.10g}, {evals[-1]:.10g}]",
    ]
    if scenario.expected:
        lines.append(f"  expected: {scenario.expected['index']:g} I")
    _emit(args, data, lines)
    return EXIT_OK


def _run_quasi_basis(toolkit: Toolkit, args) -> int:
    qb = toolkit.quasi_basis(args.scenario, unit_ball=args.unit_ball)
    data = {
        "scenario": args.scenario,
        "expectation": expectation_to_json(toolkit.expectation(args.scenario)),
        "quasi_basis": quasi_basis_to_json(qb),
    }
    lines = [
        f"Scenario: {args.scenario}",
        f"  {qb.size} elements, unit ball: {qb.in_unit_ball}",
        f"  reconstruction residual = {qb.reconstruction_residual():.3e}",
    ]
    _emit(args, data, lines)
    return EXIT_OK


def _run_jones(toolkit: Toolkit, args) -> int:
    e_c, e_a = toolkit.jones_projections(args.scenario)
    data = {
        "scenario": args.scenario,
        "module_dim": e_c.module.dim,
        "e_c": module_operator_to_json(e_c),
        "e_a": module_operator_to_json(e_a),
    }
    lines = [
        f"Scenario: {args.scenario}",
        f"  module dim = {e_c.module.dim}, module hash = {e_c.module.content_hash()[:12]}",
        f"  rank e_C = {np.trace(e_c.matrix).real:.6g}, rank e_A = {np.trace(e_a.matrix).real:.6g}",
    ]
    _emit(args, data, lines)
    return EXIT_OK


def _run_distance(toolkit: Toolkit, args) -> int:
    estimate = toolkit.distance(args.scenario, args.eps, args.seed)
    data = {"scenario": args.scenario, "eps": args.eps, "seed": args.seed, "distance": distance_to_json(estimate)}
    lines = [
        f"Scenario: {args.scenario} (eps={args.eps:g}, seed={args.seed})",
        f"  d(A, B) in [{estimate.lower:.3e}, {estimate.upper:.3e}] ({estimate.method_notes['upper_source']} bound)",
    ]
    _emit(args, data, lines)
    return EXIT_OK


def _run_cluster(toolkit: Toolkit, args) -> int:
    report = toolkit.cluster(args.scenario, args.eps, args.seed, args.attempt_below)
    data = {"scenario": args.scenario, "eps": args.eps, "seed": args.seed, "cluster": cluster_report_to_json(report)}
    lines = [f"Scenario: {args.scenario}", f"  epsilon = {report.epsilon:.6g}"]
    lines.extend(f"  class {k}: {members}" for k, members in enumerate(report.classes))
    lines.extend(f"  pair ({p.i}, {p.j}): {p.status}" for p in report.pairs)
    _emit(args, data, lines)
    return EXIT_OK


def _dispatch(toolkit: Toolkit, args) -> int:
    if args.command == "scenarios":
        print("Catalog scenarios:")
        for name in toolkit.list_scenarios():
            print(f"  - {name}")
        return EXIT_OK
    if args.command == "demo":
        return _run_perturb(toolkit, args, DEMO_SCENARIO, 1e-3, False)
    if args.command == "perturb":
        return _run_perturb(toolkit, args, args.scenario, args.eps, args.timings)
    if args.command == "audit":
        return _run_audit(toolkit, args)
    if args.command == "index":
        return _run_index(toolkit, args)
    if args.command == "quasi-basis":
        return _run_quasi_basis(toolkit, args)
    if args.command == "jones":
        return _run_jones(toolkit, args)
    if args.command == "distance":
        return _run_distance(toolkit, args)
    if args.command == "cluster":
        return _run_cluster(toolkit, args)
    raise ValueError(f"Unknown command: {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    settings = Settings.from_env()
    args = build_parser(settings).parse_args(argv)
    _configure_logging(args.verbose, settings)

    try:
        tolerances = replace(get_preset(args.preset), closure=validate_tolerance(args.tol))
        toolkit = Toolkit(tolerances=tolerances, samples=args.samples)
        return _dispatch(toolkit, args)
    except TooFar as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_TOO_FAR
    except NumericalBreakdown as e:
        print(f"Numerical breakdown: {e}", file=sys.stderr)
        return EXIT_BREAKDOWN
    except (CStarPertError, ValueError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ERROR
