"""Command-line interface.

Subcommands: ``measures``, ``collapse``, ``plan``, ``transport``,
``simulate``, ``grid``. Human-readable tables by default; ``--json``
switches stdout to JSON. Diagnostics go to stderr.

Exit codes: 0 success, 2 validation failure, 3 measure/plan semantics
(non-collapsible, undefined measure, missing control outcomes),
4 support violation, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import dataio, simbench
from .errors import (
    DirectionViolated,
    EffectMeasureError,
    InvariantViolation,
    MissingTargetControlOutcome,
    NonCollapsible,
    NotIdentifiable,
    ParseError,
    SupportViolation,
    UndefinedMeasure,
    UnknownScenario,
)
from .genmodel import MonotonicityDirection
from .measures import (
    MeasureKind,
    MeasureValue,
    OutcomeKind,
    OutcomePair,
    all_measures,
    compute_measure,
    swap_labels,
)
from .strata import (
    check_logic_respecting,
    collapse,
    collapsibility_weights,
    marginal_pair,
    naive_average,
)
from .transport import (
    Learner,
    Strategy,
    generalize_local,
    gformula_conditional,
    ipsw_conditional,
    plan_adjustment,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SEMANTICS = 3
EXIT_SUPPORT = 4
EXIT_IO = 5

_SEMANTIC_ERRORS = (
    NonCollapsible,
    UndefinedMeasure,
    MissingTargetControlOutcome,
    NotIdentifiable,
    DirectionViolated,
)


def _measure(text: str) -> MeasureKind:
    try:
        return MeasureKind(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown measure {text!r}; choose from {[m.value for m in MeasureKind]}"
        ) from None


def _kind(text: str) -> OutcomeKind:
    try:
        return OutcomeKind(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"outcome kind must be 'binary' or 'continuous'") from None


def _direction(text: str) -> MonotonicityDirection:
    try:
        return MonotonicityDirection(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"direction must be one of {[d.value for d in MonotonicityDirection]}"
        ) from None


def _covariate_list(text: str) -> tuple[str, ...]:
    names = tuple(c for c in text.split(",") if c)
    if not names:
        raise argparse.ArgumentTypeError("covariate list must be non-empty")
    return names


def _nnt_tag(value: float) -> str:
    # Events are coded as harms: a negative signed NNT means treatment
    # prevents events.
    return "benefit" if value < 0 else "harm"


def _print_measure_rows(entries, as_json: bool) -> None:
    if as_json:
        payload = []
        for entry in entries:
            if isinstance(entry, MeasureValue):
                rec = {"measure": entry.measure.value, "value": entry.value}
                if entry.measure is MeasureKind.NNT:
                    rec["magnitude"] = abs(entry.value)
                    rec["tag"] = _nnt_tag(entry.value)
                payload.append(rec)
            else:
                payload.append({"measure": entry.measure.value, "undefined": entry.reason})
        print(json.dumps(payload))
        return
    for entry in entries:
        if isinstance(entry, MeasureValue):
            if entry.measure is MeasureKind.NNT:
                print(f"{entry.measure.value:<8}{abs(entry.value):.3f} ({_nnt_tag(entry.value)})")
            else:
                print(f"{entry.measure.value:<8}{entry.value:.3f}")
        else:
            print(f"{entry.measure.value:<8}undefined: {entry.reason}")


def _cmd_measures(args) -> int:
    pair = OutcomePair(args.mu0, args.mu1, args.kind)
    if args.swap_labels:
        pair = swap_labels(pair)
    _print_measure_rows(all_measures(pair), args.json)
    return EXIT_OK


def _cmd_collapse(args) -> int:
    dist = dataio.load_strata(args.strata)
    measure = args.measure
    try:
        weights = collapsibility_weights(measure, dist)
    except NonCollapsible:
        signed = naive_average(measure, dist)
        magnitude = math.fsum(
            s.proportion * abs(compute_measure(measure, s.pair).value)
            for s in dist.strata
        )
        print(
            f"{measure.value} is not collapsible: no weighted average of stratum "
            f"values recovers the marginal.",
            file=sys.stderr,
        )
        print(
            f"naive proportion-weighted average {signed:.4g} "
            f"(magnitudes: {magnitude:.4g}) is NOT the population value.",
            file=sys.stderr,
        )
        record = {
            "measure": measure.value,
            "collapsible": False,
            "marginal": compute_measure(measure, marginal_pair(dist)).value,
            "naive_average": signed,
            "naive_magnitude_average": magnitude,
        }
        if args.check_logic:
            report = check_logic_respecting(measure, dist)
            record["logic_respecting"] = report.respected
            record["stratum_range"] = [report.low, report.high]
        if args.json:
            print(json.dumps(record))
        else:
            print(f"marginal  {record['marginal']:.6g}")
            print(f"naive     {signed:.6g} (magnitudes: {magnitude:.6g})")
            if args.check_logic:
                print(f"logic_respecting: {str(record['logic_respecting']).lower()}")
        return EXIT_SEMANTICS
    collapsed = collapse(measure, dist)
    marginal = compute_measure(measure, marginal_pair(dist))
    record = {
        "measure": measure.value,
        "weights": {s.label: w for s, w in zip(dist.strata, weights.weights)},
        "collapsed": collapsed.value,
        "marginal": marginal.value,
    }
    if args.check_logic:
        report = check_logic_respecting(measure, dist)
        record["logic_respecting"] = report.respected
        record["stratum_range"] = [report.low, report.high]
    if args.json:
        print(json.dumps(record))
    else:
        for label, w in record["weights"].items():
            print(f"weight {label:<16}{w:.6f}")
        print(f"collapsed {record['collapsed']:.6g}")
        print(f"marginal  {record['marginal']:.6g}")
        if args.check_logic:
            print(f"logic_respecting: {str(record['logic_respecting']).lower()}")
    return EXIT_OK


def _cmd_plan(args) -> int:
    roles = dataio.load_roles(args.roles)
    strategy = (
        Strategy.LOCAL_EFFECT if args.strategy == "local" else Strategy.CONDITIONAL_OUTCOME
    )
    plan = plan_adjustment(roles, args.measure, args.outcome, args.direction, strategy)
    record = {
        "measure": plan.measure.value,
        "outcome": plan.outcome.value,
        "direction": plan.direction.value,
        "strategy": args.strategy,
        "required_covariates": list(plan.required_covariates),
        "requires_target_y0": plan.requires_target_y0,
    }
    print(json.dumps(record) if args.json else json.dumps(record, indent=2))
    return EXIT_OK


def _cmd_transport(args) -> int:
    trial = dataio.load_trial(args.trial)
    target = dataio.load_target(args.target)
    learner = Learner(args.learner)
    if args.strategy == "gformula":
        est = gformula_conditional(trial, target, args.measure, args.covariates, learner)
    elif args.strategy == "ipsw":
        est = ipsw_conditional(trial, target, args.measure, args.covariates)
    else:
        est = generalize_local(trial, target, args.measure, args.covariates, learner)
    record = {
        "measure": est.measure.value,
        "strategy": args.strategy,
        "covariates": list(est.covariates_used),
        "value": est.value,
        "n_source": est.n_source,
        "n_target": est.n_target,
    }
    print(json.dumps(record))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    scenario = simbench.builtin_scenario(args.scenario)
    config = simbench.default_config(scenario)
    report = simbench.run_scenario(
        scenario,
        seed=args.seed,
        reps=args.reps,
        config=config,
        n=args.n,
        m=args.m,
        workers=args.workers,
    )
    simbench.write_report_csv(report, config, args.out)
    if args.json:
        payload = [
            {
                "measure": s.config.measure.value,
                "strategy": s.config.strategy,
                "covariates": list(s.config.covariates),
                "ground_truth": s.ground_truth,
                "median": s.median,
                "q1": s.q1,
                "q3": s.q3,
                "mean": s.mean,
                "sd": s.sd,
                "n_failed": s.n_failed,
            }
            for s in report.summaries
        ]
        print(json.dumps(payload))
    else:
        print(f"{'measure':<9}{'strategy':<10}{'covariates':<22}{'ground_truth':>13}{'median':>12}")
        for s in report.summaries:
            print(
                f"{s.config.measure.value:<9}{s.config.strategy:<10}"
                f"{'+'.join(s.config.covariates):<22}{s.ground_truth:>13.4f}{s.median:>12.4f}"
            )
    return EXIT_OK


def _cmd_grid(args) -> int:
    dataio.emit_grid(args.resolution, args.out)
    if not args.json:
        print(f"wrote {args.resolution * args.resolution} rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="effectmeasures",
        description="Compute, collapse, and generalize causal treatment-effect measures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measures", help="all effect measures for one outcome pair")
    p.add_argument("--mu0", type=float, required=True)
    p.add_argument("--mu1", type=float, required=True)
    p.add_argument("--kind", type=_kind, default=OutcomeKind.BINARY)
    p.add_argument("--swap-labels", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_measures)

    p = sub.add_parser("collapse", help="collapse a stratified table")
    p.add_argument("--strata", required=True)
    p.add_argument("--measure", type=_measure, required=True)
    p.add_argument("--check-logic", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_collapse)

    p = sub.add_parser("plan", help="minimal covariate set for generalization")
    p.add_argument("--roles", required=True)
    p.add_argument("--measure", type=_measure, required=True)
    p.add_argument("--outcome", type=_kind, required=True)
    p.add_argument("--direction", type=_direction, default=MonotonicityDirection.NON_MONOTONE)
    p.add_argument("--strategy", choices=["conditional", "local"], required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_plan)

    p = sub.add_parser("transport", help="generalize a trial estimate to a target sample")
    p.add_argument("--trial", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--measure", type=_measure, required=True)
    p.add_argument("--strategy", choices=["gformula", "ipsw", "local"], required=True)
    p.add_argument("--covariates", type=_covariate_list, required=True)
    p.add_argument(
        "--learner", choices=[l.value for l in Learner], default=Learner.CELL_MEANS.value
    )
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_transport)

    p = sub.add_parser("simulate", help="run a built-in simulation study")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_simulate)

    p = sub.add_parser("grid", help="emit the measure-landscape lattice CSV")
    p.add_argument("--resolution", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=_cmd_grid)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    try:
        return args.run(args)
    except SupportViolation as exc:
        print(f"SupportViolation: {exc}", file=sys.stderr)
        return EXIT_SUPPORT
    except _SEMANTIC_ERRORS as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SEMANTICS
    except (ParseError, InvariantViolation, UnknownScenario) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"IOError: {exc}", file=sys.stderr)
        return EXIT_IO
    except EffectMeasureError as exc:  # anything uncategorized
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
