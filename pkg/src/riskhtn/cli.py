"""Command-line interface: parse, ground, plan, evaluate, simulate, export.

Exit codes: 0 success, 1 usage/parse/model error, 2 proven planning failure
(the bounded space was exhausted without a solution and no bound was hit),
3 a search or enumeration budget was exhausted.  Results go to stdout or
--out; diagnostics and timings go to stderr.  Identical invocations produce
byte-identical results.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from . import __version__
from .cvtdg import annotate_expected_utilities, build_cvtdg, DEFAULT_K_UNFOLD
from .errors import EnumerationCapError, RiskHtnError, TrajectoryCapError
from .evaluation import oracle_enumerate, simulate
from .grounding import ground
from .io_formats import (
    dump_annotations,
    emit_plan_report,
    export_dot,
    parse_domain,
    parse_plan,
    parse_problem,
    parse_utility,
)
from .search_plan import find_plans_planspace
from .search_state import SearchBounds, find_plans
from .utility import plan_eu_exact, plan_eu_segmented, operator_eu

logger = logging.getLogger("riskhtn")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAILURE = 2
EXIT_BOUNDS = 3

_STATUS_EXIT = {"solution": EXIT_OK, "failure": EXIT_FAILURE, "bounds_exhausted": EXIT_BOUNDS}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are exit code 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _configure_logging() -> None:
    level = os.environ.get("RISKHTN_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(
        stream=sys.stderr,
        level=levels.get(level, logging.ERROR),
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write_result(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_pipeline(args):
    domain = parse_domain(_read(args.domain))
    problem = parse_problem(_read(args.problem), domain)
    spec = parse_utility(_read(args.utility))
    return domain, problem, spec


def _bounds(args) -> SearchBounds:
    return SearchBounds(max_depth=args.max_depth, max_nodes=args.max_nodes)


def _cmd_plan(args) -> int:
    _, problem, spec = _load_pipeline(args)
    started = time.perf_counter()
    if args.engine == "state":
        result = find_plans(problem, spec, _bounds(args))
    else:
        result = find_plans_planspace(
            problem, spec, _bounds(args), k_unfold=args.k_unfold
        )
    elapsed = time.perf_counter() - started
    logger.info("engine=%s status=%s runtime=%.3fs", args.engine, result.status, elapsed)
    if result.solved:
        report = emit_plan_report(
            result.plan, spec, result.stats.as_dict(), engine=args.engine,
            status=result.status,
        )
        _write_result(report, args.out)
    else:
        print(f"{args.engine} search: {result.status}", file=sys.stderr)
    return _STATUS_EXIT[result.status]


def _cmd_eval(args) -> int:
    _, problem, spec = _load_pipeline(args)
    gm = ground(problem.domain, problem)
    plan = parse_plan(_read(args.plan), gm)
    doc = {
        "plan": [{"name": op.name, "args": list(op.args)} for op in plan],
        "attitude": spec.describe(),
    }
    if spec.is_static:
        doc["eu_exact"] = plan_eu_exact(spec, plan)
        doc["eu_segmented"] = plan_eu_segmented(spec, plan)
        doc["operator_eu"] = [
            {"name": op.name, "args": list(op.args), "eu": operator_eu(spec, op)}
            for op in plan
        ]
    else:
        print(
            "one-switch utilities are evaluated on realized trajectories; "
            "use the simulate subcommand",
            file=sys.stderr,
        )
        return EXIT_ERROR
    _write_result(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    _, problem, spec = _load_pipeline(args)
    result = oracle_enumerate(problem, spec, _bounds(args), cap=args.max_nodes)
    doc = {
        "plan_count": len(result),
        "visited": result.visited,
        "depth_bound_hit": result.bounds_hit,
        "best_eu": result.best_eu,
        "best_plan": [
            {"name": op.name, "args": list(op.args)} for op in (result.best_plan or ())
        ],
        "plans": [
            {
                "eu": eu,
                "steps": [{"name": op.name, "args": list(op.args)} for op in plan],
            }
            for plan, eu in zip(result.plans, result.expected_utilities)
        ],
    }
    _write_result(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK if result.best_plan is not None else EXIT_FAILURE


def _cmd_simulate(args) -> int:
    _, problem, spec = _load_pipeline(args)
    gm = ground(problem.domain, problem)
    plan = parse_plan(_read(args.plan), gm)
    summary = simulate(plan, spec, args.runs, args.seed)
    doc = {
        "n_runs": summary.n_runs,
        "seed": summary.seed,
        "attitude": spec.describe(),
        "mean_utility": summary.mean_utility,
        "sample_variance": summary.sample_variance,
        "std_error": summary.std_error,
        "mean_total_cost": summary.mean_total_cost,
        "outcome_counts": [list(c) for c in summary.outcome_counts],
    }
    if spec.kind == "one_switch":
        doc["depleted_runs"] = summary.depleted_runs
    _write_result(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def _cmd_tdg(args) -> int:
    domain = parse_domain(_read(args.domain))
    problem = parse_problem(_read(args.problem), domain)
    gm = ground(domain, problem)
    graph = build_cvtdg(gm, problem.initial_network)
    if args.utility:
        spec = parse_utility(_read(args.utility))
        annotate_expected_utilities(graph, spec, args.k_unfold)
    _write_result(export_dot(graph), args.out)
    if args.annotations:
        with open(args.annotations, "w", encoding="utf-8") as fh:
            fh.write(dump_annotations(graph))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="riskhtn", description=__doc__)
    parser.add_argument("--version", action="version", version=f"riskhtn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, utility_required=True):
        p.add_argument("-d", "--domain", required=True, help="domain file (*.htn.json)")
        p.add_argument("-p", "--problem", required=True, help="problem file (*.prob.json)")
        p.add_argument(
            "-u", "--utility", required=utility_required,
            help="utility file (*.util.json)",
        )
        p.add_argument("--max-depth", type=int, default=SearchBounds.max_depth,
                       help="decomposition budget (default %(default)s)")
        p.add_argument("--max-nodes", type=int, default=SearchBounds.max_nodes,
                       help="node / enumeration budget (default %(default)s)")
        p.add_argument("--out", help="write the result here instead of stdout")

    p_plan = sub.add_parser("plan", help="search for a maximum-expected-utility plan")
    add_common(p_plan)
    p_plan.add_argument("--engine", choices=("state", "planspace"), default="state")
    p_plan.add_argument("--k-unfold", type=int, default=DEFAULT_K_UNFOLD,
                        help="annotation iteration rounds (planspace engine)")
    p_plan.set_defaults(func=_cmd_plan)

    p_eval = sub.add_parser("eval", help="evaluate a plan's expected utility")
    add_common(p_eval)
    p_eval.add_argument("--plan", required=True, help="plan report (*.plan.json)")
    p_eval.set_defaults(func=_cmd_eval)

    p_oracle = sub.add_parser("oracle", help="enumerate all plans exhaustively")
    add_common(p_oracle)
    p_oracle.set_defaults(func=_cmd_oracle)

    p_sim = sub.add_parser("simulate", help="Monte Carlo execution of a plan")
    add_common(p_sim)
    p_sim.add_argument("--plan", required=True, help="plan report (*.plan.json)")
    p_sim.add_argument("--runs", type=int, default=10_000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.set_defaults(func=_cmd_simulate)

    p_tdg = sub.add_parser("tdg", help="export the decomposition graph as DOT")
    add_common(p_tdg, utility_required=False)
    p_tdg.add_argument("--k-unfold", type=int, default=DEFAULT_K_UNFOLD)
    p_tdg.add_argument("--annotations", help="also dump annotations to this file")
    p_tdg.set_defaults(func=_cmd_tdg)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse help/usage paths
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (EnumerationCapError, TrajectoryCapError) as exc:
        print(f"riskhtn: budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BOUNDS
    except RiskHtnError as exc:
        print(f"riskhtn: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"riskhtn: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
