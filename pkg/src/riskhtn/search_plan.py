"""Risk-aware plan-space HTN planning over partial plans.

A partial plan is a task network (mixed primitive and compound, possibly
partially bound); refinement replaces one compound task by a matching ground
method's network, propagating the argument bindings to sibling tasks.  The
search has no state progression, so method preconditions are deferred and
validated when a fully primitive, ground network is linearized against the
initial state.

Partial plans are valued two ways.  The reported ``f`` multiplies the
precomputed expected-utility magnitudes of the plan's tasks (the graph
annotations), negated; the search additionally keeps the summed
certainty-equivalent weight bound, which is exactly transformable to an
optimistic expected utility and therefore safe for pruning against an
incumbent solution.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass

from .cvtdg import CVTDG, annotate_expected_utilities, build_cvtdg, DEFAULT_K_UNFOLD
from .errors import EffectNondeterminismError, ModelError, UnsupportedUtilityError
from .grounding import GroundModel, GroundMethod, ground, unify_args
from .model import (
    TaskInstance,
    TaskNetwork,
    applicable,
    decompose,
    progress,
)
from .search_state import AuditRecord, SearchBounds, SearchResult, SearchStats
from .utility import UtilitySpec, eu_of_total_cost, plan_eu_segmented

logger = logging.getLogger(__name__)

DEFAULT_LINEARIZATION_CAP = 10_000


@dataclass
class PartialPlan:
    network: TaskNetwork
    trace: tuple = ()  # ("decompose", task_id, method_key) records
    depth: int = 0
    weight_bound: float = math.inf

    def sort_key(self) -> tuple:
        open_tasks = sum(
            1 for t in self.network.nodes.values() if not t.is_ground()
        )
        return (self.weight_bound, open_tasks, len(self.network.nodes))


def partial_plan_eu(partial_plan: PartialPlan, cvtdg: CVTDG,
                    utility_spec: UtilitySpec) -> float:
    """Expected-utility estimate of a partial plan from the graph annotations.

    The product over all tasks of the magnitude of their best compatible
    grounding's annotation, negated once; 0 for an empty network, -inf when
    some task has no compatible grounding (a dead partial plan).
    """
    _check_annotated(cvtdg, utility_spec)
    if not partial_plan.network.nodes:
        return 0.0
    product = 1.0
    for task in partial_plan.network.nodes.values():
        best = cvtdg.optimistic_eu(task)
        if best == -math.inf:
            return -math.inf
        product *= abs(best)
    return -product


def _weight_bound(network: TaskNetwork, cvtdg: CVTDG) -> float:
    return math.fsum(
        cvtdg.optimistic_weight(task) for task in network.nodes.values()
    )


def _check_annotated(cvtdg: CVTDG, utility_spec: UtilitySpec) -> None:
    if cvtdg.utility_spec != utility_spec:
        raise ModelError(
            "CV-TDG annotations were computed for a different utility spec"
        )


def refine(partial_plan: PartialPlan, ground_model: GroundModel) -> list[PartialPlan]:
    """All single-decomposition refinements of a partial plan.

    One successor per (compound task, matching ground method) pair; the
    method's bindings are propagated to every sibling task sharing a
    variable.
    """
    succs: list[PartialPlan] = []
    for tid in sorted(partial_plan.network.nodes):
        task = partial_plan.network.nodes[tid]
        if ground_model.is_compound(task.name):
            succs.extend(_refine_task(partial_plan, tid, ground_model))
    return succs


def _refine_task(
    partial_plan: PartialPlan, task_id: str, ground_model: GroundModel
) -> list[PartialPlan]:
    task = partial_plan.network.nodes[task_id]
    succs = []
    for gm in _matching_methods(task, ground_model):
        binding = unify_args(task.args, gm.task.args)
        network = partial_plan.network
        if binding:
            network = _substitute(network, binding)
        network = decompose(network, task_id, gm)
        succs.append(
            PartialPlan(
                network=network,
                trace=partial_plan.trace + (("decompose", task_id, gm.key),),
                depth=partial_plan.depth + 1,
            )
        )
    return succs


def _matching_methods(task: TaskInstance, ground_model: GroundModel):
    if task.is_ground():
        return ground_model.methods_by_instance.get(task, ())
    return tuple(
        m
        for m in sorted(ground_model.methods, key=lambda m: m.key)
        if m.task.name == task.name
        and unify_args(task.args, m.task.args) is not None
    )


def _substitute(network: TaskNetwork, binding: dict[str, str]) -> TaskNetwork:
    nodes = {
        tid: TaskInstance(t.name, tuple(binding.get(a, a) for a in t.args))
        for tid, t in network.nodes.items()
    }
    return TaskNetwork(nodes, network.order)


def find_plans_planspace(
    problem,
    utility_spec: UtilitySpec,
    bounds: SearchBounds = SearchBounds(),
    *,
    ground_model: GroundModel | None = None,
    cvtdg: CVTDG | None = None,
    k_unfold: int = DEFAULT_K_UNFOLD,
    linearization_cap: int = DEFAULT_LINEARIZATION_CAP,
    collect_audit: bool = False,
) -> SearchResult:
    """Best-first plan-space search for a maximum-expected-utility plan.

    A solution is a fully primitive, ground network with an executable
    linearization from the initial state; the returned plan is the best
    validated linearization within the bounds.
    """
    if not utility_spec.is_static:
        raise UnsupportedUtilityError(
            "the planners support only linear and exponential utilities"
        )
    gm = ground_model if ground_model is not None else ground(problem.domain, problem)
    if not gm.effect_deterministic:
        raise EffectNondeterminismError(
            "plan-space search requires an effect-deterministic model"
        )
    graph = cvtdg
    if graph is None:
        graph = build_cvtdg(gm, problem.initial_network)
        annotate_expected_utilities(graph, utility_spec, k_unfold)
    _check_annotated(graph, utility_spec)
    methods_by_key = {m.key: m for m in gm.methods}

    stats = SearchStats()
    audit: list[AuditRecord] = []
    root = PartialPlan(network=problem.initial_network)
    root.weight_bound = _weight_bound(root.network, graph)

    counter = itertools.count()
    heap: list = []
    if root.weight_bound != math.inf:
        heapq.heappush(heap, (*root.sort_key(), next(counter), root))
        stats.nodes_generated += 1

    best: tuple | None = None  # (weight, plan, trace)
    while heap:
        pp = heapq.heappop(heap)[-1]
        if best is not None and pp.weight_bound >= best[0]:
            break  # bound-ordered fringe: nothing left can improve
        if _is_solution_shaped(pp.network, gm):
            plan = _best_linearization(
                pp, problem.init, gm, methods_by_key, linearization_cap
            )
            if plan is not None:
                stats.solutions_found += 1
                if best is None:  # pops in weight order, so the first is best
                    best = (pp.weight_bound, plan, pp.trace)
            continue
        if stats.nodes_expanded >= bounds.max_nodes:
            stats.bounds_hit = True
            break
        stats.nodes_expanded += 1
        if collect_audit:
            audit.append(
                AuditRecord(
                    state=problem.init,
                    network=pp.network,
                    h=eu_of_total_cost(utility_spec, -pp.weight_bound)
                    if pp.weight_bound != math.inf
                    else -math.inf,
                    remaining_depth=bounds.max_depth - pp.depth,
                )
            )
        target = _select_task(pp, gm)
        if target is None:
            # unbound variables with no compound task left to bind them
            logger.debug("dropping stuck partial plan %s", sorted(pp.network.nodes))
            continue
        if pp.depth >= bounds.max_depth:
            stats.bounds_hit = True
            continue
        for succ in _refine_task(pp, target, gm):
            succ.weight_bound = _weight_bound(succ.network, graph)
            if succ.weight_bound == math.inf:
                continue  # some task has no compatible grounding: dead
            stats.nodes_generated += 1
            heapq.heappush(heap, (*succ.sort_key(), next(counter), succ))

    if best is not None:
        weight, plan, trace = best
        eu = plan_eu_segmented(utility_spec, plan)
        logger.info(
            "plan-space solution with EU %.9g after %d expansions",
            eu,
            stats.nodes_expanded,
        )
        return SearchResult("solution", plan, eu, stats, trace, audit)
    status = "bounds_exhausted" if stats.bounds_hit else "failure"
    return SearchResult(status, None, None, stats, (), audit)


def _is_solution_shaped(network: TaskNetwork, gm: GroundModel) -> bool:
    return all(
        gm.is_primitive(t.name) and t.is_ground() for t in network.nodes.values()
    )


def _select_task(pp: PartialPlan, gm: GroundModel) -> str | None:
    for tid in sorted(pp.network.nodes):
        if gm.is_compound(pp.network.nodes[tid].name):
            return tid
    return None


def _best_linearization(
    pp: PartialPlan, init, gm: GroundModel, methods_by_key, cap: int
) -> tuple | None:
    """First executable linearization in lexicographic topological order.

    Execution replays operator preconditions and effects from the initial
    state; each deferred method precondition is checked in the state right
    before the first primitive descendant of its decomposition runs (at the
    initial state when the decomposition left no descendants).
    """
    for order in _topological_orders(pp.network, cap):
        plan = _validate_linearization(order, pp, init, gm, methods_by_key)
        if plan is not None:
            return plan
    return None


def _topological_orders(network: TaskNetwork, cap: int):
    succs: dict[str, list[str]] = {tid: [] for tid in network.nodes}
    indeg = {tid: 0 for tid in network.nodes}
    for a, b in network.order:
        succs[a].append(b)
        indeg[b] += 1
    budget = [cap]

    def rec(prefix: list[str], avail: list[str]):
        if budget[0] <= 0:
            return
        if not avail:
            if len(prefix) == len(network.nodes):
                budget[0] -= 1
                yield list(prefix)
            return
        for choice in list(avail):
            nxt = sorted(a for a in avail if a != choice)
            prefix.append(choice)
            for tid in succs[choice]:
                indeg[tid] -= 1
                if indeg[tid] == 0:
                    nxt.append(tid)
            yield from rec(prefix, sorted(nxt))
            for tid in succs[choice]:
                indeg[tid] += 1
            prefix.pop()

    start = sorted(tid for tid in network.nodes if indeg[tid] == 0)
    yield from rec([], start)


def _validate_linearization(order, pp: PartialPlan, init, gm: GroundModel,
                            methods_by_key) -> tuple | None:
    checks: dict[int, list[GroundMethod]] = {}
    for _, task_id, mkey in pp.trace:
        meth = methods_by_key[mkey]
        if not meth.precond:
            continue
        prefix = task_id + "."
        positions = [i for i, tid in enumerate(order) if tid.startswith(prefix)]
        at = min(positions) if positions else 0
        checks.setdefault(at, []).append(meth)
    state = init
    steps = []
    if not order:  # fully decomposed away: still honor deferred preconditions
        if any(not applicable(meth, state) for meth in checks.get(0, ())):
            return None
        return ()
    for i, tid in enumerate(order):
        for meth in checks.get(i, ()):
            if not applicable(meth, state):
                return None
        task = pp.network.nodes[tid]
        op = gm.operators.get((task.name, task.args))
        if op is None or not applicable(op, state):
            return None
        state = progress(state, op, 0)
        steps.append(op)
    return tuple(steps)
