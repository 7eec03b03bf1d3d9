"""Risk-aware state-based HTN planning: best-first search over search nodes.

Each node carries the current state, the network of tasks still to process,
and the plan prefix.  Unconstrained primitive tasks are executed (progressing
the state), unconstrained compound tasks are decomposed by every applicable
method, and nodes are ordered by an optimistic expected-utility bound: the
prefix's exact certainty-equivalent weight plus the relaxed-model h_max
estimate of the remainder.  Because certainty equivalents add exactly for
linear and exponential utilities and h_max never overestimates, the bound is
never below the best completion's true expected utility, the fringe pops in
nonincreasing bound order, and the incumbent solution is optimal the moment
the best fringe bound stops exceeding it — for the exponential attitudes as
well as the linear one.

The searches require effect-deterministic models: every operator outcome must
share one add/delete pair, so progression never branches on chance.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field

from .errors import EffectNondeterminismError, ModelError, UnsupportedUtilityError
from .grounding import GroundModel, ground
from .heuristics import RCModel, compute_rc_heuristic
from .model import (
    State,
    TaskNetwork,
    applicable,
    decompose,
    find_unconstrained_tasks,
    progress,
)
from .utility import (
    UtilitySpec,
    eu_of_total_cost,
    plan_eu_segmented,
    step_weight,
    total_cost_of_eu,
)

logger = logging.getLogger(__name__)

__all__ = [
    "AuditRecord",
    "SearchBounds",
    "SearchNode",
    "SearchResult",
    "SearchStats",
    "combine",
    "compute_rc_heuristic",  # re-exported: it belongs to this search's surface
    "expand",
    "find_plans",
]


@dataclass(frozen=True)
class SearchBounds:
    """Budget limits; exceeding either is reported distinctly from failure."""

    max_depth: int = 64  # total number of decompositions along a branch
    max_nodes: int = 1_000_000  # node expansions


@dataclass
class SearchStats:
    nodes_expanded: int = 0
    nodes_generated: int = 0
    solutions_found: int = 0
    bounds_hit: bool = False

    def as_dict(self) -> dict:
        return {
            "nodes_expanded": self.nodes_expanded,
            "nodes_generated": self.nodes_generated,
            "solutions_found": self.solutions_found,
            "bounds_hit": self.bounds_hit,
        }


@dataclass(frozen=True)
class AuditRecord:
    """What the admissibility audit needs from one expanded node."""

    state: State
    network: TaskNetwork
    h: float
    remaining_depth: int


@dataclass
class SearchNode:
    state: State
    network: TaskNetwork
    plan_prefix: tuple
    depth: int
    g_weight: float
    h_weight: float
    g: float = field(init=False)
    h: float = field(init=False)
    f: float = field(init=False)
    events: tuple = ()
    _spec: UtilitySpec | None = None

    def __post_init__(self):
        spec = self._spec
        self.g = eu_of_total_cost(spec, -self.g_weight)
        self.h = (
            eu_of_total_cost(spec, -self.h_weight)
            if self.h_weight != math.inf
            else -math.inf
        )
        self.f = combine(self.g, self.h, spec)

    @property
    def total_weight(self) -> float:
        return self.g_weight + self.h_weight

    def sort_key(self) -> tuple:
        prefix = tuple((op.name, op.args) for op in self.plan_prefix)
        return (self.total_weight, len(self.network.nodes), prefix)


@dataclass
class SearchResult:
    status: str  # "solution" | "failure" | "bounds_exhausted"
    plan: tuple | None
    expected_utility: float | None
    stats: SearchStats
    events: tuple = ()
    audit: list[AuditRecord] = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.status == "solution"


def combine(g: float, h: float, utility_spec: UtilitySpec) -> float:
    """Combine prefix and heuristic expected utilities into a node value.

    Linear utilities add.  Exponential utilities multiply magnitudes in the
    factored (per-step moment) space, so the combined value is the utility
    bound of the concatenated certainty equivalents; the fringe orders
    descending by this value with deterministic tie-breaking.
    """
    if not utility_spec.is_static:
        raise UnsupportedUtilityError("combine needs a linear or exponential spec")
    if utility_spec.kind == "linear":
        return g + h
    if -math.inf in (g, h):
        return -math.inf
    alpha = utility_spec.alpha
    mag_g = math.exp(alpha * abs(total_cost_of_eu(utility_spec, g)))
    mag_h = math.exp(alpha * abs(total_cost_of_eu(utility_spec, h)))
    return -(mag_g * mag_h)


def expand(
    node: SearchNode,
    ground_model: GroundModel,
    utility_spec: UtilitySpec,
    rc_model: RCModel | None = None,
    max_depth: int = SearchBounds.max_depth,
) -> list[SearchNode]:
    """All successors of a non-solution node.

    Unconstrained applicable primitives are applied; unconstrained compound
    tasks are decomposed by every method applicable in the current state.
    Successors whose heuristic proves the remainder unachievable are dropped.
    """
    rc = rc_model if rc_model is not None else RCModel(ground_model, utility_spec)
    succs: list[SearchNode] = []
    for tid in sorted(find_unconstrained_tasks(node.network)):
        task = node.network.nodes[tid]
        if ground_model.is_primitive(task.name):
            op = ground_model.operators.get((task.name, task.args))
            if op is None or not applicable(op, node.state):
                continue
            state = progress(node.state, op, 0)
            network = node.network.without(tid)
            succs.append(
                _make_node(
                    state=state,
                    network=network,
                    plan_prefix=node.plan_prefix + (op,),
                    depth=node.depth,
                    g_weight=node.g_weight + step_weight(utility_spec, op),
                    events=node.events + (("apply", tid, op.key),),
                    spec=utility_spec,
                    rc=rc,
                )
            )
        else:
            if node.depth >= max_depth:
                continue
            for gm in ground_model.methods_by_instance.get(task, ()):
                if not applicable(gm, node.state):
                    continue
                network = decompose(node.network, tid, gm)
                succs.append(
                    _make_node(
                        state=node.state,
                        network=network,
                        plan_prefix=node.plan_prefix,
                        depth=node.depth + 1,
                        g_weight=node.g_weight,
                        events=node.events + (("decompose", tid, gm.key),),
                        spec=utility_spec,
                        rc=rc,
                    )
                )
    return [s for s in succs if s.h_weight != math.inf]


def _make_node(*, state, network, plan_prefix, depth, g_weight, events, spec, rc):
    h_weight = rc.hmax_weight(state, network.nodes.values())
    return SearchNode(
        state=state,
        network=network,
        plan_prefix=plan_prefix,
        depth=depth,
        g_weight=g_weight,
        h_weight=h_weight,
        events=events,
        _spec=spec,
    )


def _depth_blocked(node: SearchNode, ground_model: GroundModel, max_depth: int) -> bool:
    if node.depth < max_depth:
        return False
    unconstrained = find_unconstrained_tasks(node.network)
    return any(
        ground_model.is_compound(node.network.nodes[tid].name)
        for tid in unconstrained
    )


def find_plans(
    problem,
    utility_spec: UtilitySpec,
    bounds: SearchBounds = SearchBounds(),
    *,
    ground_model: GroundModel | None = None,
    collect_audit: bool = False,
) -> SearchResult:
    """Best-first search for a maximum-expected-utility plan.

    Returns the best solution within the bounds; ``bounds_exhausted`` when a
    budget was hit before the space was exhausted (so absence of a solution
    is not proven), ``failure`` when the whole bounded space was explored.
    """
    if not utility_spec.is_static:
        raise UnsupportedUtilityError(
            "the planners support only linear and exponential utilities"
        )
    gm = ground_model if ground_model is not None else ground(problem.domain, problem)
    if not gm.effect_deterministic:
        raise EffectNondeterminismError(
            "state-based search requires an effect-deterministic model: every "
            "operator's outcomes must share one effect"
        )
    if not problem.initial_network.is_ground():
        raise ModelError("state-based search requires a ground initial network")

    rc = RCModel(gm, utility_spec)
    stats = SearchStats()
    audit: list[AuditRecord] = []
    root = _make_node(
        state=problem.init,
        network=problem.initial_network,
        plan_prefix=(),
        depth=0,
        g_weight=0.0,
        events=(),
        spec=utility_spec,
        rc=rc,
    )

    counter = itertools.count()
    heap: list = []
    if root.h_weight != math.inf:
        heapq.heappush(heap, (*root.sort_key(), next(counter), root))
        stats.nodes_generated += 1

    best: SearchNode | None = None
    while heap:
        node = heapq.heappop(heap)[-1]
        if best is not None and node.total_weight >= best.g_weight:
            break  # fringe is bound-ordered: nothing left can improve
        if not node.network.nodes:
            _validate_solution(node, problem, gm)
            stats.solutions_found += 1
            if best is None:  # first solution pops with the least weight
                best = node
            continue
        if stats.nodes_expanded >= bounds.max_nodes:
            stats.bounds_hit = True
            break
        stats.nodes_expanded += 1
        if collect_audit:
            audit.append(
                AuditRecord(
                    state=node.state,
                    network=node.network,
                    h=node.h,
                    remaining_depth=bounds.max_depth - node.depth,
                )
            )
        if _depth_blocked(node, gm, bounds.max_depth):
            stats.bounds_hit = True
        for succ in expand(node, gm, utility_spec, rc, bounds.max_depth):
            stats.nodes_generated += 1
            heapq.heappush(heap, (*succ.sort_key(), next(counter), succ))

    if best is not None:
        eu = plan_eu_segmented(utility_spec, best.plan_prefix)
        logger.info(
            "solution with EU %.9g after %d expansions", eu, stats.nodes_expanded
        )
        return SearchResult("solution", best.plan_prefix, eu, stats, best.events, audit)
    status = "bounds_exhausted" if stats.bounds_hit else "failure"
    return SearchResult(status, None, None, stats, (), audit)


def _validate_solution(node: SearchNode, problem, gm: GroundModel) -> None:
    # Redundant final validation: the prefix must be executable from s0.
    state = problem.init
    for op in node.plan_prefix:
        if not applicable(op, state):
            raise ModelError(
                f"internal error: solution prefix not applicable at {op}"
            )
        state = progress(state, op, 0)
