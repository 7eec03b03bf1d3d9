"""Ground truth facilities: exhaustive plan enumeration and simulation.

The oracle enumerates, at desk scale, every solution plan of a problem within
a depth bound and scores each by exact trajectory enumeration; it is the
correctness reference the searches are validated against.  The simulator
samples plan trajectories with a seeded generator and reports empirical
utility statistics, including one-switch utilities over the realized resource
levels, which no closed-form evaluator covers.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .errors import (
    EffectNondeterminismError,
    EnumerationCapError,
    ModelError,
)
from .grounding import GroundModel, ground
from .model import (
    State,
    TaskNetwork,
    applicable,
    decompose,
    find_unconstrained_tasks,
    progress,
)
from .search_state import SearchBounds
from .utility import ONE_SWITCH, UtilitySpec, eval_one_switch, eu_of_total_cost, plan_eu_exact

DEFAULT_ENUMERATION_CAP = 1_000_000


@dataclass
class OracleResult:
    plans: tuple  # solution plans, canonically ordered, pairwise distinct
    expected_utilities: tuple[float, ...]
    best_plan: tuple | None
    best_eu: float | None
    visited: int
    bounds_hit: bool

    def __len__(self) -> int:
        return len(self.plans)


def enumerate_plans(
    ground_model: GroundModel,
    state: State,
    network: TaskNetwork,
    max_depth: int,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> tuple[list, bool, int]:
    """Every solution plan reachable within ``max_depth`` decompositions.

    Exhaustive depth-first search over every interleaving and method choice;
    plans are deduplicated and returned in canonical order.  Also reports
    whether the depth bound cut any branch (so the listing may be
    incomplete) and how many search-tree nodes were visited.  Raises
    :class:`EnumerationCapError` past ``cap`` visits.
    """
    if not ground_model.effect_deterministic:
        raise EffectNondeterminismError(
            "plan enumeration requires an effect-deterministic model"
        )
    if not network.is_ground():
        raise ModelError("plan enumeration requires a ground task network")

    plans: dict[tuple, tuple] = {}
    visited = 0
    bounds_hit = False

    def dfs(state: State, network: TaskNetwork, prefix: tuple, depth: int) -> None:
        nonlocal visited, bounds_hit
        visited += 1
        if visited > cap:
            raise EnumerationCapError(
                f"enumeration exceeded the cap of {cap} search-tree nodes"
            )
        if not network.nodes:
            plans.setdefault(tuple(op.key for op in prefix), prefix)
            return
        for tid in sorted(find_unconstrained_tasks(network)):
            task = network.nodes[tid]
            if ground_model.is_primitive(task.name):
                op = ground_model.operators.get((task.name, task.args))
                if op is not None and applicable(op, state):
                    dfs(progress(state, op, 0), network.without(tid),
                        prefix + (op,), depth)
            else:
                if depth >= max_depth:
                    bounds_hit = True
                    continue
                for gm in ground_model.methods_by_instance.get(task, ()):
                    if applicable(gm, state):
                        dfs(state, decompose(network, tid, gm), prefix, depth + 1)

    dfs(state, network, (), 0)
    ordered = [plans[k] for k in sorted(plans)]
    return ordered, bounds_hit, visited


def oracle_enumerate(
    problem,
    utility_spec: UtilitySpec,
    bounds: SearchBounds = SearchBounds(),
    *,
    ground_model: GroundModel | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> OracleResult:
    """Enumerate all solutions and score each by exact expected utility.

    The argmax breaks ties on the canonical plan order, so it does not
    depend on method declaration order.
    """
    gm = ground_model if ground_model is not None else ground(problem.domain, problem)
    plans, bounds_hit, visited = enumerate_plans(
        gm, problem.init, problem.initial_network, bounds.max_depth, cap
    )
    eus = tuple(plan_eu_exact(utility_spec, plan) for plan in plans)
    best_plan, best_eu = None, None
    for plan, eu in zip(plans, eus):
        if best_eu is None or eu > best_eu:
            best_plan, best_eu = plan, eu
    return OracleResult(
        plans=tuple(plans),
        expected_utilities=eus,
        best_plan=best_plan,
        best_eu=best_eu,
        visited=visited,
        bounds_hit=bounds_hit,
    )


@dataclass
class SimulationRun:
    outcome_indices: tuple[int, ...]
    total_cost: float
    utility: float
    resources: tuple[float, ...] | None = None  # R_0, R_1, ... for one-switch
    depleted: bool = False


@dataclass
class SimulationSummary:
    n_runs: int
    seed: int
    mean_utility: float
    sample_variance: float
    outcome_counts: tuple[tuple[int, ...], ...]
    mean_total_cost: float
    depleted_runs: int = 0
    runs: list[SimulationRun] = field(default_factory=list)

    @property
    def std_error(self) -> float:
        if self.n_runs < 2:
            return 0.0
        return math.sqrt(self.sample_variance / self.n_runs)


def simulate(
    plan,
    utility_spec: UtilitySpec,
    n_runs: int,
    seed: int,
    *,
    keep_runs: int = 0,
) -> SimulationSummary:
    """Monte Carlo execution of a plan: sample each step's outcome.

    Deterministic for a fixed seed.  Static specs score each run by the
    utility of its realized total cost; one-switch specs track the resource
    level R after every step and score the run by the utility of the final
    level, recording the whole realized sequence.  Resource depletion below
    zero is reported, not fatal.
    """
    if n_runs < 1:
        raise ModelError(f"n_runs must be >= 1, got {n_runs}")
    steps = list(plan)
    rng = random.Random(seed)
    one_switch = utility_spec.kind == ONE_SWITCH

    utilities: list[float] = []
    costs: list[float] = []
    counts = [[0] * len(op.outcomes) for op in steps]
    depleted_runs = 0
    kept: list[SimulationRun] = []

    for _ in range(n_runs):
        indices = []
        step_costs = []
        for si, op in enumerate(steps):
            idx = _sample_outcome(op, rng)
            indices.append(idx)
            counts[si][idx] += 1
            step_costs.append(op.outcomes[idx].cost)
        total = math.fsum(step_costs)
        resources = None
        depleted = False
        if one_switch:
            levels = [utility_spec.initial_resource]
            for c in step_costs:
                levels.append(levels[-1] + c)
            resources = tuple(levels)
            depleted = any(r < 0 for r in levels)
            depleted_runs += int(depleted)
            utility = eval_one_switch(utility_spec, levels[-1])
        else:
            utility = eu_of_total_cost(utility_spec, total)
        utilities.append(utility)
        costs.append(total)
        if len(kept) < keep_runs:
            kept.append(
                SimulationRun(tuple(indices), total, utility, resources, depleted)
            )

    mean = math.fsum(utilities) / n_runs
    if n_runs > 1:
        variance = math.fsum((u - mean) ** 2 for u in utilities) / (n_runs - 1)
    else:
        variance = 0.0
    return SimulationSummary(
        n_runs=n_runs,
        seed=seed,
        mean_utility=mean,
        sample_variance=variance,
        outcome_counts=tuple(tuple(c) for c in counts),
        mean_total_cost=math.fsum(costs) / n_runs,
        depleted_runs=depleted_runs,
        runs=kept,
    )


def _sample_outcome(op, rng: random.Random) -> int:
    r = rng.random()
    acc = 0.0
    for idx, out in enumerate(op.outcomes):
        acc += out.p
        if r < acc:
            return idx
    return len(op.outcomes) - 1  # guard against float round-off at the tail
