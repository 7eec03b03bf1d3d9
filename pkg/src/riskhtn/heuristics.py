"""Relaxed classical model and the h_max heuristic for state-based search.

The HTN problem is relaxed into a delete-free classical problem over the
original atoms plus one achievement fact per ground task.  Original operators
keep their preconditions, add their effects plus their task's achievement
fact, and cost their expected-utility magnitude; each ground method becomes a
zero-cost action that converts its subtasks' achievement facts into the
decomposed task's achievement fact.  The goal is the achievement of every
task left in a search node's network, and h_max over this model is an
admissible (never pessimistic) estimate of the cheapest completion.

Each action carries two magnitudes: ``cost`` is the operator's |EU| as the
relaxation prescribes, while ``weight`` is the certainty-equivalent magnitude
the searches actually combine.  They coincide for linear utilities; for
exponential ones only the weights sum to something the utility transform
maps back to an exact expected-utility bound.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .grounding import GroundModel
from .model import State, TaskInstance
from .utility import UtilitySpec, eu_of_total_cost, operator_eu, step_weight

RCFact = tuple

_ATOM = "atom"
_TASK = "task"


def _atom_fact(atom) -> RCFact:
    return (_ATOM, atom[0], atom[1])


def _task_fact(task: TaskInstance) -> RCFact:
    return (_TASK, task.name, task.args)


@dataclass(frozen=True)
class RCAction:
    name: str
    precond: tuple[RCFact, ...]
    add: tuple[RCFact, ...]
    cost: float
    weight: float
    from_method: bool


class RCModel:
    """The relaxed model, reusable across all nodes of one search."""

    def __init__(self, ground_model: GroundModel, utility_spec: UtilitySpec):
        self.utility_spec = utility_spec
        actions: list[RCAction] = []
        for key in sorted(ground_model.operators):
            op = ground_model.operators[key]
            # Delete relaxation: negative preconditions are assumed satisfiable.
            precond = tuple(
                sorted({_atom_fact(l.atom) for l in op.precond if not l.negated})
            )
            adds = {_task_fact(op.task)}
            for out in op.outcomes:
                adds.update(_atom_fact(l.atom) for l in out.add)
            actions.append(
                RCAction(
                    name=f"op:{op}",
                    precond=precond,
                    add=tuple(sorted(adds)),
                    cost=abs(operator_eu(utility_spec, op)),
                    weight=step_weight(utility_spec, op),
                    from_method=False,
                )
            )
        for gm in sorted(ground_model.methods, key=lambda m: m.key):
            precond = tuple(sorted({_task_fact(t) for _, t in gm.subtasks}))
            actions.append(
                RCAction(
                    name=f"method:{gm}",
                    precond=precond,
                    add=(_task_fact(gm.task),),
                    cost=0.0,
                    weight=0.0,
                    from_method=True,
                )
            )
        self.actions = tuple(actions)
        self._consumers: dict[RCFact, list[int]] = {}
        for idx, act in enumerate(self.actions):
            for f in act.precond:
                self._consumers.setdefault(f, []).append(idx)

    def hmax_weight(self, state: State, goal_tasks) -> float:
        """Admissible estimate of the least weight achieving every goal task.

        h_max label-setting over the relaxed model: a fact's label is the
        cheapest max-precondition chain reaching it, and the goal set scores
        the costliest of its members.  Returns +inf when some achievement
        fact is unreachable even in the relaxation.
        """
        goals = [_task_fact(t) for t in goal_tasks]
        if not goals:
            return 0.0
        label: dict[RCFact, float] = {}
        heap: list[tuple[float, RCFact]] = []
        for atom in state:
            f = _atom_fact(atom)
            label[f] = 0.0
            heap.append((0.0, f))
        heapq.heapify(heap)
        remaining = [len(a.precond) for a in self.actions]
        trigger = [0.0] * len(self.actions)

        def fire(idx: int) -> None:
            act = self.actions[idx]
            value = trigger[idx] + act.weight
            for f in act.add:
                if value < label.get(f, math.inf):
                    label[f] = value
                    heapq.heappush(heap, (value, f))

        for idx, act in enumerate(self.actions):
            if not act.precond:
                fire(idx)

        goal_set = set(goals)
        settled: set[RCFact] = set()
        while heap and goal_set - settled:
            value, fact = heapq.heappop(heap)
            if fact in settled or value > label.get(fact, math.inf):
                continue
            settled.add(fact)
            for idx in self._consumers.get(fact, ()):
                remaining[idx] -= 1
                trigger[idx] = max(trigger[idx], value)
                if remaining[idx] == 0:
                    fire(idx)
        return max(label.get(g, math.inf) for g in goals)


def compute_rc_heuristic(
    node, ground_model: GroundModel, utility_spec: UtilitySpec, rc_model: RCModel | None = None
) -> float:
    """Optimistic expected utility of completing a node's remaining network.

    An empty network scores 0; a network containing an unachievable task
    scores -inf, marking the node prunable.
    """
    rc = rc_model if rc_model is not None else RCModel(ground_model, utility_spec)
    w = rc.hmax_weight(node.state, node.network.nodes.values())
    return eu_of_total_cost(utility_spec, -w) if w != math.inf else -math.inf
