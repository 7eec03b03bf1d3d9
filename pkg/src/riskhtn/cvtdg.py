"""Cost-variable task decomposition graph: build, prune, annotate.

The graph is bipartite between task vertices (compound and primitive, with
each primitive carrying its operator's cost distribution) and method
vertices, restricted to what is reachable by decomposition from the initial
network (minimality).

Annotation attaches two coupled estimates to every vertex, both computed by
optimistic bottom-up value iteration:

* ``eu`` — the expected-utility estimate used to order plan-space search:
  primitives get their operator EU, methods the negated product of their
  children's EU magnitudes, compounds the max over their methods.
* ``weight`` — the additive certainty-equivalent magnitude of the cheapest
  realization.  Sums of these are exactly inverse-utility-transformable, so
  they give sound optimistic bounds for pruning against incumbent solutions
  even when EU magnitudes fall below 1 (where the product form stops being
  an upper bound on exact plan utility).

Recursive domains need not converge; estimates start at the optimum (EU of
0 from below, weight 0) and only tighten, so after ``k_unfold`` rounds any
still-changing vertex is kept optimistic and flagged unconverged.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .errors import ModelError, UnsupportedUtilityError
from .grounding import GroundModel, GroundMethod, GroundOperator, MethodKey, unify_args
from .model import TaskInstance, TaskNetwork
from .utility import UtilitySpec, operator_eu, step_weight

logger = logging.getLogger(__name__)

DEFAULT_K_UNFOLD = 10


@dataclass
class VertexAnnotation:
    eu: float
    weight: float
    converged: bool = True


@dataclass
class CVTDG:
    ground_model: GroundModel
    compound_vertices: tuple[TaskInstance, ...]
    primitive_vertices: dict[TaskInstance, GroundOperator]
    method_vertices: dict[MethodKey, GroundMethod]
    task_to_methods: dict[TaskInstance, tuple[MethodKey, ...]]
    method_to_tasks: dict[MethodKey, tuple[TaskInstance, ...]]
    dead_end_tasks: frozenset[TaskInstance]
    task_annotations: dict[TaskInstance, VertexAnnotation] = field(default_factory=dict)
    method_annotations: dict[MethodKey, VertexAnnotation] = field(default_factory=dict)
    utility_spec: UtilitySpec | None = None
    k_unfold: int | None = None

    @property
    def compound_set(self) -> frozenset[TaskInstance]:
        return frozenset(self.compound_vertices)

    @property
    def annotated(self) -> bool:
        return self.utility_spec is not None

    def compatible_groundings(self, task: TaskInstance) -> tuple[TaskInstance, ...]:
        return compatible_groundings(task, self)

    def optimistic_eu(self, task: TaskInstance) -> float:
        """Best annotated EU over the task's compatible groundings."""
        best = -math.inf
        for cand in compatible_groundings(task, self):
            best = max(best, self.task_annotations[cand].eu)
        return best

    def optimistic_weight(self, task: TaskInstance) -> float:
        """Least annotated weight over the task's compatible groundings."""
        best = math.inf
        for cand in compatible_groundings(task, self):
            best = min(best, self.task_annotations[cand].weight)
        return best


def build_cvtdg(ground_model: GroundModel, initial_network: TaskNetwork) -> CVTDG:
    """Build the minimal decomposition graph reachable from the network's tasks."""
    gm = ground_model
    seeds: list[TaskInstance] = []
    for task in initial_network.nodes.values():
        if task.is_ground():
            seeds.append(task)
        else:
            seeds.extend(_instances_of(task, gm))

    compound: list[TaskInstance] = []
    primitive: dict[TaskInstance, GroundOperator] = {}
    method_vertices: dict[MethodKey, GroundMethod] = {}
    task_to_methods: dict[TaskInstance, tuple[MethodKey, ...]] = {}
    method_to_tasks: dict[MethodKey, tuple[TaskInstance, ...]] = {}
    dead_ends: set[TaskInstance] = set()

    seen: set[TaskInstance] = set()
    queue = list(dict.fromkeys(seeds))
    while queue:
        task = queue.pop(0)
        if task in seen:
            continue
        seen.add(task)
        if gm.is_primitive(task.name):
            op = gm.operators.get((task.name, task.args))
            if op is not None:
                primitive[task] = op
            else:
                # statically pruned instance: keep the vertex, mark it dead
                primitive[task] = GroundOperator(task.name, task.args, (), _DEAD_OUTCOMES)
                dead_ends.add(task)
            continue
        if not gm.is_compound(task.name):
            raise ModelError(f"task {task} is neither primitive nor compound")
        compound.append(task)
        methods = gm.methods_by_instance.get(task, ())
        if not methods:
            logger.warning("dead-end compound task %s: no method can decompose it", task)
            dead_ends.add(task)
        keys = []
        for meth in methods:
            keys.append(meth.key)
            method_vertices[meth.key] = meth
            children = tuple(t for _, t in meth.subtasks)
            method_to_tasks[meth.key] = children
            if not children:
                logger.warning("method %s has an empty task network", meth)
            queue.extend(children)
        task_to_methods[task] = tuple(sorted(keys))

    return CVTDG(
        ground_model=gm,
        compound_vertices=tuple(sorted(compound, key=str)),
        primitive_vertices=dict(sorted(primitive.items(), key=lambda kv: str(kv[0]))),
        method_vertices=dict(sorted(method_vertices.items())),
        task_to_methods=task_to_methods,
        method_to_tasks=method_to_tasks,
        dead_end_tasks=frozenset(dead_ends),
    )


# Placeholder distribution for statically pruned operator vertices.
_DEAD_OUTCOMES = ()


def _instances_of(task: TaskInstance, gm: GroundModel):
    if gm.is_compound(task.name):
        pool = gm.compound_instances[task.name]
    elif gm.is_primitive(task.name):
        pool = tuple(
            op.task for key, op in sorted(gm.operators.items()) if key[0] == task.name
        )
    else:
        raise ModelError(f"unknown task name {task.name!r}")
    return tuple(t for t in pool if unify_args(task.args, t.args) is not None)


def annotate_expected_utilities(
    cvtdg: CVTDG, utility_spec: UtilitySpec, k_unfold: int = DEFAULT_K_UNFOLD
) -> CVTDG:
    """Precompute bottom-up expected-utility annotations on every vertex.

    Primitive vertices get their operator EU; method vertices the negated
    product of their subtask EU magnitudes (primitive subtasks included);
    compound vertices the maximum over their decomposing methods.  On cyclic
    graphs the values are iterated ``k_unfold`` rounds from the optimistic
    initialization; vertices still changing are left at EU 0 from below and
    flagged unconverged.
    """
    if not utility_spec.is_static:
        raise UnsupportedUtilityError(
            "CV-TDG annotation needs a segmenting (linear or exponential) utility"
        )
    if k_unfold < 1:
        raise ModelError(f"k_unfold must be >= 1, got {k_unfold}")

    eu: dict = {}
    weight: dict = {}
    for task, op in cvtdg.primitive_vertices.items():
        if op.outcomes:
            eu[task] = operator_eu(utility_spec, op)
            weight[task] = step_weight(utility_spec, op)
        else:
            eu[task] = -math.inf
            weight[task] = math.inf
    for task in cvtdg.compound_vertices:
        if cvtdg.task_to_methods.get(task):
            eu[task] = 0.0
            weight[task] = 0.0
        else:
            eu[task] = -math.inf
            weight[task] = math.inf
    for key, children in cvtdg.method_to_tasks.items():
        if children:
            eu[key] = 0.0
            weight[key] = 0.0
        else:
            eu[key] = -1.0  # empty decomposition: multiplicative identity, negated
            weight[key] = 0.0

    method_keys = sorted(k for k, ch in cvtdg.method_to_tasks.items() if ch)
    task_keys = sorted(
        (t for t in cvtdg.compound_vertices if cvtdg.task_to_methods.get(t)), key=str
    )

    changed_last: set = set()
    converged_globally = False
    for _ in range(k_unfold):
        changed_last = set()
        for key in method_keys:
            children = cvtdg.method_to_tasks[key]
            new_eu = _method_eu(eu, children)
            new_w = math.fsum(weight[t] for t in children)
            if new_eu != eu[key] or new_w != weight[key]:
                changed_last.add(key)
                eu[key] = new_eu
                weight[key] = new_w
        for task in task_keys:
            methods = cvtdg.task_to_methods[task]
            new_eu = max(eu[k] for k in methods)
            new_w = min(weight[k] for k in methods)
            if new_eu != eu[task] or new_w != weight[task]:
                changed_last.add(task)
                eu[task] = new_eu
                weight[task] = new_w
        if not changed_last:
            converged_globally = True
            break

    unconverged: set = set()
    if not converged_globally and changed_last:
        unconverged = _dependents_of(cvtdg, changed_last)
        for v in unconverged:
            eu[v] = 0.0  # reset to the unbounded-optimistic top value
    # A vertex still at the optimistic top never produced a real estimate:
    # recursion keeps the magnitude product at zero.  Real estimates are
    # strictly negative, so exact zero identifies these vertices.
    for v, value in eu.items():
        if value == 0.0:
            unconverged.add(v)

    cvtdg.task_annotations = {
        t: VertexAnnotation(eu[t], weight[t], t not in unconverged)
        for t in list(cvtdg.primitive_vertices) + list(cvtdg.compound_vertices)
    }
    cvtdg.method_annotations = {
        k: VertexAnnotation(eu[k], weight[k], k not in unconverged)
        for k in cvtdg.method_to_tasks
    }
    cvtdg.utility_spec = utility_spec
    cvtdg.k_unfold = k_unfold
    return cvtdg


def _method_eu(eu: dict, children) -> float:
    product = 1.0
    for t in children:
        v = eu[t]
        if v == -math.inf:
            return -math.inf
        product *= abs(v)
    return -product


def _dependents_of(cvtdg: CVTDG, changed: set) -> set:
    """Vertices whose value depends, transitively, on a changed vertex."""
    parents_of: dict = {}
    for task, methods in cvtdg.task_to_methods.items():
        for key in methods:
            parents_of.setdefault(key, []).append(task)
    for key, children in cvtdg.method_to_tasks.items():
        for t in children:
            parents_of.setdefault(t, []).append(key)
    dirty = set(changed)
    queue = list(changed)
    while queue:
        v = queue.pop()
        for parent in parents_of.get(v, ()):
            if parent not in dirty:
                dirty.add(parent)
                queue.append(parent)
    return dirty


def compatible_groundings(task: TaskInstance, cvtdg: CVTDG) -> tuple[TaskInstance, ...]:
    """Ground graph vertices whose task name and arguments unify with ``task``."""
    gm = cvtdg.ground_model
    if gm.is_primitive(task.name):
        pool = cvtdg.primitive_vertices
    elif gm.is_compound(task.name):
        pool = cvtdg.compound_set
    else:
        raise ModelError(f"unknown task name {task.name!r}")
    return tuple(
        sorted(
            (t for t in pool if t.name == task.name
             and unify_args(task.args, t.args) is not None),
            key=str,
        )
    )
