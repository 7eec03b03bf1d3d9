"""Core HTN model: states, cost-variable operators, methods, task networks.

States are closed-world sets of ground atoms.  An atom is a
``(predicate, args)`` tuple; a :class:`Literal` adds an optional negation for
use in preconditions.  Operator costs are strictly negative reals drawn from a
discrete distribution attached to each outcome.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ModelError

Atom = tuple[str, tuple[str, ...]]
State = frozenset[Atom]

PROBABILITY_TOLERANCE = 1e-9


def is_variable(term: str) -> bool:
    """A term is a variable iff it starts with ``?``; anything else is an object."""
    return term.startswith("?")


@dataclass(frozen=True)
class Literal:
    pred: str
    args: tuple[str, ...]
    negated: bool = False

    @property
    def atom(self) -> Atom:
        return (self.pred, self.args)

    def is_ground(self) -> bool:
        return not any(is_variable(a) for a in self.args)

    def __str__(self) -> str:
        body = f"{self.pred}({', '.join(self.args)})"
        return f"not {body}" if self.negated else body


@dataclass(frozen=True)
class Param:
    name: str
    type: str


@dataclass(frozen=True)
class Outcome:
    """One probabilistic branch of an operator: effect plus its cost.

    ``p`` must lie in (0, 1]; ``cost`` must be strictly negative; add and
    delete sets must be disjoint.
    """

    p: float
    add: frozenset[Literal]
    delete: frozenset[Literal]
    cost: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ModelError(f"outcome probability must be in (0, 1], got {self.p}")
        if not self.cost < 0.0:
            raise ModelError(f"outcome cost must be strictly negative, got {self.cost}")
        overlap = {l.atom for l in self.add} & {l.atom for l in self.delete}
        if overlap:
            raise ModelError(f"outcome adds and deletes overlap on {sorted(overlap)}")
        if any(l.negated for l in self.add | self.delete):
            raise ModelError("effect literals must be positive")


@dataclass(frozen=True)
class Operator:
    """A cost-variable operator: one primitive task schema.

    The outcome probabilities must sum to 1.  Sums within
    ``PROBABILITY_TOLERANCE`` of 1 are renormalized (decimal inputs rarely sum
    exactly); anything further off is rejected.
    """

    name: str
    params: tuple[Param, ...]
    precond: tuple[Literal, ...]
    outcomes: tuple[Outcome, ...]

    def __post_init__(self):
        if not self.outcomes:
            raise ModelError(f"operator {self.name} has no outcomes")
        total = sum(o.p for o in self.outcomes)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise ModelError(
                f"operator {self.name}: outcome probabilities sum to {total!r}, not 1"
            )
        if total != 1.0:
            scaled = tuple(
                Outcome(o.p / total, o.add, o.delete, o.cost) for o in self.outcomes
            )
            object.__setattr__(self, "outcomes", scaled)
        names = {p.name for p in self.params}
        for lit in self.precond + tuple(
            l for o in self.outcomes for l in tuple(o.add) + tuple(o.delete)
        ):
            for a in lit.args:
                if is_variable(a) and a not in names:
                    raise ModelError(
                        f"operator {self.name}: unbound variable {a} in {lit}"
                    )

    @property
    def effect_deterministic(self) -> bool:
        """True iff all outcomes share one add/delete pair (costs may differ)."""
        first = self.outcomes[0]
        return all(
            o.add == first.add and o.delete == first.delete for o in self.outcomes
        )


@dataclass(frozen=True)
class TaskInstance:
    """A task occurrence: name plus argument tuple (possibly with variables)."""

    name: str
    args: tuple[str, ...]

    def is_ground(self) -> bool:
        return not any(is_variable(a) for a in self.args)

    def __str__(self) -> str:
        return f"{self.name}({', '.join(self.args)})"


@dataclass(frozen=True)
class Method:
    """A decomposition recipe for one compound task."""

    name: str
    task: TaskInstance
    params: tuple[Param, ...]
    precond: tuple[Literal, ...]
    subtasks: tuple[tuple[str, TaskInstance], ...]
    ordering: frozenset[tuple[str, str]]

    def __post_init__(self):
        ids = [sid for sid, _ in self.subtasks]
        if len(ids) != len(set(ids)):
            raise ModelError(f"method {self.name}: duplicate subtask ids")
        for sid in ids:
            if "." in sid:
                raise ModelError(
                    f"method {self.name}: subtask id {sid!r} must not contain '.'"
                )
        known = set(ids)
        for a, b in self.ordering:
            if a not in known or b not in known:
                raise ModelError(f"method {self.name}: ordering references unknown id")
        if _has_cycle(known, self.ordering):
            raise ModelError(f"method {self.name}: ordering is cyclic")
        names = {p.name for p in self.params}
        terms = list(self.task.args)
        for lit in self.precond:
            terms.extend(lit.args)
        for _, st in self.subtasks:
            terms.extend(st.args)
        for t in terms:
            if is_variable(t) and t not in names:
                raise ModelError(f"method {self.name}: unbound variable {t}")


@dataclass(frozen=True)
class TaskNetwork:
    """A set of identified task instances under a strict partial order.

    ``order`` holds (before, after) pairs; the transitive closure must be
    irreflexive.  Never mutated: all operations return fresh networks.
    """

    nodes: dict[str, TaskInstance]
    order: frozenset[tuple[str, str]]

    def __post_init__(self):
        for a, b in self.order:
            if a not in self.nodes or b not in self.nodes:
                raise ModelError(f"ordering references unknown task id ({a}, {b})")
        if _has_cycle(set(self.nodes), self.order):
            raise ModelError("task network ordering is cyclic")

    def is_ground(self) -> bool:
        return all(t.is_ground() for t in self.nodes.values())

    def without(self, task_id: str) -> TaskNetwork:
        """Remove a task and every ordering constraint that mentions it."""
        if task_id not in self.nodes:
            raise ModelError(f"unknown task id {task_id}")
        nodes = {tid: t for tid, t in self.nodes.items() if tid != task_id}
        order = frozenset((a, b) for a, b in self.order if task_id not in (a, b))
        return TaskNetwork(nodes, order)


@dataclass(frozen=True)
class Resource:
    """A consumable resource with a fixed capacity."""

    capacity: float
    remaining: float

    def __post_init__(self):
        if self.capacity <= 0:
            raise ModelError(f"resource capacity must be positive, got {self.capacity}")
        if self.remaining > self.capacity:
            raise ModelError("remaining resource exceeds capacity")


@dataclass(frozen=True)
class Domain:
    """A lifted planning domain: typed predicates, operators, and methods."""

    name: str
    types: dict[str, str | None]
    predicates: dict[str, tuple[str, ...]]
    operators: dict[str, Operator]
    compound_tasks: dict[str, tuple[str, ...]]
    methods: dict[str, Method]

    def __post_init__(self):
        _check_type_hierarchy(self.types)
        clash = set(self.operators) & set(self.compound_tasks)
        if clash:
            raise ModelError(f"task names both primitive and compound: {sorted(clash)}")

    def task_arity(self, name: str) -> int:
        if name in self.operators:
            return len(self.operators[name].params)
        if name in self.compound_tasks:
            return len(self.compound_tasks[name])
        raise ModelError(f"unknown task name {name!r}")


@dataclass(frozen=True)
class Universe:
    """Typed object universe: the type hierarchy plus the problem's objects."""

    types: dict[str, str | None]
    objects: dict[str, str]

    def __post_init__(self):
        _check_type_hierarchy(self.types)
        for obj, typ in self.objects.items():
            if typ not in self.types:
                raise ModelError(f"object {obj} has undeclared type {typ}")

    def is_subtype(self, child: str, parent: str) -> bool:
        cur: str | None = child
        while cur is not None:
            if cur == parent:
                return True
            cur = self.types.get(cur)
        return False

    def objects_of(self, typ: str) -> tuple[str, ...]:
        """All objects whose type is ``typ`` or a descendant, sorted by name."""
        return tuple(
            sorted(o for o, t in self.objects.items() if self.is_subtype(t, typ))
        )


@dataclass(frozen=True)
class Problem:
    """An HTN planning problem: initial state plus initial task network.

    The agent's utility function is supplied separately (see
    :mod:`riskhtn.utility`); it selects which solution counts as best, not
    which plans are solutions.
    """

    domain: Domain
    universe: Universe
    init: State
    initial_network: TaskNetwork

    def __post_init__(self):
        for tid, task in self.initial_network.nodes.items():
            arity = self.domain.task_arity(task.name)
            if arity != len(task.args):
                raise ModelError(
                    f"initial task {tid}: {task.name} expects {arity} args"
                )


def _check_type_hierarchy(types: dict[str, str | None]) -> None:
    for child, parent in types.items():
        if parent is not None and parent not in types:
            raise ModelError(f"type {child} has undeclared parent {parent}")
    for start in types:
        seen = {start}
        cur = types[start]
        while cur is not None:
            if cur in seen:
                raise ModelError(f"type hierarchy contains a cycle through {cur}")
            seen.add(cur)
            cur = types[cur]


def _has_cycle(ids: set[str], order: frozenset[tuple[str, str]]) -> bool:
    # Kahn's algorithm; leftovers indicate a cycle.
    succs: dict[str, list[str]] = {i: [] for i in ids}
    indeg = {i: 0 for i in ids}
    for a, b in order:
        succs[a].append(b)
        indeg[b] += 1
    queue = [i for i in ids if indeg[i] == 0]
    seen = 0
    while queue:
        cur = queue.pop()
        seen += 1
        for nxt in succs[cur]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                queue.append(nxt)
    return seen != len(ids)


def applicable(item, state: State) -> bool:
    """True iff the ground operator/method's precondition holds in ``state``.

    Positive literals must be present, negated ones absent (closed world).
    """
    for lit in item.precond:
        if not lit.is_ground():
            raise ModelError(f"applicability check on non-ground literal {lit}")
        if lit.negated == (lit.atom in state):
            return False
    return True


def progress(state: State, ground_op, outcome_index: int = 0) -> State:
    """Apply one outcome of an applicable ground operator to the state."""
    if not 0 <= outcome_index < len(ground_op.outcomes):
        raise ModelError(
            f"operator {ground_op.name}: invalid outcome index {outcome_index}"
        )
    if not applicable(ground_op, state):
        raise ModelError(f"operator {ground_op.name}{ground_op.args} not applicable")
    out = ground_op.outcomes[outcome_index]
    return frozenset(
        (state - {l.atom for l in out.delete}) | {l.atom for l in out.add}
    )


def find_unconstrained_tasks(network: TaskNetwork) -> set[str]:
    """Ids with no predecessor in the partial order (its minimal elements)."""
    constrained = {b for _, b in network.order}
    return set(network.nodes) - constrained


def decompose(network: TaskNetwork, task_id: str, ground_method) -> TaskNetwork:
    """Replace a compound task by a ground method's task network.

    Inserted tasks get fresh ids ``<task_id>.<subtask_id>`` so the
    decomposition trace stays readable; the method's internal ordering is
    kept and every predecessor/successor of the replaced task constrains all
    inserted tasks.
    """
    if task_id not in network.nodes:
        raise ModelError(f"unknown task id {task_id}")
    target = network.nodes[task_id]
    if ground_method.task != target:
        raise ModelError(
            f"method {ground_method.name} decomposes {ground_method.task}, "
            f"not {target}"
        )
    fresh = {sid: f"{task_id}.{sid}" for sid, _ in ground_method.subtasks}
    nodes = {tid: t for tid, t in network.nodes.items() if tid != task_id}
    for sid, sub in ground_method.subtasks:
        nodes[fresh[sid]] = sub
    order = set()
    for a, b in network.order:
        if a == task_id and b == task_id:  # unreachable: order is irreflexive
            continue
        if a == task_id:
            order.update((nid, b) for nid in fresh.values())
        elif b == task_id:
            order.update((a, nid) for nid in fresh.values())
        else:
            order.add((a, b))
    for a, b in ground_method.ordering:
        order.add((fresh[a], fresh[b]))
    result = TaskNetwork(nodes, frozenset(order))  # constructor re-checks acyclicity
    return result
