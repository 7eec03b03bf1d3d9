"""Grounding: full typed instantiation of a lifted domain against a problem.

Grounding is reachability-naive — every type-consistent binding is emitted —
with an optional relevance filter that drops operators whose preconditions
mention rigid atoms the initial state can never provide.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

from .errors import ModelError
from .model import (
    Domain,
    Literal,
    Outcome,
    Problem,
    State,
    TaskInstance,
    Universe,
    is_variable,
)

logger = logging.getLogger(__name__)

OpKey = tuple[str, tuple[str, ...]]
MethodKey = tuple[str, tuple[str, ...]]


@dataclass(frozen=True)
class GroundOperator:
    name: str
    args: tuple[str, ...]
    precond: tuple[Literal, ...]
    outcomes: tuple[Outcome, ...]

    @property
    def key(self) -> OpKey:
        return (self.name, self.args)

    @property
    def task(self) -> TaskInstance:
        return TaskInstance(self.name, self.args)

    def __str__(self) -> str:
        return f"{self.name}({', '.join(self.args)})"


@dataclass(frozen=True)
class GroundMethod:
    name: str
    args: tuple[str, ...]
    task: TaskInstance
    precond: tuple[Literal, ...]
    subtasks: tuple[tuple[str, TaskInstance], ...]
    ordering: frozenset[tuple[str, str]]

    @property
    def key(self) -> MethodKey:
        return (self.name, self.args)

    def __str__(self) -> str:
        return f"{self.name}({', '.join(self.args)})"


@dataclass(frozen=True)
class GroundModel:
    """All ground operator and method instances of a problem.

    Immutable after construction; safe to share across concurrent searches.
    """

    domain: Domain
    universe: Universe
    operators: dict[OpKey, GroundOperator]
    methods: tuple[GroundMethod, ...]
    methods_by_instance: dict[TaskInstance, tuple[GroundMethod, ...]]
    compound_instances: dict[str, tuple[TaskInstance, ...]]
    effect_deterministic: bool

    def is_primitive(self, name: str) -> bool:
        return name in self.domain.operators

    def is_compound(self, name: str) -> bool:
        return name in self.domain.compound_tasks

    def sorted_operators(self) -> tuple[GroundOperator, ...]:
        return tuple(self.operators[k] for k in sorted(self.operators))


def unify_args(
    pattern: tuple[str, ...], ground: tuple[str, ...]
) -> dict[str, str] | None:
    """Match a possibly-variable argument tuple against a ground one.

    Returns the variable binding, or None when the tuples cannot unify.
    """
    if len(pattern) != len(ground):
        return None
    binding: dict[str, str] = {}
    for pa, ga in zip(pattern, ground):
        if is_variable(pa):
            if binding.setdefault(pa, ga) != ga:
                return None
        elif pa != ga:
            return None
    return binding


def _subst(term: str, binding: dict[str, str]) -> str:
    return binding[term] if is_variable(term) else term


def _ground_literal(
    lit: Literal, binding: dict[str, str], universe: Universe, domain: Domain, who: str
) -> Literal:
    args = []
    for a in lit.args:
        g = _subst(a, binding)
        if g not in universe.objects:
            raise ModelError(f"{who}: unknown object {g!r} in {lit}")
        args.append(g)
    types = domain.predicates.get(lit.pred)
    if types is None:
        raise ModelError(f"{who}: undeclared predicate {lit.pred!r}")
    if len(types) != len(args):
        raise ModelError(f"{who}: predicate {lit.pred} expects {len(types)} args")
    for g, t in zip(args, types):
        if not universe.is_subtype(universe.objects[g], t):
            raise ModelError(
                f"{who}: argument {g} of type {universe.objects[g]} does not fit "
                f"parameter type {t} of {lit.pred}"
            )
    return Literal(lit.pred, tuple(args), lit.negated)


def _bindings(params, universe: Universe):
    pools = [universe.objects_of(p.type) for p in params]
    for combo in itertools.product(*pools):
        yield dict(zip((p.name for p in params), combo))


def _rigid_predicates(domain: Domain) -> set[str]:
    fluent = {
        l.pred
        for op in domain.operators.values()
        for o in op.outcomes
        for l in tuple(o.add) + tuple(o.delete)
    }
    return set(domain.predicates) - fluent


def ground(domain: Domain, problem: Problem, prune_statics: bool = False) -> GroundModel:
    """Instantiate every operator and method over the problem's objects.

    With ``prune_statics`` set, ground operators whose preconditions contradict
    the initial state on a rigid (never-effected) predicate are dropped.
    """
    universe = problem.universe
    rigid = _rigid_predicates(domain) if prune_statics else set()

    operators: dict[OpKey, GroundOperator] = {}
    for name in sorted(domain.operators):
        op = domain.operators[name]
        for binding in _bindings(op.params, universe):
            args = tuple(binding[p.name] for p in op.params)
            who = f"operator {name}({', '.join(args)})"
            precond = tuple(
                _ground_literal(l, binding, universe, domain, who) for l in op.precond
            )
            if rigid and _statically_impossible(precond, problem.init, rigid):
                continue
            outcomes = tuple(
                Outcome(
                    o.p,
                    frozenset(
                        _ground_literal(l, binding, universe, domain, who)
                        for l in o.add
                    ),
                    frozenset(
                        _ground_literal(l, binding, universe, domain, who)
                        for l in o.delete
                    ),
                    o.cost,
                )
                for o in op.outcomes
            )
            operators[(name, args)] = GroundOperator(name, args, precond, outcomes)

    methods: list[GroundMethod] = []
    for name in sorted(domain.methods):
        m = domain.methods[name]
        for binding in _bindings(m.params, universe):
            args = tuple(binding[p.name] for p in m.params)
            who = f"method {name}({', '.join(args)})"
            task = _ground_task(m.task, binding, universe, domain, who)
            precond = tuple(
                _ground_literal(l, binding, universe, domain, who) for l in m.precond
            )
            subtasks = tuple(
                (sid, _ground_task(st, binding, universe, domain, who))
                for sid, st in m.subtasks
            )
            methods.append(
                GroundMethod(name, args, task, precond, subtasks, m.ordering)
            )

    by_instance: dict[TaskInstance, list[GroundMethod]] = {}
    for gm in methods:
        by_instance.setdefault(gm.task, []).append(gm)

    compound_instances: dict[str, tuple[TaskInstance, ...]] = {}
    for name in sorted(domain.compound_tasks):
        types = domain.compound_tasks[name]
        pools = [universe.objects_of(t) for t in types]
        compound_instances[name] = tuple(
            TaskInstance(name, combo) for combo in itertools.product(*pools)
        )

    effect_det = all(op.effect_deterministic for op in domain.operators.values())
    return GroundModel(
        domain=domain,
        universe=universe,
        operators=operators,
        methods=tuple(methods),
        methods_by_instance={t: tuple(ms) for t, ms in by_instance.items()},
        compound_instances=compound_instances,
        effect_deterministic=effect_det,
    )


def _ground_task(
    task: TaskInstance,
    binding: dict[str, str],
    universe: Universe,
    domain: Domain,
    who: str,
) -> TaskInstance:
    args = []
    for a in task.args:
        g = _subst(a, binding)
        if g not in universe.objects:
            raise ModelError(f"{who}: unknown object {g!r} in task {task.name}")
        args.append(g)
    arity = domain.task_arity(task.name)
    if arity != len(args):
        raise ModelError(f"{who}: task {task.name} expects {arity} args")
    return TaskInstance(task.name, tuple(args))


def _statically_impossible(
    precond: tuple[Literal, ...], init: State, rigid: set[str]
) -> bool:
    for lit in precond:
        if lit.pred in rigid and lit.negated == (lit.atom in init):
            return True
    return False
