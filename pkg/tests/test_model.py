import itertools
import json

import pytest

from riskhtn import (
    Domain,
    Literal,
    Method,
    ModelError,
    Operator,
    Outcome,
    Param,
    Problem,
    Resource,
    TaskInstance,
    TaskNetwork,
    Universe,
    applicable,
    decompose,
    find_unconstrained_tasks,
    ground,
    progress,
)
from riskhtn.domains import bundled
from riskhtn.grounding import GroundOperator


def lit(pred, *args, neg=False):
    return Literal(pred, tuple(args), neg)


def atom(pred, *args):
    return (pred, tuple(args))


def sure_outcome(cost=-1.0, add=(), delete=()):
    return Outcome(1.0, frozenset(add), frozenset(delete), cost)


def gop(name, args=(), precond=(), outcomes=None):
    return GroundOperator(
        name, tuple(args), tuple(precond), outcomes or (sure_outcome(),)
    )


# ---------------------------------------------------------------- grounding


def tiny_domain(n_divers):
    domain = Domain(
        name="tiny",
        types={"diver": None},
        predicates={"ready": ("diver",)},
        operators={
            "dive": Operator(
                "dive",
                (Param("?d", "diver"),),
                (lit("ready", "?d"),),
                (sure_outcome(-2.0),),
            )
        },
        compound_tasks={},
        methods={},
    )
    objects = {f"d{i}": "diver" for i in range(n_divers)}
    problem = Problem(
        domain,
        Universe(domain.types, objects),
        frozenset(),
        TaskNetwork({}, frozenset()),
    )
    return domain, problem


def test_ground_single_instantiation():
    domain, problem = tiny_domain(1)
    gm = ground(domain, problem)
    assert len(gm.operators) == 1
    assert ("dive", ("d0",)) in gm.operators


def test_ground_empty_type_yields_no_instances():
    domain, problem = tiny_domain(0)
    gm = ground(domain, problem)
    assert len(gm.operators) == 0


def test_ground_marine_count_matches_typed_enumeration(marine_gm):
    # Independent enumeration straight from the raw JSON documents.
    dom = json.loads(bundled("marine.htn.json").read_text())
    prob = json.loads(bundled("marine.prob.json").read_text())
    parents = dom["types"]

    def compatible(obj_type, want):
        while obj_type is not None:
            if obj_type == want:
                return True
            obj_type = parents[obj_type]
        return False

    def pool(want):
        return [o for o, t in prob["objects"].items() if compatible(t, want)]

    expected_ops = sum(
        len(list(itertools.product(*(pool(p["type"]) for p in op["params"]))))
        for op in dom["operators"]
    )
    expected_methods = sum(
        len(list(itertools.product(*(pool(p["type"]) for p in m["params"]))))
        for m in dom["methods"]
    )
    assert len(marine_gm.operators) == expected_ops
    assert len(marine_gm.methods) == expected_methods


def test_ground_type_mismatch_rejected():
    domain, _ = tiny_domain(1)
    bad = Problem(
        domain,
        Universe({"diver": None, "rock": None}, {"r1": "rock"}),
        frozenset(),
        TaskNetwork({}, frozenset()),
    )
    gm = ground(domain, bad)  # r1 is not a diver, so no instances
    assert len(gm.operators) == 0


def test_ground_constant_argument_in_precondition():
    # object names may appear directly in lifted preconditions
    domain = Domain(
        name="const",
        types={"diver": None},
        predicates={"briefed": ("diver",)},
        operators={
            "dive": Operator(
                "dive",
                (Param("?d", "diver"),),
                (lit("briefed", "chief"),),
                (sure_outcome(-1.0),),
            )
        },
        compound_tasks={},
        methods={},
    )
    problem = Problem(
        domain,
        Universe(domain.types, {"chief": "diver", "d1": "diver"}),
        frozenset([atom("briefed", "chief")]),
        TaskNetwork({}, frozenset()),
    )
    gm = ground(domain, problem)
    assert len(gm.operators) == 2
    assert all(
        lit("briefed", "chief") in op.precond for op in gm.operators.values()
    )
    # unknown constants are rejected at grounding time
    bad = Problem(
        domain,
        Universe(domain.types, {"d1": "diver"}),
        frozenset(),
        TaskNetwork({}, frozenset()),
    )
    with pytest.raises(ModelError):
        ground(domain, bad)


def test_ground_static_relevance_filter(marine_domain, marine_problem):
    import dataclasses

    no_power = dataclasses.replace(
        marine_problem,
        init=frozenset(a for a in marine_problem.init if a[0] != "has_power"),
    )
    full = ground(marine_domain, no_power, prune_statics=False)
    pruned = ground(marine_domain, no_power, prune_statics=True)
    # has_power is rigid; the glider mover requires it and must disappear
    assert ("glider_move_to_target", ("g1",)) in full.operators
    assert ("glider_move_to_target", ("g1",)) not in pruned.operators
    assert len(pruned.operators) < len(full.operators)


# ------------------------------------------------------------- applicable


def test_applicable_positive_literal():
    op = gop("go", ("d1",), precond=[lit("at", "d1", "target")])
    assert applicable(op, frozenset([atom("at", "d1", "target")]))


def test_applicable_negative_literal_blocks():
    op = gop("go", ("d1",), precond=[lit("at", "d1", "shore", neg=True)])
    assert not applicable(op, frozenset([atom("at", "d1", "shore")]))


def test_applicable_empty_precondition_is_vacuous():
    op = gop("go")
    assert applicable(op, frozenset())
    assert applicable(op, frozenset([atom("anything", "x")]))


def test_applicable_rejects_non_ground():
    op = gop("go", ("?d",), precond=[lit("at", "?d")])
    with pytest.raises(ModelError):
        applicable(op, frozenset())


def test_applicable_monotone_under_state_growth():
    # negation-free preconditions stay satisfied when the state grows
    import random

    rng = random.Random(3)
    facts = [atom(f"p{i}") for i in range(6)]
    for _ in range(200):
        pre = [Literal(p, a) for p, a in rng.sample(facts, rng.randint(0, 3))]
        op = gop("x", precond=pre)
        small = frozenset(rng.sample(facts, rng.randint(0, 6)))
        big = small | frozenset(rng.sample(facts, rng.randint(0, 6)))
        if applicable(op, small):
            assert applicable(op, big)


# --------------------------------------------------------------- progress


def test_progress_moves_atom():
    op = gop(
        "go",
        ("d1",),
        precond=[lit("at", "d1", "target")],
        outcomes=(
            sure_outcome(-1.0, add=[lit("at", "d1", "shore")],
                         delete=[lit("at", "d1", "target")]),
        ),
    )
    state = frozenset([atom("at", "d1", "target")])
    assert progress(state, op, 0) == frozenset([atom("at", "d1", "shore")])


def test_progress_identity_for_effect_free_operator():
    noop = gop("noop")
    state = frozenset([atom("p"), atom("q")])
    once = progress(state, noop, 0)
    assert once == state
    assert progress(once, noop, 0) == once


def test_progress_deleting_absent_atom_is_set_semantics():
    op = gop("x", outcomes=(sure_outcome(-1.0, add=[lit("a")], delete=[lit("b")]),))
    assert progress(frozenset(), op, 0) == frozenset([atom("a")])


def test_progress_errors():
    op = gop("x", precond=[lit("p")])
    with pytest.raises(ModelError):
        progress(frozenset(), op, 0)  # inapplicable
    with pytest.raises(ModelError):
        progress(frozenset([atom("p")]), op, 5)  # invalid index


# --------------------------------------------- find_unconstrained_tasks


def net(nodes, order=()):
    return TaskNetwork(
        {tid: TaskInstance(name, ()) for tid, name in nodes.items()},
        frozenset(order),
    )


def test_unconstrained_chain():
    n = net({"t1": "a", "t2": "b", "t3": "c"}, [("t1", "t2"), ("t2", "t3")])
    assert find_unconstrained_tasks(n) == {"t1"}


def test_unconstrained_empty_order():
    n = net({"t1": "a", "t2": "b"})
    assert find_unconstrained_tasks(n) == {"t1", "t2"}


def test_unconstrained_diamond_matches_bruteforce():
    order = [("t1", "t2"), ("t1", "t3"), ("t2", "t4"), ("t3", "t4")]
    n = net({f"t{i}": "a" for i in range(1, 5)}, order)
    # brute-force minimal-element scan over the transitive closure
    closure = set(order)
    changed = True
    while changed:
        changed = False
        for a, b in list(closure):
            for c, d in list(closure):
                if b == c and (a, d) not in closure:
                    closure.add((a, d))
                    changed = True
    minimal = {t for t in n.nodes if not any(b == t for _, b in closure)}
    assert find_unconstrained_tasks(n) == minimal == {"t1"}


# -------------------------------------------------------------- decompose


def ground_method(name, task, subtasks, ordering=()):
    return Method(
        name,
        TaskInstance(task, ()),
        (),
        (),
        tuple((sid, TaskInstance(tn, ())) for sid, tn in subtasks),
        frozenset(ordering),
    )


def test_decompose_single_node_by_ordered_method():
    n = net({"t0": "c"})
    m = ground_method("m", "c", [("1", "a"), ("2", "b")], [("1", "2")])
    out = decompose(n, "t0", m)
    assert set(out.nodes) == {"t0.1", "t0.2"}
    assert out.order == frozenset([("t0.1", "t0.2")])


def test_decompose_middle_of_chain():
    n = net({"t1": "a", "t2": "c", "t3": "b"}, [("t1", "t2"), ("t2", "t3")])
    m = ground_method("m", "c", [("1", "x")])
    out = decompose(n, "t2", m)
    assert set(out.nodes) == {"t1", "t2.1", "t3"}
    assert out.order == frozenset([("t1", "t2.1"), ("t2.1", "t3")])


def test_decompose_unordered_method_inherits_nothing_extra():
    n = net({"t0": "c", "s1": "a", "s2": "b"})
    m = ground_method("m", "c", [("1", "x"), ("2", "y")])
    out = decompose(n, "t0", m)
    assert set(out.nodes) == {"t0.1", "t0.2", "s1", "s2"}
    # brute-force closure check: no order relation may exist at all
    assert out.order == frozenset()


def test_decompose_never_introduces_cycles():
    import random

    rng = random.Random(11)
    for _ in range(100):
        ids = [f"t{i}" for i in range(4)]
        order = set()
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                if rng.random() < 0.4:
                    order.add((a, b))
        n = net({tid: "c" for tid in ids}, order)
        m = ground_method(
            "m", "c",
            [("1", "x"), ("2", "y")],
            [("1", "2")] if rng.random() < 0.5 else [],
        )
        target = rng.choice(ids)
        out = decompose(n, target, m)  # TaskNetwork would raise on a cycle
        assert target not in out.nodes


def test_decompose_errors():
    n = net({"t0": "c"})
    m = ground_method("m", "other", [("1", "x")])
    with pytest.raises(ModelError):
        decompose(n, "missing", m)
    with pytest.raises(ModelError):
        decompose(n, "t0", m)


# ------------------------------------------------------------- invariants


def test_parsed_operators_satisfy_distribution_invariants(marine_domain):
    for op in marine_domain.operators.values():
        assert abs(sum(o.p for o in op.outcomes) - 1.0) <= 1e-9
        assert all(o.cost < 0 for o in op.outcomes)


def test_operator_probability_normalization():
    outs = (
        Outcome(0.5 + 2e-10, frozenset(), frozenset(), -1.0),
        Outcome(0.5, frozenset(), frozenset(), -2.0),
    )
    op = Operator("x", (), (), outs)
    assert sum(o.p for o in op.outcomes) == 1.0


def test_operator_probability_sum_violation_rejected():
    outs = (Outcome(0.5, frozenset(), frozenset(), -1.0),)
    with pytest.raises(ModelError):
        Operator("x", (), (), outs)


def test_outcome_invariants():
    with pytest.raises(ModelError):
        Outcome(0.0, frozenset(), frozenset(), -1.0)
    with pytest.raises(ModelError):
        Outcome(0.5, frozenset(), frozenset(), 2.0)
    with pytest.raises(ModelError):
        Outcome(1.0, frozenset([lit("a")]), frozenset([lit("a")]), -1.0)


def test_resource_invariants():
    Resource(10.0, 4.0)
    with pytest.raises(ModelError):
        Resource(10.0, 11.0)
    with pytest.raises(ModelError):
        Resource(0.0, 0.0)


def test_type_hierarchy_cycle_rejected():
    with pytest.raises(ModelError):
        Universe({"a": "b", "b": "a"}, {})


def test_network_cycle_rejected():
    with pytest.raises(ModelError):
        net({"t1": "a", "t2": "b"}, [("t1", "t2"), ("t2", "t1")])
