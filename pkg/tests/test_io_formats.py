import json

import pytest

from riskhtn import (
    ParseError,
    UtilitySpec,
    build_cvtdg,
    emit_plan_report,
    export_dot,
    ground,
    parse_domain,
    parse_plan,
    parse_problem,
    parse_utility,
    serialize_domain,
)
from riskhtn.cvtdg import annotate_expected_utilities
from riskhtn.domains import bundled
from riskhtn.grounding import GroundOperator
from riskhtn.model import Outcome, TaskNetwork

MINIMAL_DOMAIN = json.dumps(
    {
        "name": "minimal",
        "types": {"thing": None},
        "predicates": [{"name": "ok", "params": []}],
        "operators": [
            {
                "name": "act",
                "params": [],
                "precond": [],
                "outcomes": [{"p": 1.0, "add": [], "del": [], "cost": -1.0}],
            }
        ],
        "compound_tasks": [],
        "methods": [],
    }
)


# ------------------------------------------------------------ parse_domain


def test_parse_minimal_domain():
    domain = parse_domain(MINIMAL_DOMAIN)
    assert len(domain.operators) == 1
    assert len(domain.methods) == 0


def test_parse_marine_domain(marine_domain):
    assert sorted(marine_domain.methods) == ["m1", "m2", "m3", "m4", "m5", "m6", "m7"]
    for name in (
        "swim_to_target",
        "collect_data",
        "go_without_glider",
        "go_with_glider",
        "glider_move_to_target",
        "collect_part_of_data",
        "move_to_surface",
        "transmit_data",
    ):
        assert name in marine_domain.operators
    solo = marine_domain.operators["go_without_glider"].outcomes
    assert [(o.p, o.cost) for o in solo] == [(0.8, -2.0), (0.2, -20.0)]
    glider = marine_domain.operators["go_with_glider"].outcomes
    assert [(o.p, o.cost) for o in glider] == [(1.0, -10.0)]


def test_positive_cost_rejected_with_location():
    doc = json.loads(MINIMAL_DOMAIN)
    doc["operators"][0]["outcomes"][0]["cost"] = 2.0
    with pytest.raises(ParseError) as err:
        parse_domain(json.dumps(doc))
    assert "strictly negative" in str(err.value)
    assert "outcomes[0]" in err.value.path


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d["operators"][0]["precond"].append(
            {"pred": "mystery", "args": []}), "undeclared predicate"),
        (lambda d: d["operators"][0]["params"].append(
            {"name": "?x", "type": "nowhere"}), "unknown type"),
        (lambda d: d["operators"][0]["outcomes"].__setitem__(
            0, {"p": 0.7, "add": [], "del": [], "cost": -1.0}), "sum"),
        (lambda d: d["operators"][0].update(precond=[
            {"pred": "ok", "args": ["extra"]}]), "expects 0 args"),
    ],
)
def test_domain_validation_errors_carry_location(mutate, fragment):
    doc = json.loads(MINIMAL_DOMAIN)
    mutate(doc)
    with pytest.raises(ParseError) as err:
        parse_domain(json.dumps(doc))
    assert fragment in str(err.value)
    assert err.value.path


def test_invalid_json_reports_line():
    with pytest.raises(ParseError) as err:
        parse_domain("{not json")
    assert "line" in err.value.path


def test_zero_probability_outcomes_dropped():
    doc = json.loads(MINIMAL_DOMAIN)
    doc["operators"][0]["outcomes"] = [
        {"p": 0.0, "add": [], "del": [], "cost": -9.0},
        {"p": 1.0, "add": [], "del": [], "cost": -1.0},
    ]
    domain = parse_domain(json.dumps(doc))
    assert len(domain.operators["act"].outcomes) == 1


# ----------------------------------------------------------- parse_problem


def test_parse_problem_empty_network():
    domain = parse_domain(MINIMAL_DOMAIN)
    problem = parse_problem(
        json.dumps({"objects": {}, "init": [], "tasks": {"subtasks": [], "ordering": []}}),
        domain,
    )
    assert not problem.initial_network.nodes


def test_parse_marine_problem(marine_problem):
    tasks = list(marine_problem.initial_network.nodes.values())
    assert [t.name for t in tasks] == ["collect_ocean_data"]
    assert ("data_remaining", ()) in marine_problem.init


def test_problem_task_typo_is_named():
    domain = parse_domain(MINIMAL_DOMAIN)
    with pytest.raises(ParseError) as err:
        parse_problem(
            json.dumps(
                {
                    "objects": {},
                    "init": [],
                    "tasks": {"subtasks": [{"id": "t0", "name": "atc", "args": []}],
                              "ordering": []},
                }
            ),
            domain,
        )
    assert "atc" in str(err.value)


def test_problem_unknown_object_type():
    domain = parse_domain(MINIMAL_DOMAIN)
    with pytest.raises(ParseError) as err:
        parse_problem(
            json.dumps({"objects": {"x": "ghost"}, "init": [],
                        "tasks": {"subtasks": [], "ordering": []}}),
            domain,
        )
    assert "ghost" in str(err.value)


# ----------------------------------------------------------- parse_utility


def test_parse_utility_linear():
    spec = parse_utility('{"kind": "linear"}')
    assert spec == UtilitySpec.linear()


def test_parse_utility_exponential_averse():
    spec = parse_utility('{"kind": "exponential", "a": -1, "alpha": 0.2}')
    assert spec == UtilitySpec.exponential(-1, 0.2)


def test_parse_utility_rejects_zero_alpha():
    with pytest.raises(ParseError):
        parse_utility('{"kind": "exponential", "a": -1, "alpha": 0}')


def test_parse_utility_rejects_unknown_kind():
    with pytest.raises(ParseError):
        parse_utility('{"kind": "cubic"}')


def test_parse_utility_one_switch():
    spec = parse_utility(bundled("oneswitch.util.json").read_text())
    assert spec == UtilitySpec.one_switch(5.0, 0.04, 100.0)


# --------------------------------------------------------------- roundtrip


@pytest.mark.parametrize("source", [MINIMAL_DOMAIN, None])
def test_domain_roundtrip(source, marine_domain):
    domain = parse_domain(source) if source else marine_domain
    again = parse_domain(serialize_domain(domain))
    assert again == domain


# -------------------------------------------------------------- export_dot


def _dot_is_well_formed(text):
    assert text.count("{") == text.count("}")
    for line in text.splitlines()[1:-1]:
        body = line.strip()
        if not body or body.startswith("//"):
            continue
        assert body.startswith('"'), body
        assert body.endswith(";"), body


def empty_graph(marine_gm):
    return build_cvtdg(marine_gm, TaskNetwork({}, frozenset()))


def test_export_dot_empty_graph(marine_gm):
    assert export_dot(empty_graph(marine_gm)) == "digraph cvtdg { }\n"


def test_export_dot_single_operator():
    domain = parse_domain(MINIMAL_DOMAIN)
    problem = parse_problem(
        json.dumps({"objects": {}, "init": [],
                    "tasks": {"subtasks": [{"id": "t0", "name": "act", "args": []}],
                              "ordering": []}}),
        domain,
    )
    graph = build_cvtdg(ground(domain, problem), problem.initial_network)
    text = export_dot(graph)
    _dot_is_well_formed(text)
    assert '"tp:act()"' in text
    assert "(1, -1)" in text  # probability/cost pair on the vertex label


def test_export_dot_marine_counts(marine_gm, marine_problem):
    graph = build_cvtdg(marine_gm, marine_problem.initial_network)
    annotate_expected_utilities(graph, UtilitySpec.linear())
    text = export_dot(graph)
    _dot_is_well_formed(text)
    vertices = [l for l in text.splitlines() if "label=" in l]
    expected = (
        len(graph.compound_vertices)
        + len(graph.primitive_vertices)
        + len(graph.method_vertices)
    )
    assert len(vertices) == expected


# --------------------------------------------------------- emit_plan_report


def one_op(name, *pairs, args=()):
    outs = tuple(Outcome(p, frozenset(), frozenset(), c) for p, c in pairs)
    return GroundOperator(name, tuple(args), (), outs)


def test_report_empty_plan_has_zero_eu():
    report = json.loads(
        emit_plan_report([], UtilitySpec.linear(), {}, engine="state",
                         status="solution")
    )
    assert report["expected_utility"] == 0
    assert report["plan"] == []


def test_report_single_fixed_cost_step():
    op = one_op("pay", (1.0, -5.0))
    report = json.loads(
        emit_plan_report([op], UtilitySpec.linear(), {}, engine="state",
                         status="solution")
    )
    assert report["expected_utility"] == -5.0


def test_report_marine_solo_return_expected_cost(marine_gm):
    solo = marine_gm.operators[("go_without_glider", ("d1",))]
    report = json.loads(
        emit_plan_report([solo], UtilitySpec.linear(), {"nodes_expanded": 1},
                         engine="state", status="solution")
    )
    assert report["expected_utility"] == -5.6
    assert report["operator_eu"][0]["eu"] == -5.6


def test_report_eu_equals_segmented(marine_gm):
    from riskhtn import plan_eu_segmented

    spec = UtilitySpec.exponential(-1, 0.2)
    plan = [
        marine_gm.operators[("swim_to_target", ("d1",))],
        marine_gm.operators[("go_without_glider", ("d1",))],
    ]
    report = json.loads(
        emit_plan_report(plan, spec, {}, engine="state", status="solution")
    )
    assert report["expected_utility_exact"] == plan_eu_segmented(spec, plan)


def test_parse_plan_resolves_report(marine_gm):
    solo = marine_gm.operators[("go_without_glider", ("d1",))]
    text = emit_plan_report([solo], UtilitySpec.linear(), {}, engine="state",
                            status="solution")
    assert parse_plan(text, marine_gm) == (solo,)
    with pytest.raises(ParseError):
        parse_plan('{"plan": [{"name": "warp", "args": []}]}', marine_gm)
