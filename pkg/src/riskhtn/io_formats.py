"""File formats: domain/problem/utility parsing, DOT export, plan reports.

All documents are UTF-8 JSON.  Parse failures raise :class:`ParseError` with
a path breadcrumb into the document, never a bare exception.
"""

from __future__ import annotations

import json
from typing import Any

from .errors import ModelError, ParseError
from .model import (
    Domain,
    Literal,
    Method,
    Operator,
    Outcome,
    Param,
    Problem,
    TaskInstance,
    TaskNetwork,
    Universe,
    is_variable,
)
from .utility import UtilitySpec, plan_eu_segmented, operator_eu

_MISSING = object()


def _expect(value, types, path: str, what: str):
    if not isinstance(value, types):
        raise ParseError(path, f"expected {what}, got {type(value).__name__}")
    return value


def _get(mapping: dict, key: str, path: str, types, what: str, default=_MISSING):
    if key not in mapping:
        if default is not _MISSING:
            return default
        raise ParseError(path, f"missing required key {key!r}")
    return _expect(mapping[key], types, f"{path}.{key}", what)


def _check_keys(mapping: dict, allowed: set[str], path: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ParseError(path, f"unknown keys {sorted(unknown)}")


def _load_json(text: str, what: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{what} line {exc.lineno} column {exc.colno}", f"invalid JSON: {exc.msg}"
        ) from exc


def _parse_params(raw, path: str, types: dict) -> tuple[Param, ...]:
    _expect(raw, list, path, "a list")
    params = []
    seen = set()
    for i, entry in enumerate(raw):
        p = f"{path}[{i}]"
        _expect(entry, dict, p, "an object")
        _check_keys(entry, {"name", "type"}, p)
        name = _get(entry, "name", p, str, "a string")
        typ = _get(entry, "type", p, str, "a string")
        if not is_variable(name):
            raise ParseError(f"{p}.name", f"parameter {name!r} must start with '?'")
        if name in seen:
            raise ParseError(f"{p}.name", f"duplicate parameter {name!r}")
        seen.add(name)
        if typ not in types:
            raise ParseError(f"{p}.type", f"unknown type {typ!r}")
        params.append(Param(name, typ))
    return tuple(params)


def _parse_atom(raw, path: str, predicates: dict, allow_neg: bool) -> Literal:
    _expect(raw, dict, path, "an object")
    allowed = {"pred", "args"} | ({"neg"} if allow_neg else set())
    _check_keys(raw, allowed, path)
    pred = _get(raw, "pred", path, str, "a string")
    args = _get(raw, "args", path, list, "a list", default=[])
    neg = _get(raw, "neg", path, bool, "a boolean", default=False) if allow_neg else False
    if pred not in predicates:
        raise ParseError(f"{path}.pred", f"undeclared predicate {pred!r}")
    if len(args) != len(predicates[pred]):
        raise ParseError(
            f"{path}.args",
            f"predicate {pred} expects {len(predicates[pred])} args, got {len(args)}",
        )
    for j, a in enumerate(args):
        _expect(a, str, f"{path}.args[{j}]", "a string")
    return Literal(pred, tuple(args), neg)


def _parse_task_ref(raw, path: str, arity_of) -> TaskInstance:
    _expect(raw, dict, path, "an object")
    _check_keys(raw, {"id", "name", "args"}, path)
    name = _get(raw, "name", path, str, "a string")
    args = _get(raw, "args", path, list, "a list", default=[])
    for j, a in enumerate(args):
        _expect(a, str, f"{path}.args[{j}]", "a string")
    try:
        arity = arity_of(name)
    except ModelError:
        raise ParseError(f"{path}.name", f"unknown task {name!r}") from None
    if arity != len(args):
        raise ParseError(f"{path}.args", f"task {name} expects {arity} args")
    return TaskInstance(name, tuple(args))


def _parse_ordering(raw, path: str, ids: set[str]) -> frozenset[tuple[str, str]]:
    _expect(raw, list, path, "a list")
    pairs = set()
    for i, pair in enumerate(raw):
        p = f"{path}[{i}]"
        _expect(pair, list, p, "a [before, after] pair")
        if len(pair) != 2:
            raise ParseError(p, "ordering entries must be [before, after] pairs")
        a, b = pair
        _expect(a, str, f"{p}[0]", "a string")
        _expect(b, str, f"{p}[1]", "a string")
        for tid in (a, b):
            if tid not in ids:
                raise ParseError(p, f"ordering references unknown subtask id {tid!r}")
        pairs.add((a, b))
    return frozenset(pairs)


def _parse_subtasks(raw, path: str, arity_of) -> tuple[tuple[str, TaskInstance], ...]:
    _expect(raw, list, path, "a list")
    subtasks = []
    seen = set()
    for i, entry in enumerate(raw):
        p = f"{path}[{i}]"
        task = _parse_task_ref(entry, p, arity_of)
        sid = _get(entry, "id", p, str, "a string")
        if sid in seen:
            raise ParseError(f"{p}.id", f"duplicate subtask id {sid!r}")
        if "." in sid:
            raise ParseError(f"{p}.id", "subtask ids must not contain '.'")
        seen.add(sid)
        subtasks.append((sid, task))
    return tuple(subtasks)


def parse_domain(text: str) -> Domain:
    """Parse and validate a lifted domain document."""
    doc = _load_json(text, "domain")
    _expect(doc, dict, "domain", "an object")
    _check_keys(
        doc,
        {"name", "types", "predicates", "operators", "compound_tasks", "methods"},
        "domain",
    )
    name = _get(doc, "name", "domain", str, "a string")

    raw_types = _get(doc, "types", "domain", dict, "an object", default={})
    types: dict[str, str | None] = {}
    for child, parent in raw_types.items():
        if parent is not None:
            _expect(parent, str, f"types.{child}", "a type name or null")
        types[child] = parent
    for child, parent in types.items():
        if parent is not None and parent not in types:
            raise ParseError(f"types.{child}", f"unknown parent type {parent!r}")

    predicates: dict[str, tuple[str, ...]] = {}
    for i, entry in enumerate(_get(doc, "predicates", "domain", list, "a list", default=[])):
        p = f"predicates[{i}]"
        _expect(entry, dict, p, "an object")
        _check_keys(entry, {"name", "params"}, p)
        pname = _get(entry, "name", p, str, "a string")
        if pname in predicates:
            raise ParseError(f"{p}.name", f"duplicate predicate {pname!r}")
        ptypes = _get(entry, "params", p, list, "a list", default=[])
        for j, t in enumerate(ptypes):
            _expect(t, str, f"{p}.params[{j}]", "a type name")
            if t not in types:
                raise ParseError(f"{p}.params[{j}]", f"unknown type {t!r}")
        predicates[pname] = tuple(ptypes)

    operators: dict[str, Operator] = {}
    for i, entry in enumerate(_get(doc, "operators", "domain", list, "a list", default=[])):
        p = f"operators[{i}]"
        _expect(entry, dict, p, "an object")
        _check_keys(entry, {"name", "params", "precond", "outcomes"}, p)
        oname = _get(entry, "name", p, str, "a string")
        if oname in operators:
            raise ParseError(f"{p}.name", f"duplicate operator {oname!r}")
        params = _parse_params(_get(entry, "params", p, list, "a list", default=[]),
                               f"{p}.params", types)
        precond = tuple(
            _parse_atom(a, f"{p}.precond[{j}]", predicates, allow_neg=True)
            for j, a in enumerate(_get(entry, "precond", p, list, "a list", default=[]))
        )
        outcomes = []
        raw_outs = _get(entry, "outcomes", p, list, "a list")
        for j, out in enumerate(raw_outs):
            q = f"{p}.outcomes[{j}]"
            _expect(out, dict, q, "an object")
            _check_keys(out, {"p", "add", "del", "cost"}, q)
            prob = _get(out, "p", q, (int, float), "a number")
            cost = _get(out, "cost", q, (int, float), "a number")
            if prob == 0:
                continue  # impossible branches carry no information
            if prob < 0 or prob > 1:
                raise ParseError(f"{q}.p", f"probability must be in (0, 1], got {prob}")
            if cost >= 0:
                raise ParseError(f"{q}.cost", f"cost must be strictly negative, got {cost}")
            add = frozenset(
                _parse_atom(a, f"{q}.add[{k}]", predicates, allow_neg=False)
                for k, a in enumerate(_get(out, "add", q, list, "a list", default=[]))
            )
            dele = frozenset(
                _parse_atom(a, f"{q}.del[{k}]", predicates, allow_neg=False)
                for k, a in enumerate(_get(out, "del", q, list, "a list", default=[]))
            )
            outcomes.append(Outcome(float(prob), add, dele, float(cost)))
        try:
            operators[oname] = Operator(oname, params, precond, tuple(outcomes))
        except ModelError as exc:
            raise ParseError(p, str(exc)) from exc

    compound: dict[str, tuple[str, ...]] = {}
    for i, entry in enumerate(
        _get(doc, "compound_tasks", "domain", list, "a list", default=[])
    ):
        p = f"compound_tasks[{i}]"
        _expect(entry, dict, p, "an object")
        _check_keys(entry, {"name", "params"}, p)
        cname = _get(entry, "name", p, str, "a string")
        if cname in compound or cname in operators:
            raise ParseError(f"{p}.name", f"task name {cname!r} already declared")
        ptypes = _get(entry, "params", p, list, "a list", default=[])
        for j, t in enumerate(ptypes):
            _expect(t, str, f"{p}.params[{j}]", "a type name")
            if t not in types:
                raise ParseError(f"{p}.params[{j}]", f"unknown type {t!r}")
        compound[cname] = tuple(ptypes)

    def arity_of(task_name: str) -> int:
        if task_name in operators:
            return len(operators[task_name].params)
        if task_name in compound:
            return len(compound[task_name])
        raise ModelError(f"unknown task name {task_name!r}")

    methods: dict[str, Method] = {}
    for i, entry in enumerate(_get(doc, "methods", "domain", list, "a list", default=[])):
        p = f"methods[{i}]"
        _expect(entry, dict, p, "an object")
        _check_keys(entry, {"name", "task", "params", "precond", "subtasks", "ordering"}, p)
        mname = _get(entry, "name", p, str, "a string")
        if mname in methods:
            raise ParseError(f"{p}.name", f"duplicate method {mname!r}")
        raw_task = _get(entry, "task", p, dict, "an object")
        _check_keys(raw_task, {"name", "args"}, f"{p}.task")
        tname = _get(raw_task, "name", f"{p}.task", str, "a string")
        if tname not in compound:
            raise ParseError(f"{p}.task.name", f"unknown compound task {tname!r}")
        targs = _get(raw_task, "args", f"{p}.task", list, "a list", default=[])
        if len(targs) != len(compound[tname]):
            raise ParseError(
                f"{p}.task.args", f"task {tname} expects {len(compound[tname])} args"
            )
        params = _parse_params(_get(entry, "params", p, list, "a list", default=[]),
                               f"{p}.params", types)
        precond = tuple(
            _parse_atom(a, f"{p}.precond[{j}]", predicates, allow_neg=True)
            for j, a in enumerate(_get(entry, "precond", p, list, "a list", default=[]))
        )
        subtasks = _parse_subtasks(
            _get(entry, "subtasks", p, list, "a list", default=[]),
            f"{p}.subtasks",
            arity_of,
        )
        ordering = _parse_ordering(
            _get(entry, "ordering", p, list, "a list", default=[]),
            f"{p}.ordering",
            {sid for sid, _ in subtasks},
        )
        try:
            methods[mname] = Method(
                mname, TaskInstance(tname, tuple(targs)), params, precond, subtasks, ordering
            )
        except ModelError as exc:
            raise ParseError(p, str(exc)) from exc

    try:
        return Domain(name, types, predicates, operators, compound, methods)
    except ModelError as exc:
        raise ParseError("domain", str(exc)) from exc


def parse_problem(text: str, domain: Domain) -> Problem:
    """Parse a problem document against an already-parsed domain."""
    doc = _load_json(text, "problem")
    _expect(doc, dict, "problem", "an object")
    _check_keys(doc, {"objects", "init", "tasks"}, "problem")

    raw_objects = _get(doc, "objects", "problem", dict, "an object", default={})
    objects: dict[str, str] = {}
    for oname, typ in raw_objects.items():
        _expect(typ, str, f"objects.{oname}", "a type name")
        if typ not in domain.types:
            raise ParseError(f"objects.{oname}", f"unknown object type {typ!r}")
        if is_variable(oname):
            raise ParseError(f"objects.{oname}", "object names must not start with '?'")
        objects[oname] = typ
    universe = Universe(domain.types, objects)

    init = set()
    for i, entry in enumerate(_get(doc, "init", "problem", list, "a list", default=[])):
        p = f"init[{i}]"
        lit = _parse_atom(entry, p, domain.predicates, allow_neg=False)
        for j, (a, t) in enumerate(zip(lit.args, domain.predicates[lit.pred])):
            if a not in objects:
                raise ParseError(f"{p}.args[{j}]", f"unknown object {a!r}")
            if not universe.is_subtype(objects[a], t):
                raise ParseError(
                    f"{p}.args[{j}]",
                    f"object {a} of type {objects[a]} does not fit {t}",
                )
        init.add(lit.atom)

    raw_tasks = _get(doc, "tasks", "problem", dict, "an object", default={})
    _check_keys(raw_tasks, {"subtasks", "ordering"}, "tasks")
    subtasks = _parse_subtasks(
        _get(raw_tasks, "subtasks", "tasks", list, "a list", default=[]),
        "tasks.subtasks",
        domain.task_arity,
    )
    ordering = _parse_ordering(
        _get(raw_tasks, "ordering", "tasks", list, "a list", default=[]),
        "tasks.ordering",
        {sid for sid, _ in subtasks},
    )
    for i, (sid, task) in enumerate(subtasks):
        for j, a in enumerate(task.args):
            if not is_variable(a) and a not in objects:
                raise ParseError(f"tasks.subtasks[{i}].args[{j}]", f"unknown object {a!r}")
    network = TaskNetwork(dict(subtasks), ordering)
    try:
        return Problem(domain, universe, frozenset(init), network)
    except ModelError as exc:
        raise ParseError("problem", str(exc)) from exc


def parse_utility(text: str) -> UtilitySpec:
    """Parse a utility document into a validated spec."""
    doc = _load_json(text, "utility")
    _expect(doc, dict, "utility", "an object")
    _check_keys(doc, {"kind", "a", "alpha", "D", "initial_resource"}, "utility")
    kind = _get(doc, "kind", "utility", str, "a string")
    if kind == "linear":
        _check_keys(doc, {"kind"}, "utility")
        return UtilitySpec.linear()
    if kind == "exponential":
        _check_keys(doc, {"kind", "a", "alpha"}, "utility")
        a = _get(doc, "a", "utility", (int, float), "a number")
        alpha = _get(doc, "alpha", "utility", (int, float), "a number")
        if a not in (-1, 1):
            raise ParseError("utility.a", f"a must be -1 or +1, got {a}")
        if alpha <= 0:
            raise ParseError("utility.alpha", f"alpha must be > 0, got {alpha}")
        return UtilitySpec.exponential(int(a), float(alpha))
    if kind == "one_switch":
        _check_keys(doc, {"kind", "D", "alpha", "initial_resource"}, "utility")
        d = _get(doc, "D", "utility", (int, float), "a number")
        alpha = _get(doc, "alpha", "utility", (int, float), "a number")
        res = _get(doc, "initial_resource", "utility", (int, float), "a number")
        if d <= 0:
            raise ParseError("utility.D", f"D must be > 0, got {d}")
        if alpha <= 0:
            raise ParseError("utility.alpha", f"alpha must be > 0, got {alpha}")
        if res <= 0:
            raise ParseError(
                "utility.initial_resource", f"initial_resource must be > 0, got {res}"
            )
        return UtilitySpec.one_switch(float(d), float(alpha), float(res))
    raise ParseError("utility.kind", f"unknown utility kind {kind!r}")


def serialize_utility(spec: UtilitySpec) -> str:
    doc: dict[str, Any] = {"kind": spec.kind}
    if spec.kind == "exponential":
        doc["a"] = spec.a
        doc["alpha"] = spec.alpha
    elif spec.kind == "one_switch":
        doc["D"] = spec.d
        doc["alpha"] = spec.alpha
        doc["initial_resource"] = spec.initial_resource
    return json.dumps(doc, indent=2) + "\n"


def _atom_doc(lit: Literal, with_neg: bool) -> dict:
    doc: dict[str, Any] = {"pred": lit.pred, "args": list(lit.args)}
    if with_neg and lit.negated:
        doc["neg"] = True
    return doc


def serialize_domain(domain: Domain) -> str:
    """Serialize a domain so that parsing the result reproduces it."""
    doc = {
        "name": domain.name,
        "types": dict(domain.types),
        "predicates": [
            {"name": n, "params": list(ts)} for n, ts in domain.predicates.items()
        ],
        "operators": [
            {
                "name": op.name,
                "params": [{"name": p.name, "type": p.type} for p in op.params],
                "precond": [_atom_doc(l, True) for l in op.precond],
                "outcomes": [
                    {
                        "p": o.p,
                        "add": [_atom_doc(l, False) for l in sorted(o.add, key=str)],
                        "del": [_atom_doc(l, False) for l in sorted(o.delete, key=str)],
                        "cost": o.cost,
                    }
                    for o in op.outcomes
                ],
            }
            for op in domain.operators.values()
        ],
        "compound_tasks": [
            {"name": n, "params": list(ts)} for n, ts in domain.compound_tasks.items()
        ],
        "methods": [
            {
                "name": m.name,
                "task": {"name": m.task.name, "args": list(m.task.args)},
                "params": [{"name": p.name, "type": p.type} for p in m.params],
                "precond": [_atom_doc(l, True) for l in m.precond],
                "subtasks": [
                    {"id": sid, "name": t.name, "args": list(t.args)}
                    for sid, t in m.subtasks
                ],
                "ordering": [list(pair) for pair in sorted(m.ordering)],
            }
            for m in domain.methods.values()
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def _quote(s: str) -> str:
    return '"' + s.replace('"', '\\"') + '"'


def export_dot(cvtdg) -> str:
    """Render a CV-TDG as a DOT digraph.

    Compound tasks are ellipses, primitive tasks boxes (labelled with their
    (p, cost) pairs), methods filled diamonds.  Vertex and edge order is
    deterministic.
    """
    lines = []
    annotations = cvtdg.task_annotations

    def eu_suffix(ann) -> str:
        if ann is None:
            return ""
        if not ann.converged:
            return "\\nEU=unbounded-optimistic"
        return f"\\nEU={ann.eu:.9g}"

    for task in sorted(cvtdg.compound_vertices, key=str):
        label = str(task) + eu_suffix(annotations.get(task))
        lines.append(f"  {_quote('tc:' + str(task))} [shape=ellipse, label={_quote(label)}];")
    for task in sorted(cvtdg.primitive_vertices, key=str):
        op = cvtdg.primitive_vertices[task]
        dist = "".join(f"\\n({o.p:.9g}, {o.cost:.9g})" for o in op.outcomes)
        label = str(task) + dist + eu_suffix(annotations.get(task))
        lines.append(f"  {_quote('tp:' + str(task))} [shape=box, label={_quote(label)}];")
    for key in sorted(cvtdg.method_vertices):
        gm = cvtdg.method_vertices[key]
        ann = cvtdg.method_annotations.get(key)
        label = str(gm) + eu_suffix(ann)
        lines.append(
            f"  {_quote('m:' + str(gm))} "
            f"[shape=diamond, style=filled, fillcolor=lightgray, label={_quote(label)}];"
        )
    for task in sorted(cvtdg.task_to_methods, key=str):
        for mkey in cvtdg.task_to_methods[task]:
            gm = cvtdg.method_vertices[mkey]
            lines.append(f"  {_quote('tc:' + str(task))} -> {_quote('m:' + str(gm))};")
    for mkey in sorted(cvtdg.method_to_tasks):
        gm = cvtdg.method_vertices[mkey]
        for sub in cvtdg.method_to_tasks[mkey]:
            prefix = "tc:" if sub in cvtdg.compound_set else "tp:"
            lines.append(f"  {_quote('m:' + str(gm))} -> {_quote(prefix + str(sub))};")
    if not lines:
        return "digraph cvtdg { }\n"
    return "digraph cvtdg {\n" + "\n".join(lines) + "\n}\n"


def dump_annotations(cvtdg) -> str:
    """Debug dump of expected-utility annotations: vertex, kind, EU."""
    rows = []
    for task in sorted(cvtdg.compound_vertices, key=str):
        rows.append(("compound", str(task), cvtdg.task_annotations.get(task)))
    for task in sorted(cvtdg.primitive_vertices, key=str):
        rows.append(("primitive", str(task), cvtdg.task_annotations.get(task)))
    for key in sorted(cvtdg.method_vertices):
        rows.append(("method", str(cvtdg.method_vertices[key]),
                     cvtdg.method_annotations.get(key)))
    lines = []
    for kind, name, ann in rows:
        if ann is None:
            eu = "unannotated"
        elif not ann.converged:
            eu = "unbounded-optimistic"
        else:
            eu = f"{ann.eu:.9g}"
        lines.append(f"{kind}\t{name}\tEU={eu}")
    return "\n".join(lines) + "\n"


def _sig9(x: float) -> float:
    return float(f"{x:.9g}")


def emit_plan_report(plan, utility_spec: UtilitySpec, stats: dict, *,
                     engine: str, status: str) -> str:
    """Serialize a plan plus its evaluation and search statistics.

    Field order is fixed and expected-utility fields carry 9 significant
    digits, so identical inputs produce identical bytes.  Wall-clock timings
    belong on the diagnostic stream, not in the report.
    """
    steps = list(plan) if plan is not None else []
    eu = plan_eu_segmented(utility_spec, steps)
    doc = {
        "status": status,
        "engine": engine,
        "utility": json.loads(serialize_utility(utility_spec)),
        "attitude": utility_spec.describe(),
        "plan": [{"name": op.name, "args": list(op.args)} for op in steps],
        "expected_utility": _sig9(eu),
        "expected_utility_exact": eu,
        "operator_eu": [
            {
                "name": op.name,
                "args": list(op.args),
                "eu": _sig9(operator_eu(utility_spec, op)),
            }
            for op in steps
        ],
        "stats": stats,
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_plan(text: str, ground_model) -> tuple:
    """Resolve a plan document (or a full plan report) to ground operators."""
    doc = _load_json(text, "plan")
    _expect(doc, dict, "plan", "an object")
    steps_doc = _get(doc, "plan", "plan", list, "a list")
    steps = []
    for i, entry in enumerate(steps_doc):
        p = f"plan[{i}]"
        _expect(entry, dict, p, "an object")
        name = _get(entry, "name", p, str, "a string")
        args = tuple(_get(entry, "args", p, list, "a list", default=[]))
        op = ground_model.operators.get((name, args))
        if op is None:
            raise ParseError(p, f"unknown ground operator {name}({', '.join(args)})")
        steps.append(op)
    return tuple(steps)
