"""Risk-aware HTN planning with cost-variable operators.

Operators carry discrete probability distributions over strictly negative
costs; plans are ranked by expected utility under a configurable risk
attitude (linear, exponential, or one-switch), and maximum-expected-utility
plans are computed by a state-based and a plan-space heuristic search,
validated against a brute-force oracle and a Monte Carlo simulator.
"""

__version__ = "0.1.0"

from .errors import (
    EffectNondeterminismError,
    EnumerationCapError,
    ModelError,
    ParseError,
    RiskHtnError,
    TrajectoryCapError,
    UnsupportedUtilityError,
)
from .model import (
    Domain,
    Literal,
    Method,
    Operator,
    Outcome,
    Param,
    Problem,
    Resource,
    State,
    TaskInstance,
    TaskNetwork,
    Universe,
    applicable,
    decompose,
    find_unconstrained_tasks,
    progress,
)
from .grounding import GroundModel, GroundMethod, GroundOperator, ground
from .utility import (
    UtilitySpec,
    certainty_equivalent,
    eval_one_switch,
    eval_static,
    operator_eu,
    plan_eu_exact,
    plan_eu_segmented,
    plan_eu_success_model,
    trajectory_eu,
)
from .cvtdg import CVTDG, annotate_expected_utilities, build_cvtdg, compatible_groundings
from .io_formats import (
    dump_annotations,
    emit_plan_report,
    export_dot,
    parse_domain,
    parse_plan,
    parse_problem,
    parse_utility,
    serialize_domain,
    serialize_utility,
)
from .search_state import SearchBounds, SearchResult, combine, compute_rc_heuristic, expand, find_plans
from .search_plan import PartialPlan, find_plans_planspace, partial_plan_eu, refine
from .evaluation import OracleResult, SimulationSummary, oracle_enumerate, simulate
