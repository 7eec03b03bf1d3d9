"""Utility functions and plan expected-utility evaluators.

Static attitudes come from one family: linear (neutral) and exponential,

    U(c) = a * (exp(a * alpha * c) - 1) / alpha,    a in {-1, +1}, alpha > 0,

which is concave (risk-averse) for a = -1 and convex (risk-seeking) for
a = +1 on the cost axis c < 0.  Dynamic attitudes use the one-switch form

    U(x) = x + D * (1 - exp(-alpha * x)) / alpha

evaluated at the remaining resource level x; it is supported only on realized
trajectories (the simulator), never inside search, because it does not factor
over plan steps.

The exponential family does factor: the expected utility of a plan equals
U applied to the sum of per-step certainty equivalents, which is what makes
segment-by-segment evaluation and additive search bookkeeping exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .errors import ModelError, TrajectoryCapError, UnsupportedUtilityError

LINEAR = "linear"
EXPONENTIAL = "exponential"
ONE_SWITCH = "one_switch"

DEFAULT_TRAJECTORY_CAP = 10_000_000


@dataclass(frozen=True)
class UtilitySpec:
    """The agent's risk attitude.

    kind        one of linear / exponential / one_switch
    a           attitude coefficient, -1 (averse) or +1 (seeking); exponential only
    alpha       curving coefficient > 0; exponential and one_switch
    d           trade-off between neutrality and aversion > 0; one_switch only
    initial_resource   starting resource level > 0; one_switch only
    """

    kind: str
    a: int | None = None
    alpha: float | None = None
    d: float | None = None
    initial_resource: float | None = None

    def __post_init__(self):
        if self.kind == LINEAR:
            return
        if self.kind == EXPONENTIAL:
            if self.a not in (-1, 1):
                raise ModelError(f"exponential utility needs a in {{-1, +1}}, got {self.a}")
            if self.alpha is None or self.alpha <= 0:
                raise ModelError(f"exponential utility needs alpha > 0, got {self.alpha}")
        elif self.kind == ONE_SWITCH:
            if self.d is None or self.d <= 0:
                raise ModelError(f"one-switch utility needs D > 0, got {self.d}")
            if self.alpha is None or self.alpha <= 0:
                raise ModelError(f"one-switch utility needs alpha > 0, got {self.alpha}")
            if self.initial_resource is None or self.initial_resource <= 0:
                raise ModelError(
                    f"one-switch utility needs initial_resource > 0, "
                    f"got {self.initial_resource}"
                )
        else:
            raise ModelError(f"unknown utility kind {self.kind!r}")

    @classmethod
    def linear(cls) -> UtilitySpec:
        return cls(LINEAR)

    @classmethod
    def exponential(cls, a: int, alpha: float) -> UtilitySpec:
        return cls(EXPONENTIAL, a=a, alpha=alpha)

    @classmethod
    def one_switch(cls, d: float, alpha: float, initial_resource: float) -> UtilitySpec:
        return cls(ONE_SWITCH, alpha=alpha, d=d, initial_resource=initial_resource)

    @property
    def is_static(self) -> bool:
        return self.kind in (LINEAR, EXPONENTIAL)

    def describe(self) -> str:
        if self.kind == LINEAR:
            return "linear (risk-neutral)"
        if self.kind == EXPONENTIAL:
            attitude = "risk-averse" if self.a < 0 else "risk-seeking"
            return f"exponential a={self.a:+d} alpha={self.alpha} ({attitude})"
        return (
            f"one-switch D={self.d} alpha={self.alpha} "
            f"initial_resource={self.initial_resource}"
        )


def _require_static(spec: UtilitySpec, where: str) -> None:
    if not spec.is_static:
        raise UnsupportedUtilityError(
            f"{where} supports only linear and exponential utilities; "
            "one-switch attitudes are evaluated on realized trajectories "
            "by the simulator"
        )


def eval_static(spec: UtilitySpec, cost: float) -> float:
    """Utility of one realized cost under a static attitude."""
    _require_static(spec, "eval_static")
    if cost >= 0:
        raise ModelError(f"costs must be strictly negative, got {cost}")
    return eu_of_total_cost(spec, cost)


def eu_of_total_cost(spec: UtilitySpec, total_cost: float) -> float:
    """Static utility extended continuously to total_cost <= 0 (U(0) = 0)."""
    _require_static(spec, "eu_of_total_cost")
    if spec.kind == LINEAR:
        return total_cost
    if total_cost == math.inf:
        return math.inf
    if total_cost == -math.inf:
        # Limit of U as cost -> -inf: -1/alpha for a=+1, -inf for a=-1.
        return -1.0 / spec.alpha if spec.a > 0 else -math.inf
    try:
        return spec.a * (math.exp(spec.a * spec.alpha * total_cost) - 1.0) / spec.alpha
    except OverflowError:
        return -math.inf


def total_cost_of_eu(spec: UtilitySpec, eu: float) -> float:
    """Inverse of :func:`eu_of_total_cost` (the certainty-equivalent cost)."""
    _require_static(spec, "total_cost_of_eu")
    if spec.kind == LINEAR:
        return eu
    if eu == -math.inf:
        return -math.inf
    inner = 1.0 + eu * spec.alpha / spec.a
    if inner <= 0.0:
        return -math.inf
    return math.log(inner) / (spec.a * spec.alpha)


def eval_one_switch(spec: UtilitySpec, resource_after: float) -> float:
    """One-switch utility of a post-execution resource level.

    Negative levels are permitted; the simulator flags them as depletion.
    """
    if spec.kind != ONE_SWITCH:
        raise UnsupportedUtilityError("eval_one_switch needs a one-switch spec")
    return resource_after + spec.d * (
        (1.0 - math.exp(-spec.alpha * resource_after)) / spec.alpha
    )


def operator_eu(spec: UtilitySpec, ground_op) -> float:
    """Probability-weighted utility over an operator's cost distribution."""
    _require_static(spec, "operator_eu")
    return math.fsum(o.p * eval_static(spec, o.cost) for o in ground_op.outcomes)


def moment(spec: UtilitySpec, ground_op) -> float:
    """Exponential-family factor of one step: sum_i p_i * exp(a*alpha*c_i)."""
    if spec.kind != EXPONENTIAL:
        raise UnsupportedUtilityError("moment is defined for exponential specs")
    try:
        return math.exp(log_moment(spec, ground_op))
    except OverflowError:
        return math.inf


def log_moment(spec: UtilitySpec, ground_op) -> float:
    """log of :func:`moment`, computed by log-sum-exp so steep attitudes
    (large alpha * |cost|) stay finite."""
    if spec.kind != EXPONENTIAL:
        raise UnsupportedUtilityError("log_moment is defined for exponential specs")
    exponents = [spec.a * spec.alpha * o.cost for o in ground_op.outcomes]
    peak = max(exponents)
    return peak + math.log(
        math.fsum(o.p * math.exp(e - peak)
                  for o, e in zip(ground_op.outcomes, exponents))
    )


def certainty_equivalent(spec: UtilitySpec, ground_op) -> float:
    """The sure cost the attitude trades for the operator's distribution.

    Strictly negative; certainty equivalents add along a plan, and the plan's
    exact expected utility equals the static utility of their sum.  Searches
    therefore minimize the summed magnitudes.
    """
    _require_static(spec, "certainty_equivalent")
    if spec.kind == LINEAR:
        return math.fsum(o.p * o.cost for o in ground_op.outcomes)
    return log_moment(spec, ground_op) / (spec.a * spec.alpha)


def step_weight(spec: UtilitySpec, ground_op) -> float:
    """Positive additive search weight of one step: |certainty equivalent|."""
    return -certainty_equivalent(spec, ground_op)


def plan_eu_exact(
    spec: UtilitySpec, plan, trajectory_cap: int = DEFAULT_TRAJECTORY_CAP
) -> float:
    """Exact plan expected utility by full trajectory enumeration.

    Exponential in plan length; refuses to enumerate more than
    ``trajectory_cap`` trajectories.
    """
    _require_static(spec, "plan_eu_exact")
    steps = list(plan)
    if not steps:
        return 0.0
    count = math.prod(len(op.outcomes) for op in steps)
    if count > trajectory_cap:
        raise TrajectoryCapError(
            f"plan has {count} trajectories, above the cap of {trajectory_cap}"
        )
    terms = []
    for combo in itertools.product(*(op.outcomes for op in steps)):
        prob = math.prod(o.p for o in combo)
        total = math.fsum(o.cost for o in combo)
        terms.append(prob * eu_of_total_cost(spec, total))
    return math.fsum(terms)


def plan_eu_segmented(spec: UtilitySpec, plan) -> float:
    """Plan expected utility by per-step factors, linear in plan length.

    Linear specs sum per-operator expected utilities.  Exponential specs
    multiply per-step factors and renormalize once at the end (the factored
    form omits the utility's "-1" normalizer, a constant shared by every plan
    of the same length-free spec), so the result equals
    :func:`plan_eu_exact` and the empty plan evaluates to 0.
    """
    _require_static(spec, "plan_eu_segmented")
    steps = list(plan)
    if spec.kind == LINEAR:
        return math.fsum(operator_eu(spec, op) for op in steps)
    total = math.fsum(log_moment(spec, op) for op in steps)
    try:
        product = math.exp(total)
    except OverflowError:  # only reachable for a = -1: the EU saturates
        return -math.inf
    return (spec.a / spec.alpha) * (product - 1.0)


def trajectory_eu(spec: UtilitySpec, plan, trajectory) -> float:
    """Expected utility of one plan trajectory (chosen outcome per step)."""
    _require_static(spec, "trajectory_eu")
    steps = list(plan)
    if len(trajectory) != len(steps):
        raise ModelError("trajectory length does not match plan length")
    total = 0.0
    for op, idx in zip(steps, trajectory):
        if not 0 <= idx < len(op.outcomes):
            raise ModelError(f"operator {op.name}: invalid outcome index {idx}")
        out = op.outcomes[idx]
        total += out.p * eval_static(spec, out.cost)
    return total


def plan_eu_success_model(success_probs, utilities) -> float:
    """Plan expected utility under the success/failure model.

    Every step succeeds independently with its given probability and yields
    its given utility; any failure yields utility 0.  The plan's expected
    utility is the product of success probabilities times the product of
    success utilities.
    """
    probs = list(success_probs)
    utils = list(utilities)
    if len(probs) != len(utils):
        raise ModelError("success probabilities and utilities differ in length")
    for p in probs:
        if not 0.0 < p <= 1.0:
            raise ModelError(f"success probability must be in (0, 1], got {p}")
    return math.prod(probs) * math.prod(utils)
