"""Exception types shared across the package."""


class RiskHtnError(Exception):
    """Base class for all riskhtn errors."""


class ModelError(RiskHtnError):
    """A domain, problem, or network violates a structural invariant."""


class ParseError(RiskHtnError):
    """A file failed to parse or validate.

    ``path`` is a breadcrumb into the offending document (e.g.
    ``operators[2].outcomes[0].cost``) so every diagnostic carries a location.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class UnsupportedUtilityError(RiskHtnError):
    """A utility spec was passed to an evaluator or planner that cannot use it.

    One-switch utilities do not factor over plan steps, so they are accepted
    only by the trajectory simulator.
    """


class EffectNondeterminismError(RiskHtnError):
    """The planners require every operator's outcomes to share one effect."""


class TrajectoryCapError(RiskHtnError):
    """Exact plan evaluation would enumerate more trajectories than allowed."""


class EnumerationCapError(RiskHtnError):
    """Exhaustive plan enumeration exceeded its configured budget."""
