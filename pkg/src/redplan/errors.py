"""Exception types shared across the planning stack."""

from __future__ import annotations


class PlanningError(Exception):
    """Base class for all errors raised by this package."""


class Unreachable(PlanningError):
    """The task point cannot be reached for the given redundancy values."""


class BranchDegenerate(PlanningError):
    """The IK branches coincide; the solution exists only in branch 0."""


class DegenerateCurve(PlanningError):
    """The requested curve has zero length or coincident waypoints."""


class EmptyStage(PlanningError):
    """A stage of the state grid has no admissible node.

    Attributes:
        stage: index of the first empty stage.
    """

    def __init__(self, stage: int, message: str | None = None):
        self.stage = stage
        super().__init__(message or f"stage {stage} has no admissible node")


class InfeasibleEdge(PlanningError):
    """Both endpoint pseudo-velocities are zero; the edge duration diverges."""


class MissingHistory(PlanningError):
    """A derivative order was requested beyond the available chain depth."""


class NoFeasiblePlan(PlanningError):
    """No feasible chain connects the start stage to the terminal set.

    Attributes:
        deepest_stage: last stage index with at least one reached node.
        violation_histogram: per-order counts of rejected edges, keyed by
            constraint-order name.
    """

    def __init__(self, deepest_stage: int, violation_histogram: dict[str, int] | None = None):
        self.deepest_stage = deepest_stage
        self.violation_histogram = dict(violation_histogram or {})
        detail = ", ".join(f"{k}={v}" for k, v in sorted(self.violation_histogram.items()))
        super().__init__(
            f"no feasible plan; deepest reached stage {deepest_stage}"
            + (f" (rejected edges: {detail})" if detail else "")
        )


class CorruptChain(PlanningError):
    """A back-pointer chain does not terminate at stage 0."""


class NoConvergence(PlanningError):
    """Redundancy resolution failed to converge at a waypoint.

    Attributes:
        waypoint: index of the waypoint that failed.
        residual: task residual norm at the last iterate.
    """

    def __init__(self, waypoint: int, residual: float):
        self.waypoint = waypoint
        self.residual = residual
        super().__init__(f"no convergence at waypoint {waypoint} (residual {residual:.3e})")


class SingularJacobian(PlanningError):
    """The task Jacobian condition number exceeded the configured cap."""


class BudgetExceeded(PlanningError):
    """The exhaustive search budget would be exceeded."""


class ContractViolation(PlanningError):
    """An internal consistency contract failed (e.g. planner beats the oracle)."""


class ScenarioError(PlanningError):
    """A scenario or robot description file failed validation."""
