"""Brute-force ground truth: depth-first enumeration of every admissible
node chain with full (per-chain) history, plus gap measurement against the
DP result.

The DP search pins each node's derivative history to its cheapest
predecessor; enumeration carries every chain's own history, so its optimum
is exact. On velocity-only runs the two must agree; with history-dependent
orders enabled the DP cost can only be higher (it explores a subset of
histories), and compare() quantifies and attributes that gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import (ORDERS, LimitSets, TrajectoryProfile, evaluate_edge,
                          initial_state, saturation_percentage)
from .errors import (BudgetExceeded, ContractViolation, InfeasibleEdge, NoFeasiblePlan,
                     ScenarioError)
from .grid import StateGrid
from .planner import Objective, PlanResult, ReachedSets, TimeObjective, plan

Array = np.ndarray


@dataclass(frozen=True)
class OracleBudget:
    """Enumeration guard rails; exceeded budgets abort before any work."""

    max_chains: float = 2e6
    max_cells: int = 20000

    def __post_init__(self):
        if self.max_chains <= 0 or self.max_cells <= 0:
            raise ScenarioError("oracle budget must be positive")


@dataclass(frozen=True)
class GapReport:
    """DP-vs-enumeration comparison on one shared instance.

    attribution maps each enabled constraint order to the gap increment it
    introduces when added cumulatively (edge-local orders contribute 0);
    the increments telescope to the total gap.
    """

    oracle_cost: float
    dp_cost: float
    gap: float
    relative_gap: float
    attribution: dict

    def to_dict(self) -> dict:
        return {"oracle_cost": self.oracle_cost, "dp_cost": self.dp_cost,
                "gap": self.gap, "relative_gap": self.relative_gap,
                "attribution": dict(self.attribution)}


def _chain_count(grid: StateGrid) -> float:
    n = grid.n_stages
    C = grid.cfg_count
    total = 1.0
    for i in range(n + 1):
        ids = grid.stage_set(i).node_ids
        if i == n and grid.spec.rest_to_rest:
            ids = ids[ids < C]
        total *= float(ids.size)
    return total


def exhaustive_plan(grid: StateGrid, limits: LimitSets,
                    objective: Objective | None = None,
                    budget: OracleBudget | None = None,
                    check_count: int = 0, prune: bool = True) -> PlanResult:
    """Minimum-cost feasible chain by depth-first enumeration.

    Every chain carries its own full derivative history (no back-pointer
    approximation); edge conventions are exactly the engine's. On cost ties
    the first chain in ascending-node-id depth-first order wins, which is
    the lexicographically smallest chain.

    Cost-bound pruning (time objective only: each remaining edge costs at
    least dlam / pv_max) preserves the optimum and the tie-break, but
    subtrees it cuts are not explored, so the reached sets are then a
    subset of all feasible-prefix nodes; pass prune=False for exact sets.

    Raises:
        BudgetExceeded: the instance is too large to enumerate.
        NoFeasiblePlan: no admissible chain satisfies the constraints.
    """
    objective = objective if objective is not None else TimeObjective()
    budget = budget if budget is not None else OracleBudget()
    if grid.total_admissible > budget.max_cells:
        raise BudgetExceeded(f"grid has {grid.total_admissible} admissible nodes, "
                             f"budget allows {budget.max_cells}")
    count = _chain_count(grid)
    if count > budget.max_chains:
        raise BudgetExceeded(f"instance has {count:.3g} chains, "
                             f"budget allows {budget.max_chains:.3g}")

    n = grid.n_stages
    C = grid.cfg_count
    robot = grid.robot
    dlam = grid.path.dlam
    stage_ids = [grid.stage_set(i).node_ids for i in range(n + 1)]
    if grid.spec.rest_to_rest:
        stage_ids[n] = stage_ids[n][stage_ids[n] < C]

    # pruning is only admissible when the local cost is a nonnegative time
    # step, which each remaining edge bounds from below by dlam / pv_max
    time_like = prune and isinstance(objective, TimeObjective)
    lb_step = dlam / float(grid.pv_values[-1]) if time_like else 0.0

    best_cost = np.inf
    best_chain: list | None = None
    reached = [set() for _ in range(n + 1)]
    histogram: dict = {}
    deepest = 0

    def scalar_psi(q, pv):
        return float(np.asarray(objective.initial_cost(q[None, :], np.array([pv])))[0])

    def scalar_phi(dt, q_prev, pv_prev, q_next, pv_next):
        out = np.asarray(objective.edge_cost(np.array([dt]), q_prev[None, :],
                                             np.array([pv_prev]), q_next[None, :], pv_next))
        return float(np.broadcast_to(out, (1, 1))[0, 0])

    def descend(i, node, state, partial, chain):
        nonlocal best_cost, best_chain, deepest
        if i == n:
            if partial < best_cost:
                best_cost = partial
                best_chain = chain.copy()
            return
        for f in stage_ids[i + 1]:
            q_next = grid.q_table[i + 1, f % C]
            pv_next = float(grid.pv_values[f // C])
            try:
                ev = evaluate_edge(robot, limits, dlam, state, q_next, pv_next,
                                   check_count=check_count)
            except InfeasibleEdge:
                histogram["duration"] = histogram.get("duration", 0) + 1
                continue
            if not ev.feasible:
                for order in {v.order for v in ev.violations}:
                    histogram[order] = histogram.get(order, 0) + 1
                continue
            reached[i + 1].add(int(f))
            deepest = max(deepest, i + 1)
            new_cost = partial + scalar_phi(ev.dt, state.q, state.pv, q_next, pv_next)
            if time_like and new_cost + (n - (i + 1)) * lb_step >= best_cost:
                continue
            chain.append(int(f))
            descend(i + 1, f, ev.next_state(q_next, pv_next), new_cost, chain)
            chain.pop()

    for f0 in stage_ids[0]:
        q0 = grid.q_table[0, f0 % C]
        pv0 = float(grid.pv_values[f0 // C])
        reached[0].add(int(f0))
        descend(0, f0, initial_state(robot, q0, pv0), scalar_psi(q0, pv0), [int(f0)])

    if best_chain is None:
        raise NoFeasiblePlan(deepest, histogram)
    reached_sets = ReachedSets(tuple(np.array(sorted(s), dtype=np.int64) for s in reached))
    return _chain_result(grid, limits, objective, check_count, best_chain,
                         best_cost, reached_sets)


def _chain_result(grid, limits, objective, check_count, chain, cost, reached_sets):
    """Replay a winning chain into a PlanResult (same arithmetic as extract)."""
    n = grid.n_stages
    C = grid.cfg_count
    nj = grid.robot.n
    ids = np.asarray(chain, dtype=np.int64)
    q = np.array([grid.q_table[i, ids[i] % C] for i in range(n + 1)])
    pv = grid.pv_values[ids // C].astype(float)
    t = np.zeros(n + 1)
    dt = np.zeros(n + 1)
    qd = np.full((n + 1, nj), np.nan)
    qdd = np.full((n + 1, nj), np.nan)
    qddd = np.full((n + 1, nj), np.nan)
    tau = np.full((n + 1, nj), np.nan)
    taud = np.full((n + 1, nj), np.nan)
    state = initial_state(grid.robot, q[0], float(pv[0]))
    qd[0], qdd[0], tau[0] = state.qd, state.qdd, state.tau
    if pv[0] == 0.0:
        qddd[0] = 0.0
        taud[0] = 0.0
    for i in range(1, n + 1):
        ev = evaluate_edge(grid.robot, limits, grid.path.dlam, state, q[i],
                           float(pv[i]), check_count=check_count)
        dt[i] = ev.dt
        t[i] = t[i - 1] + ev.dt
        qd[i], qdd[i], qddd[i] = ev.qd, ev.qdd, ev.qddd
        tau[i], taud[i] = ev.tau, ev.taud
        state = ev.next_state(q[i], float(pv[i]))
    profile = TrajectoryProfile(t=t, dt=dt, lam=grid.path.lam.copy(), pv=pv, q=q,
                                qd=qd, qdd=qdd, qddd=qddd, tau=tau, taud=taud)
    return PlanResult(cost=float(cost), node_ids=ids, profile=profile,
                      saturation=saturation_percentage(profile, limits),
                      reached=reached_sets,
                      history_orders=limits.history_dependent_orders,
                      grid=grid, limits=limits, objective=objective,
                      check_count=check_count)


def _same_limits(a: LimitSets, b: LimitSets) -> bool:
    for order in ORDERS:
        x, y = a.bound(order), b.bound(order)
        if (x is None) != (y is None):
            return False
        if x is not None and not np.array_equal(x, y):
            return False
    return True


def compare(dp_result: PlanResult, oracle_result: PlanResult,
            budget: OracleBudget | None = None, attribute: bool = True,
            tolerance: float = 1e-12) -> GapReport:
    """Measure the DP approximation gap against the enumeration optimum.

    Both results must come from the same grid, limits, and objective. When
    the gap is positive and attribute is set, the enabled orders are added
    back one at a time (cheapest first) and each one's gap increment is
    recorded.

    Raises:
        ScenarioError: results from different instances.
        ContractViolation: DP cost below the oracle cost beyond tolerance
            (one of the two searches is broken).
    """
    if dp_result.grid.signature() != oracle_result.grid.signature():
        raise ScenarioError("gap comparison needs results from the same grid")
    if not _same_limits(dp_result.limits, oracle_result.limits):
        raise ScenarioError("gap comparison needs identical limit sets")
    if type(dp_result.objective) is not type(oracle_result.objective):
        raise ScenarioError("gap comparison needs the same objective")
    if dp_result.check_count != oracle_result.check_count:
        raise ScenarioError("gap comparison needs the same check-point count")

    gap = dp_result.cost - oracle_result.cost
    if gap < -tolerance:
        raise ContractViolation(
            f"DP cost {dp_result.cost!r} beats the exhaustive optimum "
            f"{oracle_result.cost!r}; one of the searches is unsound")
    relative = gap / oracle_result.cost if oracle_result.cost > 0 else 0.0

    enabled = dp_result.limits.enabled_orders
    attribution = {order: 0.0 for order in enabled}
    if attribute and gap > tolerance:
        grid = dp_result.grid
        objective = dp_result.objective
        check_count = dp_result.check_count
        prev_gap = 0.0
        for k, order in enumerate(enabled):
            subset = dp_result.limits.disable(*enabled[k + 1:])
            if order == enabled[-1]:
                gap_k = gap
            else:
                dp_k = plan(grid, subset, objective, check_count=check_count)
                oracle_k = exhaustive_plan(grid, subset, objective, budget=budget,
                                           check_count=check_count)
                gap_k = dp_k.cost - oracle_k.cost
            attribution[order] = gap_k - prev_gap
            prev_gap = gap_k
    return GapReport(oracle_cost=oracle_result.cost, dp_cost=dp_result.cost,
                     gap=gap, relative_gap=relative, attribution=attribution)
