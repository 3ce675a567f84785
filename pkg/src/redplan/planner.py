"""Forward dynamic programming over the state grid.

The sweep visits stages in order; at each transition every reached
predecessor is scored against every admissible next node (optionally
restricted by a level/lattice window), edge feasibility and local cost come
from the constraint engine, and each next node keeps its cheapest
predecessor. Ties prefer the predecessor with the lexicographically
smallest (level, lattice index, branch), which ascending flat node ids
encode directly, so results are bit-reproducible regardless of chunking or
worker count.

Joint-space quantities above first order are evaluated through the winning
predecessor's cached history; their feasibility is therefore
history-dependent and the search is a conservative approximation for those
orders (exact when only velocity-type constraints are enabled).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .constraints import (LimitSets, TrajectoryProfile, evaluate_edge, initial_state,
                          saturation_percentage, stage_transitions)
from .errors import CorruptChain, NoFeasiblePlan
from .grid import StateGrid

Array = np.ndarray

_HISTOGRAM_DURATION = "duration"


class Objective:
    """Additive cost: psi at the initial state plus phi per edge."""

    def initial_cost(self, q: Array, pv: Array) -> Array:
        raise NotImplementedError

    def edge_cost(self, dt: Array, q_prev: Array, pv_prev: Array,
                  q_next: Array, pv_next: float) -> Array:
        """Local cost of each candidate edge, broadcastable to (P, C)."""
        raise NotImplementedError


@dataclass(frozen=True)
class TimeObjective(Objective):
    """Total traversal time: zero initial cost, phi = dt."""

    def initial_cost(self, q, pv):
        return np.zeros(np.shape(pv))

    def edge_cost(self, dt, q_prev, pv_prev, q_next, pv_next):
        return dt[:, None]


@dataclass(frozen=True)
class Window:
    """Optional per-stage candidate restriction (speed/optimality knob).

    Edges whose endpoints differ by more than max_dl levels or max_dj
    lattice steps (per parameter) are skipped. None disables a bound.
    """

    max_dl: int | None = None
    max_dj: int | None = None


@dataclass(frozen=True)
class ReachedSets:
    """Per-stage node ids reached by at least one feasible chain."""

    node_ids: tuple

    def __getitem__(self, i: int) -> Array:
        return self.node_ids[i]

    def counts(self) -> list[int]:
        return [int(ids.size) for ids in self.node_ids]


@dataclass(frozen=True)
class ValueMap:
    """Cumulative cost and predecessor id for every node of every stage."""

    grid: StateGrid
    limits: LimitSets
    objective: Objective
    check_count: int
    cost: Array        # (N_i + 1, L * C), +inf where unreached
    pred: Array        # (N_i + 1, L * C), -1 where no predecessor

    def reached(self, i: int) -> Array:
        return np.flatnonzero(np.isfinite(self.cost[i]))

    def reached_sets(self) -> ReachedSets:
        n = self.grid.n_stages
        return ReachedSets(tuple(self.reached(i) for i in range(n + 1)))


@dataclass(frozen=True)
class PlanResult:
    """Extracted optimal trajectory and its bookkeeping.

    history_orders names the enabled constraint orders whose feasibility
    depended on back-pointer history (empty for velocity-only runs, where
    the search is exact). The producing limits, objective, and check-point
    count ride along so a result can be replayed or re-derived.
    """

    cost: float
    node_ids: Array
    profile: TrajectoryProfile
    saturation: object
    reached: ReachedSets
    history_orders: tuple
    grid: StateGrid
    limits: LimitSets
    objective: Objective
    check_count: int

    @property
    def timestamps(self) -> Array:
        return self.profile.t


def _initial_chain_state(grid: StateGrid, node_ids: Array):
    """Stage-0 cached samples: exact zeros at rest, NaN for moving starts."""
    C = grid.cfg_count
    n = grid.robot.n
    qd = np.full((node_ids.size, n), np.nan)
    qdd = np.full((node_ids.size, n), np.nan)
    tau = np.full((node_ids.size, n), np.nan)
    for k, f in enumerate(node_ids):
        state = initial_state(grid.robot, grid.q_table[0, f % C], grid.pv_values[f // C])
        qd[k], qdd[k], tau[k] = state.qd, state.qdd, state.tau
    return qd, qdd, tau


def plan(grid: StateGrid, limits: LimitSets, objective: Objective | None = None,
         check_count: int = 0, window: Window | None = None, threads: int = 1,
         chunk_cells: int = 4096) -> PlanResult:
    """Run the full forward sweep and extract the optimal plan.

    Raises:
        NoFeasiblePlan: no feasible chain reaches the terminal set; carries
            the deepest stage reached and per-order counts of failed edge
            checks at the transition that died.
    """
    objective = objective if objective is not None else TimeObjective()
    value, histogram, deepest = _sweep(grid, limits, objective, check_count,
                                       window, threads, chunk_cells)
    n = grid.n_stages
    C = grid.cfg_count
    terminal = grid.stage_set(n).node_ids
    if grid.spec.rest_to_rest:
        terminal = terminal[terminal < C]        # level 0 <=> flat id < C
    finite = np.isfinite(value.cost[n, terminal])
    if not np.any(finite):
        raise NoFeasiblePlan(deepest, histogram)
    candidates = terminal[finite]
    best = candidates[np.argmin(value.cost[n, candidates])]
    return extract(value, int(best))


def _sweep(grid, limits, objective, check_count, window, threads, chunk_cells):
    n_stages = grid.n_stages
    C = grid.cfg_count
    S = grid.level_count * C
    cost = np.full((n_stages + 1, S), np.inf)
    pred = np.full((n_stages + 1, S), -1, dtype=np.int64)

    start = grid.stage_set(0).node_ids
    q0 = grid.q_table[0, start % C]
    pv0 = grid.pv_values[start // C]
    cost[0, start] = objective.initial_cost(q0, pv0)
    qd_cur, qdd_cur, tau_cur = np.full((3, S, grid.robot.n), np.nan)
    chain0 = _initial_chain_state(grid, start)
    qd_cur[start], qdd_cur[start], tau_cur[start] = chain0

    lattice_rows = None
    if window is not None and window.max_dj is not None:
        lattice = grid.spec.lattice_indices()
        if lattice.shape[0] * grid.branch_count != C:
            lattice = np.arange(C // grid.branch_count, dtype=int)[:, None]
        lattice_rows = np.repeat(lattice, grid.branch_count, axis=0)   # (C, r)

    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    histogram: dict = {}
    deepest = 0
    try:
        for i in range(n_stages):
            prev_ids = np.flatnonzero(np.isfinite(cost[i]))
            deepest = i
            q_prev = grid.q_table[i, prev_ids % C]
            pv_prev = grid.pv_values[prev_ids // C]
            qd_p, qdd_p, tau_p = qd_cur[prev_ids], qdd_cur[prev_ids], tau_cur[prev_ids]
            cost_p = cost[i, prev_ids]
            qd_cur = np.full((S, grid.robot.n), np.nan)
            qdd_cur = np.full((S, grid.robot.n), np.nan)
            tau_cur = np.full((S, grid.robot.n), np.nan)
            histogram = {}
            reached_any = False

            for l_next in range(grid.level_count):
                cols = np.flatnonzero(grid.admissible[i + 1, l_next])
                if cols.size == 0:
                    continue
                pv_next = float(grid.pv_values[l_next])
                q_next_all = grid.q_table[i + 1]

                row_mask = None
                if window is not None and window.max_dl is not None:
                    row_mask = np.abs(prev_ids // C - l_next) <= window.max_dl

                def eval_chunk(chunk_cols):
                    ev = stage_transitions(grid.robot, limits, grid.path.dlam,
                                           q_prev, pv_prev, qd_p, qdd_p, tau_p,
                                           q_next_all[chunk_cols], pv_next,
                                           check_count=check_count)
                    feasible = ev.feasible
                    if row_mask is not None:
                        feasible = feasible & row_mask[:, None]
                    if lattice_rows is not None:
                        dj = np.abs(lattice_rows[prev_ids % C][:, None, :]
                                    - lattice_rows[chunk_cols][None, :, :])
                        feasible = feasible & np.all(dj <= window.max_dj, axis=-1)
                    phi = objective.edge_cost(ev.dt, q_prev, pv_prev,
                                              q_next_all[chunk_cols], pv_next)
                    cand = np.where(feasible, cost_p[:, None] + phi, np.inf)
                    best_p = np.argmin(cand, axis=0)
                    pick = np.arange(chunk_cols.size)
                    best_cost = cand[best_p, pick]
                    fails = {o: int(np.count_nonzero(~ok)) for o, ok in ev.order_ok.items()}
                    fails[_HISTOGRAM_DURATION] = int(np.count_nonzero(~np.isfinite(ev.dt))) \
                        * chunk_cols.size
                    return (best_cost, best_p,
                            ev.qd[best_p, pick], ev.qdd[best_p, pick], ev.tau[best_p, pick],
                            fails)

                chunks = [cols[k:k + chunk_cells] for k in range(0, cols.size, chunk_cells)]
                if executor is not None and len(chunks) > 1:
                    results = list(executor.map(eval_chunk, chunks))
                else:
                    results = [eval_chunk(ch) for ch in chunks]

                for chunk_cols, (best_cost, best_p, qd_n, qdd_n, tau_n, fails) in zip(chunks, results):
                    hit = np.isfinite(best_cost)
                    if np.any(hit):
                        reached_any = True
                        f = l_next * C + chunk_cols[hit]
                        cost[i + 1, f] = best_cost[hit]
                        pred[i + 1, f] = prev_ids[best_p[hit]]
                        qd_cur[f] = qd_n[hit]
                        qdd_cur[f] = qdd_n[hit]
                        tau_cur[f] = tau_n[hit]
                    for key, count in fails.items():
                        histogram[key] = histogram.get(key, 0) + count

            if not reached_any:
                raise NoFeasiblePlan(i, histogram)
        deepest = n_stages
    finally:
        if executor is not None:
            executor.shutdown(wait=False)

    value = ValueMap(grid=grid, limits=limits, objective=objective,
                     check_count=check_count, cost=cost, pred=pred)
    return value, histogram, deepest


def extract(value: ValueMap, terminal: int) -> PlanResult:
    """Walk the predecessor map backward and replay the winning chain.

    The replay re-evaluates each edge through the scalar engine path, which
    shares its arithmetic with the sweep, so timestamps and the terminal
    cost come out bit-identical for the time objective.

    Raises:
        CorruptChain: dangling predecessor pointer, or a replayed edge that
            fails its own feasibility check.
    """
    grid = value.grid
    n_stages = grid.n_stages
    C = grid.cfg_count
    if not np.isfinite(value.cost[n_stages, terminal]):
        raise CorruptChain(f"terminal node {terminal} was never reached")
    ids = np.empty(n_stages + 1, dtype=np.int64)
    ids[n_stages] = terminal
    for i in range(n_stages, 0, -1):
        p = value.pred[i, ids[i]]
        if p < 0:
            raise CorruptChain(f"dangling predecessor at stage {i}")
        ids[i - 1] = p

    n = grid.robot.n
    q = np.array([grid.q_table[i, ids[i] % C] for i in range(n_stages + 1)])
    pv = grid.pv_values[ids // C]
    t = np.zeros(n_stages + 1)
    dt = np.zeros(n_stages + 1)
    qd = np.full((n_stages + 1, n), np.nan)
    qdd = np.full((n_stages + 1, n), np.nan)
    qddd = np.full((n_stages + 1, n), np.nan)
    tau = np.full((n_stages + 1, n), np.nan)
    taud = np.full((n_stages + 1, n), np.nan)

    state = initial_state(grid.robot, q[0], float(pv[0]))
    qd[0], qdd[0], tau[0] = state.qd, state.qdd, state.tau
    if pv[0] == 0.0:
        qddd[0] = 0.0
        taud[0] = 0.0
    for i in range(1, n_stages + 1):
        ev = evaluate_edge(grid.robot, value.limits, grid.path.dlam, state,
                           q[i], float(pv[i]), check_count=value.check_count)
        if not ev.feasible:
            raise CorruptChain(f"replayed edge into stage {i} is infeasible")
        dt[i] = ev.dt
        t[i] = t[i - 1] + ev.dt
        qd[i], qdd[i], qddd[i] = ev.qd, ev.qdd, ev.qddd
        tau[i], taud[i] = ev.tau, ev.taud
        state = ev.next_state(q[i], float(pv[i]))

    profile = TrajectoryProfile(t=t, dt=dt, lam=grid.path.lam.copy(), pv=pv.astype(float),
                                q=q, qd=qd, qdd=qdd, qddd=qddd, tau=tau, taud=taud)
    return PlanResult(cost=float(value.cost[n_stages, terminal]), node_ids=ids,
                      profile=profile,
                      saturation=saturation_percentage(profile, value.limits),
                      reached=value.reached_sets(),
                      history_orders=value.limits.history_dependent_orders,
                      grid=grid, limits=value.limits, objective=value.objective,
                      check_count=value.check_count)


def pst(result: PlanResult) -> list:
    """Phase-space trajectory: one (lambda, v, pseudo-velocity) triple per
    stage, v scalar for a single redundancy parameter."""
    robot = result.grid.robot
    idx = list(robot.chain.redundancy_indices)
    triples = []
    for i in range(result.profile.n_stages + 1):
        v = result.profile.q[i, idx]
        v_out = float(v[0]) if len(idx) == 1 else tuple(float(x) for x in v)
        triples.append((float(result.profile.lam[i]), v_out, float(result.profile.pv[i])))
    return triples
