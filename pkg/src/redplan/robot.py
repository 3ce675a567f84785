"""Manipulator abstraction and the planar redundant reference arm.

The planner only talks to :class:`RobotModel`: forward/inverse kinematics with
explicit solution-branch enumeration, the task Jacobian, joint-space inverse
dynamics, and the per-joint limit table. :class:`PlanarArm` implements the
interface for a planar n-R chain in a vertical plane (task = 2-D end-effector
position), which keeps every mechanism analytic and cheap to evaluate.

All kinematics/dynamics methods broadcast over leading batch dimensions: a
joint vector argument of shape ``(..., n)`` yields results with the same
leading shape. Scalar and batched calls go through identical elementwise
arithmetic, so they agree bit for bit.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchDegenerate, ScenarioError, Unreachable

Array = np.ndarray

# Reachability slack for the IK annulus test and the threshold below which the
# two IK branches are reported as coincident.
_REACH_TOL = 1e-9
_DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class KinematicChain:
    """Structural description of a serial chain.

    Attributes:
        link_lengths: link lengths in meters, one per joint.
        task_dim: dimension m of the task space.
        redundancy_indices: indices of the r = n - m joints used as
            redundancy parameters.
    """

    link_lengths: tuple[float, ...]
    task_dim: int
    redundancy_indices: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.link_lengths)

    @property
    def m(self) -> int:
        return self.task_dim

    @property
    def r(self) -> int:
        return len(self.redundancy_indices)

    def __post_init__(self):
        n, m = self.n, self.task_dim
        if not (n > m >= 1):
            raise ScenarioError(f"need n > m >= 1, got n={n}, m={m}")
        if self.r != n - m or self.r < 1:
            raise ScenarioError(f"need r = n - m >= 1, got r={self.r}")
        if len(set(self.redundancy_indices)) != self.r:
            raise ScenarioError("redundancy indices must be distinct")
        if any(not (0 <= i < n) for i in self.redundancy_indices):
            raise ScenarioError("redundancy indices out of range")


@dataclass(frozen=True)
class JointLimits:
    """Per-joint bound table: position, velocity, acceleration, jerk,
    torque, and torque rate. Rate/effort bounds are symmetric about zero."""

    q_min: Array
    q_max: Array
    qd_max: Array
    qdd_max: Array
    qddd_max: Array
    tau_max: Array
    taud_max: Array

    def __post_init__(self):
        names = ("q_min", "q_max", "qd_max", "qdd_max", "qddd_max", "tau_max", "taud_max")
        for name in names:
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        n = self.q_min.shape[0]
        for name in names:
            if getattr(self, name).shape != (n,):
                raise ScenarioError(f"limit field {name} must have shape ({n},)")
        if np.any(self.q_min >= self.q_max):
            raise ScenarioError("q_min must be strictly below q_max")
        for name in ("qd_max", "qdd_max", "qddd_max", "tau_max", "taud_max"):
            if np.any(getattr(self, name) <= 0):
                raise ScenarioError(f"{name} entries must be strictly positive")

    @property
    def n(self) -> int:
        return self.q_min.shape[0]


@dataclass(frozen=True)
class DynamicParams:
    """Per-link rigid-body parameters plus per-joint friction and gravity."""

    mass: Array
    com: Array           # distance of each link COM along the link (m)
    inertia: Array       # inertia about each COM (kg m^2)
    viscous: Array       # viscous friction coefficient (Nm s/rad)
    coulomb: Array       # Coulomb friction magnitude (Nm)
    gravity: Array = field(default_factory=lambda: np.array([0.0, -9.81]))

    def __post_init__(self):
        for name in ("mass", "com", "inertia", "viscous", "coulomb", "gravity"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.mass < 0) or np.any(self.inertia < 0):
            raise ScenarioError("masses and inertias must be nonnegative")
        if np.any(self.viscous < 0) or np.any(self.coulomb < 0):
            raise ScenarioError("friction coefficients must be nonnegative")
        if self.gravity.shape != (2,):
            raise ScenarioError("gravity must be a 2-vector for planar chains")


def _matvec(M: Array, v: Array) -> Array:
    """Matrix-vector product with a fixed left-to-right fold over columns.

    Broadcast-stable: scalar and batched calls run the same per-element
    additions in the same order, so results are bit-identical.
    """
    n = M.shape[-1]
    out = M[..., :, 0] * v[..., 0, None]
    for b in range(1, n):
        out = out + M[..., :, b] * v[..., b, None]
    return out


def _wrap_angle(a: Array) -> Array:
    """Wrap to [-pi, pi)."""
    return (a + np.pi) % (2.0 * np.pi) - np.pi


class RobotModel(ABC):
    """Abstract manipulator interface used by the grid, engine, and planner.

    Implementations must be pure (no mutable state after construction) and
    must broadcast every method over leading batch dimensions.
    """

    @property
    @abstractmethod
    def chain(self) -> KinematicChain:
        ...

    @property
    @abstractmethod
    def limits(self) -> JointLimits:
        ...

    @property
    @abstractmethod
    def branch_count(self) -> int:
        """Number of IK solution branches for fixed (x, v)."""

    @property
    def n(self) -> int:
        return self.chain.n

    @property
    def m(self) -> int:
        return self.chain.m

    @property
    def r(self) -> int:
        return self.chain.r

    @abstractmethod
    def forward_kinematics(self, q: Array) -> Array:
        """Task-space pose k(q), shape (..., m)."""

    @abstractmethod
    def inverse_kinematics(self, x: Array, v: Array, g: int) -> Array:
        """Joint vector with redundancy joints pinned to v, on branch g.

        Raises:
            Unreachable: the residual chain cannot reach x for this v.
            BranchDegenerate: the branches coincide and g is not 0 (the
                coincident solution is reported only on branch 0).
        """

    @abstractmethod
    def jacobian(self, q: Array) -> Array:
        """Task Jacobian dk/dq, shape (..., m, n)."""

    @abstractmethod
    def inertia_matrix(self, q: Array) -> Array:
        """Joint-space inertia H(q), shape (..., n, n)."""

    @abstractmethod
    def bias_forces(self, q: Array, qd: Array) -> Array:
        """Velocity, friction, and gravity torques f(q, qd), shape (..., n)."""

    def inverse_dynamics(self, q: Array, qd: Array, qdd: Array) -> Array:
        """tau = H(q) qdd + f(q, qd)."""
        return _matvec(self.inertia_matrix(q), qdd) + self.bias_forces(q, qd)

    def ik_table(self, x: Array, v_values: Array) -> tuple[Array, Array, Array]:
        """Evaluate every branch of inverse_kinematics over a batch of v.

        Args:
            x: task pose, shape (m,).
            v_values: redundancy-parameter batch, shape (J, r).

        Returns:
            (q, reachable, degenerate): q has shape (J, branch_count, n) with
            NaN rows where unreachable; reachable is a (J,) bool mask;
            degenerate is a (J,) bool mask for coincident branches (solution
            kept on branch 0 only).
        """
        v_values = np.asarray(v_values, dtype=float)
        J = v_values.shape[0]
        G = self.branch_count
        q = np.full((J, G, self.n), np.nan)
        reachable = np.zeros(J, dtype=bool)
        degenerate = np.zeros(J, dtype=bool)
        for j in range(J):
            for g in range(G):
                try:
                    q[j, g] = self.inverse_kinematics(x, v_values[j], g)
                    reachable[j] = True
                except BranchDegenerate:
                    degenerate[j] = True
                except Unreachable:
                    break
        return q, reachable, degenerate


class PlanarArm(RobotModel):
    """Planar n-R serial chain in a vertical plane, task = 2-D EE position.

    The redundancy parameters are the first n - 2 joints; given those, the
    distal 2-R subchain is solved analytically with two branches:

    * g = 0, elbow-down: the distal elbow lies below the chord from the
      subchain base to the target (relative elbow angle >= 0);
    * g = 1, elbow-up: the mirror solution (relative elbow angle <= 0).

    Dynamics are closed-form planar Lagrangian terms assembled from link COM
    Jacobians; Coulomb friction uses sign(qd) with sign(0) = 0.
    """

    def __init__(self, chain: KinematicChain, limits: JointLimits, dynamics: DynamicParams):
        if chain.m != 2:
            raise ScenarioError("PlanarArm requires a 2-D task space")
        if chain.redundancy_indices != tuple(range(chain.n - 2)):
            raise ScenarioError(
                "PlanarArm requires the first n-2 joints as redundancy parameters"
            )
        if limits.n != chain.n:
            raise ScenarioError("limit table size does not match joint count")
        for name in ("mass", "com", "inertia", "viscous", "coulomb"):
            if getattr(dynamics, name).shape != (chain.n,):
                raise ScenarioError(f"dynamic parameter {name} must have length n")
        if np.any(np.asarray(chain.link_lengths) <= 0):
            raise ScenarioError("link lengths must be positive")
        if np.any(dynamics.com > np.asarray(chain.link_lengths)):
            raise ScenarioError("COM offsets must lie on their links")
        self._chain = chain
        self._limits = limits
        self._dynamics = dynamics
        self._L = np.asarray(chain.link_lengths, dtype=float)

    # ------------------------------------------------------------------
    # structure

    @property
    def chain(self) -> KinematicChain:
        return self._chain

    @property
    def limits(self) -> JointLimits:
        return self._limits

    @property
    def dynamics(self) -> DynamicParams:
        return self._dynamics

    @property
    def branch_count(self) -> int:
        return 2

    # ------------------------------------------------------------------
    # kinematics

    def forward_kinematics(self, q: Array) -> Array:
        q = np.asarray(q, dtype=float)
        th = np.cumsum(q, axis=-1)
        x = np.zeros(q.shape[:-1])
        y = np.zeros(q.shape[:-1])
        for a in range(self.n):
            x = x + self._L[a] * np.cos(th[..., a])
            y = y + self._L[a] * np.sin(th[..., a])
        return np.stack([x, y], axis=-1)

    def jacobian(self, q: Array) -> Array:
        q = np.asarray(q, dtype=float)
        th = np.cumsum(q, axis=-1)
        st, ct = np.sin(th), np.cos(th)
        n = self.n
        J = np.zeros(q.shape[:-1] + (2, n))
        # column b accumulates the lever arms of every link at or beyond b
        for b in range(n):
            jx = np.zeros(q.shape[:-1])
            jy = np.zeros(q.shape[:-1])
            for a in range(b, n):
                jx = jx - self._L[a] * st[..., a]
                jy = jy + self._L[a] * ct[..., a]
            J[..., 0, b] = jx
            J[..., 1, b] = jy
        return J

    def _distal_geometry(self, x: Array, v: Array) -> tuple[Array, Array, Array, Array]:
        """Per-query quantities of the distal 2-R subproblem.

        Returns (wx, wy, cos_elbow_raw, base_angle) where (wx, wy) is the
        target relative to the subchain base and base_angle is the absolute
        orientation of the last proximal link (0 if r joints = none proximal).
        """
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        r = self.r
        thp = np.cumsum(v, axis=-1)
        bx = np.zeros(v.shape[:-1])
        by = np.zeros(v.shape[:-1])
        for a in range(r):
            bx = bx + self._L[a] * np.cos(thp[..., a])
            by = by + self._L[a] * np.sin(thp[..., a])
        wx = x[..., 0] - bx
        wy = x[..., 1] - by
        l2, l3 = self._L[self.n - 2], self._L[self.n - 1]
        d2 = wx * wx + wy * wy
        cos_elbow = (d2 - l2 * l2 - l3 * l3) / (2.0 * l2 * l3)
        return wx, wy, cos_elbow, thp[..., r - 1]

    def inverse_kinematics(self, x: Array, v: Array, g: int) -> Array:
        if not (0 <= int(g) < self.branch_count):
            raise ScenarioError(f"branch index {g} out of range")
        x = np.asarray(x, dtype=float)
        v = np.atleast_1d(np.asarray(v, dtype=float))
        wx, wy, ce, base = self._distal_geometry(x, v)
        ce = float(ce)
        if ce > 1.0 + _REACH_TOL or ce < -1.0 - _REACH_TOL:
            raise Unreachable(f"distal subchain cannot reach target (cos elbow = {ce:.6g})")
        ce_c = min(1.0, max(-1.0, ce))
        degenerate = (1.0 - abs(ce_c)) <= _DEGENERATE_TOL
        if degenerate and int(g) != 0:
            raise BranchDegenerate("IK branches coincide; solution reported on branch 0")
        gamma = float(np.arccos(ce_c))
        q_elbow = gamma if int(g) == 0 else -gamma
        l2, l3 = self._L[self.n - 2], self._L[self.n - 1]
        phi = float(np.arctan2(wy, wx))
        psi = float(np.arctan2(l3 * np.sin(q_elbow), l2 + l3 * np.cos(q_elbow)))
        th_pen = phi - psi
        q_pen = float(_wrap_angle(th_pen - float(base)))
        return np.concatenate([v, [q_pen, q_elbow]])

    def ik_table(self, x: Array, v_values: Array) -> tuple[Array, Array, Array]:
        x = np.asarray(x, dtype=float)
        v_values = np.asarray(v_values, dtype=float)
        wx, wy, ce, base = self._distal_geometry(x[None, :], v_values)
        reachable = (ce <= 1.0 + _REACH_TOL) & (ce >= -1.0 - _REACH_TOL)
        ce_c = np.clip(ce, -1.0, 1.0)
        degenerate = reachable & ((1.0 - np.abs(ce_c)) <= _DEGENERATE_TOL)
        gamma = np.arccos(ce_c)
        l2, l3 = self._L[self.n - 2], self._L[self.n - 1]
        phi = np.arctan2(wy, wx)
        J = v_values.shape[0]
        q = np.full((J, 2, self.n), np.nan)
        for g, q_elbow in ((0, gamma), (1, -gamma)):
            psi = np.arctan2(l3 * np.sin(q_elbow), l2 + l3 * np.cos(q_elbow))
            q_pen = _wrap_angle(phi - psi - base)
            q[:, g, : self.r] = v_values
            q[:, g, self.n - 2] = q_pen
            q[:, g, self.n - 1] = q_elbow
        q[~reachable] = np.nan
        q[degenerate, 1] = np.nan
        return q, reachable, degenerate

    # ------------------------------------------------------------------
    # dynamics

    def _com_jacobian_components(self, q: Array) -> tuple[Array, Array, Array, Array]:
        """COM Jacobian columns of every link, as separate x/y components.

        Returns (Ax, Ay, ct, st): Ax[..., k, b] is the x component of
        d(p_com_k)/d(q_b); ct/st are cos/sin of the cumulative link angles.
        """
        q = np.asarray(q, dtype=float)
        th = np.cumsum(q, axis=-1)
        ct, st = np.cos(th), np.sin(th)
        n = self.n
        lc = self._dynamics.com
        Ax = np.zeros(q.shape[:-1] + (n, n))
        Ay = np.zeros(q.shape[:-1] + (n, n))
        for k in range(n):
            for b in range(k + 1):
                ax = -lc[k] * st[..., k]
                ay = lc[k] * ct[..., k]
                for a in range(b, k):
                    ax = ax - self._L[a] * st[..., a]
                    ay = ay + self._L[a] * ct[..., a]
                Ax[..., k, b] = ax
                Ay[..., k, b] = ay
        return Ax, Ay, ct, st

    def inertia_matrix(self, q: Array) -> Array:
        Ax, Ay, _, _ = self._com_jacobian_components(q)
        n = self.n
        mass = self._dynamics.mass
        inertia = self._dynamics.inertia
        H = np.zeros(Ax.shape[:-2] + (n, n))
        for a in range(n):
            for b in range(a, n):
                h = np.zeros(Ax.shape[:-2])
                for k in range(max(a, b), n):
                    h = h + mass[k] * (Ax[..., k, a] * Ax[..., k, b]
                                       + Ay[..., k, a] * Ay[..., k, b])
                    h = h + inertia[k]
                H[..., a, b] = h
                if b != a:
                    H[..., b, a] = h
        return H

    def _centripetal_matrix(self, q: Array) -> Array:
        """Matrix G(q) with bias torque contribution G @ (cumulative qd)^2.

        Column c holds the torque produced by a unit squared angular rate of
        link c's absolute angle (centripetal acceleration of every COM that
        link c carries).
        """
        Ax, Ay, ct, st = self._com_jacobian_components(q)
        n = self.n
        mass = self._dynamics.mass
        lc = self._dynamics.com
        G = np.zeros(Ax.shape[:-2] + (n, n))
        for b in range(n):
            for c in range(n):
                gv = np.zeros(Ax.shape[:-2])
                for k in range(max(b, c), n):
                    w = lc[k] if c == k else self._L[c]
                    gv = gv - mass[k] * w * (Ax[..., k, b] * ct[..., c]
                                             + Ay[..., k, b] * st[..., c])
                G[..., b, c] = gv
        return G

    def gravity_torque(self, q: Array) -> Array:
        """Torque holding the arm static against gravity (no friction)."""
        Ax, Ay, _, _ = self._com_jacobian_components(q)
        gx, gy = self._dynamics.gravity
        mass = self._dynamics.mass
        n = self.n
        tg = np.zeros(Ax.shape[:-2] + (n,))
        for b in range(n):
            t = np.zeros(Ax.shape[:-2])
            for k in range(b, n):
                t = t - mass[k] * (Ax[..., k, b] * gx + Ay[..., k, b] * gy)
            tg[..., b] = t
        return tg

    def bias_forces(self, q: Array, qd: Array) -> Array:
        qd = np.asarray(qd, dtype=float)
        G = self._centripetal_matrix(q)
        thd = np.cumsum(qd, axis=-1)
        tau = _matvec(G, thd * thd)
        tau = tau + self._dynamics.viscous * qd
        tau = tau + self._dynamics.coulomb * np.sign(qd)
        return tau + self.gravity_torque(q)

    # ------------------------------------------------------------------
    # serialization

    def to_dict(self) -> dict:
        c, lim, dyn = self._chain, self._limits, self._dynamics
        return {
            "type": "planar",
            "link_lengths": list(map(float, c.link_lengths)),
            "task_dim": c.task_dim,
            "redundancy_indices": list(c.redundancy_indices),
            "limits": {
                "q_min": lim.q_min.tolist(), "q_max": lim.q_max.tolist(),
                "qd_max": lim.qd_max.tolist(), "qdd_max": lim.qdd_max.tolist(),
                "qddd_max": lim.qddd_max.tolist(), "tau_max": lim.tau_max.tolist(),
                "taud_max": lim.taud_max.tolist(),
            },
            "dynamics": {
                "mass": dyn.mass.tolist(), "com": dyn.com.tolist(),
                "inertia": dyn.inertia.tolist(), "viscous": dyn.viscous.tolist(),
                "coulomb": dyn.coulomb.tolist(), "gravity": dyn.gravity.tolist(),
            },
        }


def load_robot(source: dict | str) -> PlanarArm:
    """Build a robot from a description dict or a JSON file path."""
    if isinstance(source, str):
        try:
            with open(source) as fh:
                source = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read robot description: {exc}") from exc
    if not isinstance(source, dict):
        raise ScenarioError("robot description must be a JSON object")
    kind = source.get("type", "planar")
    if kind != "planar":
        raise ScenarioError(f"unknown robot type {kind!r}")
    try:
        chain = KinematicChain(
            link_lengths=tuple(float(l) for l in source["link_lengths"]),
            task_dim=int(source.get("task_dim", 2)),
            redundancy_indices=tuple(source["redundancy_indices"]),
        )
        lim = source["limits"]
        limits = JointLimits(
            q_min=np.asarray(lim["q_min"], dtype=float),
            q_max=np.asarray(lim["q_max"], dtype=float),
            qd_max=np.asarray(lim["qd_max"], dtype=float),
            qdd_max=np.asarray(lim["qdd_max"], dtype=float),
            qddd_max=np.asarray(lim["qddd_max"], dtype=float),
            tau_max=np.asarray(lim["tau_max"], dtype=float),
            taud_max=np.asarray(lim["taud_max"], dtype=float),
        )
        dyn = source["dynamics"]
        dynamics = DynamicParams(
            mass=np.asarray(dyn["mass"], dtype=float),
            com=np.asarray(dyn["com"], dtype=float),
            inertia=np.asarray(dyn["inertia"], dtype=float),
            viscous=np.asarray(dyn["viscous"], dtype=float),
            coulomb=np.asarray(dyn["coulomb"], dtype=float),
            gravity=np.asarray(dyn.get("gravity", [0.0, -9.81]), dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid robot description: {exc}") from exc
    return PlanarArm(chain, limits, dynamics)
