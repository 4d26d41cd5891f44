"""Spatial-vector dynamics algorithms over a :class:`~inertiakit.model.RobotModel`.

Spatial vectors are 6-arrays ordered (angular; linear), Featherstone
convention. The main entry points are

* :func:`rnea` -- inverse dynamics, O(N) recursive Newton-Euler;
* :func:`regressor` -- the condensed regressor mapping the selected bodies'
  inertial parameters to generalized force, computed from one shared
  forward pass with linearly parameterized backward forces (not by finite
  differences);
* :func:`nominal_torque` -- inverse dynamics of the zeroed nominal model;
* :func:`mass_matrix` -- composite-rigid-body algorithm;
* :func:`forward_dynamics` -- solves the equations of motion for the
  acceleration;
* :func:`apply_contacts` -- generalized force of external wrenches.

All functions are pure with respect to their inputs; per-model kinematic
tables are cached in a weak map so repeated calls on the same model object
do not re-derive joint geometry.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import params as par
from .errors import DimensionError, ModelError, SingularMassMatrixError
from .model import WORLD, RobotModel

# ---------------------------------------------------------------------------
# small kernels


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def axis_angle_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    c, s = np.cos(angle), np.sin(angle)
    k = skew(axis)
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


def quat_to_matrix(q) -> np.ndarray:
    """wxyz unit quaternion to the rotation matrix it represents."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_multiply(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_from_rotvec(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    angle = np.linalg.norm(phi)
    if angle < 1e-12:
        return np.array([1.0, 0.5 * phi[0], 0.5 * phi[1], 0.5 * phi[2]])
    axis = phi / angle
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def crm(v) -> np.ndarray:
    """Spatial cross-product operator on motion vectors."""
    w, u = skew(v[:3]), skew(v[3:])
    out = np.zeros((6, 6))
    out[:3, :3] = w
    out[3:, :3] = u
    out[3:, 3:] = w
    return out


def crf(v) -> np.ndarray:
    """Spatial cross-product operator on force vectors (= -crm(v).T)."""
    w, u = skew(v[:3]), skew(v[3:])
    out = np.zeros((6, 6))
    out[:3, :3] = w
    out[:3, 3:] = u
    out[3:, 3:] = w
    return out


@dataclass(frozen=True)
class Transform:
    """Rigid motion transform between frames.

    ``E`` rotates parent-frame coordinates into child-frame coordinates;
    ``r`` is the child origin expressed in the parent frame. Motion vectors
    map child <- parent; forces map parent <- child through the transpose.
    """

    E: np.ndarray
    r: np.ndarray

    @staticmethod
    def identity() -> "Transform":
        return Transform(np.eye(3), np.zeros(3))

    def after(self, inner: "Transform") -> "Transform":
        """Composition self(inner(x)): inner maps A->B, self maps B->C."""
        return Transform(self.E @ inner.E, inner.r + inner.E.T @ self.r)

    def inverse(self) -> "Transform":
        return Transform(self.E.T, -self.E @ self.r)

    def motion(self, v) -> np.ndarray:
        ang = self.E @ v[:3]
        lin = self.E @ (v[3:] - np.cross(self.r, v[:3]))
        return np.concatenate([ang, lin])

    def force_to_parent(self, f) -> np.ndarray:
        """Map a force vector expressed in the child frame into the parent frame."""
        lin = self.E.T @ f[3:]
        ang = self.E.T @ f[:3] + np.cross(self.r, lin)
        return np.concatenate([ang, lin])

    def force_to_parent_cols(self, f_cols: np.ndarray) -> np.ndarray:
        """Same as :meth:`force_to_parent` applied to each column of a 6xK array."""
        lin = self.E.T @ f_cols[3:]
        ang = self.E.T @ f_cols[:3] + skew(self.r) @ lin
        return np.vstack([ang, lin])

    def motion6(self) -> np.ndarray:
        out = np.zeros((6, 6))
        out[:3, :3] = self.E
        out[3:, :3] = -self.E @ skew(self.r)
        out[3:, 3:] = self.E
        return out


# ---------------------------------------------------------------------------
# spatial inertia


@dataclass(frozen=True)
class SpatialInertia:
    """Rigid-body inertia (m, h, I) about the body-frame origin."""

    m: float
    h: np.ndarray
    I: np.ndarray

    def __post_init__(self):
        i = np.asarray(self.I, dtype=float)
        if not np.allclose(i, i.T, atol=1e-12, rtol=0.0):
            raise ModelError("rotational inertia must be symmetric to 1e-12")
        object.__setattr__(self, "h", np.asarray(self.h, dtype=float).reshape(3))
        object.__setattr__(self, "I", i)

    @staticmethod
    def from_params(pi) -> "SpatialInertia":
        pi = np.asarray(pi, dtype=float)
        return SpatialInertia(float(pi[0]), pi[1:4].copy(), par.inertia_matrix(pi))

    def to_params(self) -> np.ndarray:
        out = np.empty(10)
        out[0] = self.m
        out[1:4] = self.h
        out[4:] = par.inertia_components(self.I)
        return out

    def apply(self, v) -> np.ndarray:
        """Momentum I*v of a motion vector."""
        ang = self.I @ v[:3] + np.cross(self.h, v[3:])
        lin = self.m * v[3:] - np.cross(self.h, v[:3])
        return np.concatenate([ang, lin])

    def matrix6(self) -> np.ndarray:
        hx = skew(self.h)
        out = np.zeros((6, 6))
        out[:3, :3] = self.I
        out[:3, 3:] = hx
        out[3:, :3] = hx.T
        out[3:, 3:] = self.m * np.eye(3)
        return out


def _momentum(m: float, h: np.ndarray, inertia: np.ndarray, v: np.ndarray) -> np.ndarray:
    ang = inertia @ v[:3] + np.cross(h, v[3:])
    lin = m * v[3:] - np.cross(h, v[:3])
    return np.concatenate([ang, lin])


def body_regressor(v: np.ndarray, a: np.ndarray) -> np.ndarray:
    """6x10 matrix P(v, a) with P @ pi = I(pi) a + v x* I(pi) v.

    The net spatial force of one body is linear in its ten inertial
    parameters; this is the per-body factor used in the backward pass of the
    condensed regressor.
    """

    def k_of(w):
        wa, u = w[:3], w[3:]
        k = np.zeros((6, 10))
        k[:3, 1:4] = -skew(u)
        k[:3, 4:] = np.array(
            [
                [wa[0], wa[1], wa[2], 0.0, 0.0, 0.0],
                [0.0, wa[0], 0.0, wa[1], wa[2], 0.0],
                [0.0, 0.0, wa[0], 0.0, wa[1], wa[2]],
            ]
        )
        k[3:, 0] = u
        k[3:, 1:4] = skew(wa)
        return k

    return k_of(a) + crf(v) @ k_of(v)


# ---------------------------------------------------------------------------
# robot state


@dataclass(frozen=True)
class RobotState:
    """Generalized configuration, velocity and acceleration."""

    q: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).reshape(-1))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(-1))
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(-1))


def zero_state(model: RobotModel) -> RobotState:
    q = np.zeros(model.n_q)
    for i, joint in enumerate(model.joints):
        if joint.kind == "floating":
            q[model.joint_q_offsets[i]] = 1.0  # identity quaternion, wxyz
    return RobotState(q, np.zeros(model.n_v), np.zeros(model.n_v))


def _check_state(model: RobotModel, state: RobotState) -> None:
    if state.q.shape != (model.n_q,) or state.v.shape != (model.n_v,) or state.a.shape != (
        model.n_v,
    ):
        raise DimensionError(
            f"state dims (q={state.q.shape[0]}, v={state.v.shape[0]}, a={state.a.shape[0]})"
            f" do not match model (n_q={model.n_q}, n_v={model.n_v})"
        )
    for i, joint in enumerate(model.joints):
        if joint.kind == "floating":
            quat = state.q[model.joint_q_offsets[i] : model.joint_q_offsets[i] + 4]
            if abs(np.linalg.norm(quat) - 1.0) > 1e-9:
                raise DimensionError("floating-base quaternion must be unit norm within 1e-9")


@dataclass(frozen=True)
class ContactWrench:
    """External wrench (torque; force) acting on a body.

    ``jacobian_frame`` declares the frame the wrench is expressed in:
    ``"body"`` (about the body-frame origin, body axes) or ``"world"``
    (about the world origin, world axes).
    """

    body: int
    wrench: np.ndarray
    jacobian_frame: str = "body"

    def __post_init__(self):
        object.__setattr__(self, "wrench", np.asarray(self.wrench, dtype=float).reshape(6))


# ---------------------------------------------------------------------------
# cached per-model kinematic tables

_KIN_CACHE: "weakref.WeakKeyDictionary[RobotModel, _Kinematics]" = weakref.WeakKeyDictionary()


@dataclass
class _Kinematics:
    parent: list[int]
    kind: list[str]
    axis: list[np.ndarray | None]
    xtree: list[Transform]
    s: list[np.ndarray]  # (6, d) motion subspace per joint
    q_off: list[int]
    v_off: list[int]
    n_q: int
    n_v: int
    inertias: list[tuple[float, np.ndarray, np.ndarray]] = field(default_factory=list)


def _kinematics(model: RobotModel) -> _Kinematics:
    kin = _KIN_CACHE.get(model)
    if kin is not None:
        return kin
    parent, kinds, axes, xtree, smats = [], [], [], [], []
    for i, body in enumerate(model.bodies):
        joint = model.joints[body.parent_joint]
        parent.append(joint.parent_body)
        kinds.append(joint.kind)
        axes.append(joint.axis)
        xtree.append(Transform(joint.rotation.T, joint.xyz.copy()))
        if joint.kind == "revolute":
            s = np.zeros((6, 1))
            s[:3, 0] = joint.axis
        elif joint.kind == "prismatic":
            s = np.zeros((6, 1))
            s[3:, 0] = joint.axis
        elif joint.kind == "floating":
            s = np.eye(6)
        else:
            s = np.zeros((6, 0))
        smats.append(s)
    inertias = [
        (float(b.nominal_params[0]), b.nominal_params[1:4].copy(), par.inertia_matrix(b.nominal_params))
        for b in model.bodies
    ]
    kin = _Kinematics(
        parent=parent,
        kind=kinds,
        axis=axes,
        xtree=xtree,
        s=smats,
        q_off=list(model.joint_q_offsets),
        v_off=list(model.joint_v_offsets),
        n_q=model.n_q,
        n_v=model.n_v,
        inertias=inertias,
    )
    _KIN_CACHE[model] = kin
    return kin


def _body_inertias(model: RobotModel, kin: _Kinematics, params):
    if params is None:
        return kin.inertias
    pi = np.asarray(params, dtype=float)
    if pi.shape != (10 * len(kin.parent),):
        raise DimensionError(
            f"params override must have length {10 * len(kin.parent)}, got {pi.shape}"
        )
    return [
        (float(pi[10 * i]), pi[10 * i + 1 : 10 * i + 4], par.inertia_matrix(pi[10 * i : 10 * i + 10]))
        for i in range(len(kin.parent))
    ]


def _joint_transform(kind: str, axis, qj) -> Transform:
    if kind == "revolute":
        return Transform(axis_angle_matrix(axis, qj[0]).T, np.zeros(3))
    if kind == "prismatic":
        return Transform(np.eye(3), axis * qj[0])
    if kind == "floating":
        return Transform(quat_to_matrix(qj[:4]).T, qj[4:7].copy())
    return Transform.identity()


def _forward_pass(model: RobotModel, kin: _Kinematics, q, v, a, gravity):
    """Velocities, accelerations (with the gravity trick) and link transforms."""
    nb = len(kin.parent)
    xup: list[Transform] = [None] * nb
    vel = [None] * nb
    acc = [None] * nb
    a0 = np.concatenate([np.zeros(3), -np.asarray(gravity, dtype=float)])
    for i in range(nb):
        d = kin.s[i].shape[1]
        qj = q[kin.q_off[i] : kin.q_off[i] + (7 if kin.kind[i] == "floating" else d)]
        xj = _joint_transform(kin.kind[i], kin.axis[i], qj)
        xup[i] = xj.after(kin.xtree[i])
        if d:
            vj = kin.s[i] @ v[kin.v_off[i] : kin.v_off[i] + d]
            aj = kin.s[i] @ a[kin.v_off[i] : kin.v_off[i] + d]
        else:
            vj = np.zeros(6)
            aj = np.zeros(6)
        p = kin.parent[i]
        if p == WORLD:
            vel[i] = vj
            acc[i] = xup[i].motion(a0) + aj + crm(vel[i]) @ vj
        else:
            vel[i] = xup[i].motion(vel[p]) + vj
            acc[i] = xup[i].motion(acc[p]) + aj + crm(vel[i]) @ vj
    return xup, vel, acc


# ---------------------------------------------------------------------------
# public algorithms


def rnea(model: RobotModel, state: RobotState, params=None) -> np.ndarray:
    """Inverse dynamics: generalized force M(q) a + c(q, v), gravity included.

    ``params`` optionally overrides the stacked inertial parameters without
    rebuilding the model (used by the simulator for time-varying payloads).
    """
    _check_state(model, state)
    kin = _kinematics(model)
    inertias = _body_inertias(model, kin, params)
    xup, vel, acc = _forward_pass(model, kin, state.q, state.v, state.a, model.gravity)
    nb = len(kin.parent)
    f = [None] * nb
    for i in range(nb):
        m, h, inertia = inertias[i]
        f[i] = _momentum(m, h, inertia, acc[i]) + crf(vel[i]) @ _momentum(m, h, inertia, vel[i])
    tau = np.zeros(kin.n_v)
    for i in range(nb - 1, -1, -1):
        d = kin.s[i].shape[1]
        if d:
            tau[kin.v_off[i] : kin.v_off[i] + d] = kin.s[i].T @ f[i]
        p = kin.parent[i]
        if p != WORLD:
            f[p] = f[p] + xup[i].force_to_parent(f[i])
    return tau


def nominal_torque(model_zeroed: RobotModel, state: RobotState, params=None) -> np.ndarray:
    """Generalized force of the nominal (non-estimated) parameters.

    Exactly one RNEA call on the model whose estimated bodies carry zeroed
    parameters (the output of :func:`inertiakit.model.split_params`).
    """
    return rnea(model_zeroed, state, params=params)


def regressor(model: RobotModel, state: RobotState, sel) -> np.ndarray:
    """Condensed regressor Y_est with one column per selected parameter.

    Columns are exact partials of :func:`rnea` with respect to the selected
    bodies' parameters: Y_est @ pi_est + tau_nom == rnea(full model) to
    machine precision. One shared forward pass; per-body 6x10 force blocks
    are propagated to the root through transposed link transforms.
    """
    _check_state(model, state)
    sel.validate(model)
    kin = _kinematics(model)
    xup, vel, acc = _forward_pass(model, kin, state.q, state.v, state.a, model.gravity)
    y = np.zeros((kin.n_v, sel.dim))
    for k, body in enumerate(sel.estimated_bodies):
        cols = slice(10 * k, 10 * (k + 1))
        f_cols = body_regressor(vel[body], acc[body])
        j = body
        while j != WORLD:
            d = kin.s[j].shape[1]
            if d:
                y[kin.v_off[j] : kin.v_off[j] + d, cols] = kin.s[j].T @ f_cols
            f_cols = xup[j].force_to_parent_cols(f_cols)
            j = kin.parent[j]
    return y


def body_transforms(model: RobotModel, q) -> list[Transform]:
    """World-to-body motion transforms X_0^i for every body."""
    kin = _kinematics(model)
    q = np.asarray(q, dtype=float)
    out: list[Transform] = []
    for i in range(len(kin.parent)):
        d = kin.s[i].shape[1]
        qj = q[kin.q_off[i] : kin.q_off[i] + (7 if kin.kind[i] == "floating" else d)]
        xup = _joint_transform(kin.kind[i], kin.axis[i], qj).after(kin.xtree[i])
        p = kin.parent[i]
        out.append(xup if p == WORLD else xup.after(out[p]))
    return out


def body_jacobian(model: RobotModel, q, body: int, frame: str = "body") -> np.ndarray:
    """Geometric Jacobian mapping generalized velocity to the body's spatial velocity."""
    kin = _kinematics(model)
    if not 0 <= body < len(kin.parent):
        raise ModelError(f"body index {body} out of range")
    if frame not in ("body", "world"):
        raise ModelError(f"invalid jacobian frame '{frame}'")
    q = np.asarray(q, dtype=float)
    xforms = body_transforms(model, q)
    jac = np.zeros((6, kin.n_v))
    cur = Transform.identity()  # maps j-frame motion into body-frame motion
    j = body
    while j != WORLD:
        d = kin.s[j].shape[1]
        if d:
            jac[:, kin.v_off[j] : kin.v_off[j] + d] = cur.motion6() @ kin.s[j]
        xup = xforms[j] if kin.parent[j] == WORLD else xforms[j].after(xforms[kin.parent[j]].inverse())
        cur = cur.after(xup)
        j = kin.parent[j]
    if frame == "world":
        jac = xforms[body].inverse().motion6() @ jac
    return jac


def apply_contacts(model: RobotModel, q, contacts) -> np.ndarray:
    """Generalized force sum J_i^T lambda_i over the contact set."""
    kin = _kinematics(model)
    tau = np.zeros(kin.n_v)
    for contact in contacts:
        if not 0 <= contact.body < len(kin.parent):
            raise ModelError(f"contact body index {contact.body} out of range")
        jac = body_jacobian(model, q, contact.body, frame=contact.jacobian_frame)
        tau += jac.T @ contact.wrench
    return tau


def mass_matrix(model: RobotModel, q, params=None) -> np.ndarray:
    """Joint-space mass matrix via the composite-rigid-body algorithm."""
    kin = _kinematics(model)
    q = np.asarray(q, dtype=float)
    if q.shape != (kin.n_q,):
        raise DimensionError(f"q must have length {kin.n_q}, got {q.shape}")
    inertias = _body_inertias(model, kin, params)
    nb = len(kin.parent)
    xup66 = [None] * nb
    for i in range(nb):
        d = kin.s[i].shape[1]
        qj = q[kin.q_off[i] : kin.q_off[i] + (7 if kin.kind[i] == "floating" else d)]
        xup66[i] = _joint_transform(kin.kind[i], kin.axis[i], qj).after(kin.xtree[i]).motion6()
    comp = [SpatialInertia(m, h, inertia).matrix6() for m, h, inertia in inertias]
    h_mat = np.zeros((kin.n_v, kin.n_v))
    for i in range(nb - 1, -1, -1):
        p = kin.parent[i]
        if p != WORLD:
            comp[p] = comp[p] + xup66[i].T @ comp[i] @ xup66[i]
        d = kin.s[i].shape[1]
        if not d:
            continue
        f = comp[i] @ kin.s[i]
        rows = slice(kin.v_off[i], kin.v_off[i] + d)
        h_mat[rows, rows] = kin.s[i].T @ f
        j = i
        while kin.parent[j] != WORLD:
            f = xup66[j].T @ f
            j = kin.parent[j]
            dj = kin.s[j].shape[1]
            if dj:
                cols = slice(kin.v_off[j], kin.v_off[j] + dj)
                block = f.T @ kin.s[j]
                h_mat[rows, cols] = block
                h_mat[cols, rows] = block.T
    return h_mat


def scatter_actuation(model: RobotModel, tau_actuated) -> np.ndarray:
    """S^T tau: place actuated joint torques into generalized coordinates."""
    tau_actuated = np.asarray(tau_actuated, dtype=float).reshape(-1)
    mask = model.actuated_dof_selection
    if tau_actuated.shape != (int(np.count_nonzero(mask)),):
        raise DimensionError(
            f"expected {int(np.count_nonzero(mask))} actuated torques, got {tau_actuated.shape[0]}"
        )
    out = np.zeros(model.n_v)
    out[mask] = tau_actuated
    return out


def forward_dynamics(model: RobotModel, q, v, tau_actuated, contacts=(), params=None) -> np.ndarray:
    """Generalized acceleration a = M^{-1} (S^T tau + sum J^T lambda - c)."""
    bias = rnea(model, RobotState(q, v, np.zeros(model.n_v)), params=params)
    rhs = scatter_actuation(model, tau_actuated) - bias
    if contacts:
        rhs = rhs + apply_contacts(model, q, contacts)
    m_mat = mass_matrix(model, q, params=params)
    try:
        return cho_solve(cho_factor(m_mat), rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMassMatrixError(f"mass matrix is not positive definite: {exc}") from exc


def kinetic_energy(model: RobotModel, q, v, params=None) -> float:
    v = np.asarray(v, dtype=float)
    return 0.5 * float(v @ mass_matrix(model, q, params=params) @ v)


def integrate_semi_implicit(model: RobotModel, q, v, a, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """One semi-implicit Euler step with quaternion renormalization.

    Velocity first (v += a dt), then configuration with the updated velocity;
    floating joints integrate orientation on the quaternion group.
    """
    kin = _kinematics(model)
    v_new = np.asarray(v, dtype=float) + np.asarray(a, dtype=float) * dt
    q_new = np.asarray(q, dtype=float).copy()
    for i in range(len(kin.parent)):
        d = kin.s[i].shape[1]
        if d == 0:
            continue
        qo, vo = kin.q_off[i], kin.v_off[i]
        if kin.kind[i] == "floating":
            quat = q_new[qo : qo + 4]
            omega = v_new[vo : vo + 3]
            vlin = v_new[vo + 3 : vo + 6]
            rot_old = quat_to_matrix(quat)
            quat = quat_multiply(quat, quat_from_rotvec(omega * dt))
            q_new[qo : qo + 4] = quat / np.linalg.norm(quat)
            q_new[qo + 4 : qo + 7] += rot_old @ vlin * dt
        else:
            q_new[qo : qo + d] += v_new[vo : vo + d] * dt
    return q_new, v_new
