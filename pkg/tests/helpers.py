"""Shared test utilities: random chain generation and independent oracles.

The oracles here deliberately avoid the package's spatial-vector code: they
work with plain 4x4 homogeneous transforms built from the raw joint fields,
so they can catch sign and frame errors in the dynamics module.
"""
import numpy as np

from inertiakit import params as par
from inertiakit.model import WORLD, ModelBuilder


def rpy_matrix(rpy):
    r, p, y = rpy
    cr, sr = np.cos(r), np.sin(r)
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


def rodrigues(axis, angle):
    axis = np.asarray(axis, dtype=float)
    k = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def homogeneous(rot, trans):
    out = np.eye(4)
    out[:3, :3] = rot
    out[:3, 3] = trans
    return out


def quat_matrix_wxyz(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def fk_body_poses(model, q):
    """World pose (R, p) of every body frame via homogeneous transforms."""
    poses = []
    for i, body in enumerate(model.bodies):
        joint = model.joints[body.parent_joint]
        qo = model.joint_q_offsets[body.parent_joint]
        t_origin = homogeneous(rpy_matrix(joint.rpy), joint.xyz)
        if joint.kind == "revolute":
            t_joint = homogeneous(rodrigues(joint.axis, q[qo]), np.zeros(3))
        elif joint.kind == "prismatic":
            t_joint = homogeneous(np.eye(3), joint.axis * q[qo])
        elif joint.kind == "floating":
            t_joint = homogeneous(quat_matrix_wxyz(q[qo : qo + 4]), q[qo + 4 : qo + 7])
        else:
            t_joint = np.eye(4)
        local = t_origin @ t_joint
        parent = joint.parent_body
        pose = local if parent == WORLD else poses[parent] @ local
        poses.append(pose)
    return [(pose[:3, :3], pose[:3, 3]) for pose in poses]


def potential_energy(model, q):
    """Sum of -m g . p_com over bodies, from homogeneous-transform kinematics."""
    g = model.gravity
    total = 0.0
    for i, body in enumerate(model.bodies):
        pi = body.nominal_params
        m = pi[0]
        rot, pos = fk_body_poses(model, q)[i]
        # m * com in world = rot @ h + m * pos; avoids dividing by zero mass
        weighted = rot @ pi[1:4] + m * pos
        total -= g @ weighted
    return total


def static_torque_oracle(model, q, step=1e-6):
    """Generalized static holding force as the gradient of potential energy."""
    q = np.asarray(q, dtype=float)
    tau = np.zeros(model.n_v)
    for j in range(model.n_v):
        # only valid for models whose q and v coordinates align (no floating base)
        dp = q.copy()
        dm = q.copy()
        dp[j] += step
        dm[j] -= step
        tau[j] = (potential_energy(model, dp) - potential_energy(model, dm)) / (2 * step)
    return tau


def fd_body_jacobian(model, q, body, step=1e-7):
    """Body-frame spatial Jacobian from finite differences of body poses."""
    q = np.asarray(q, dtype=float)
    n_v = model.n_v
    jac = np.zeros((6, n_v))
    rot0, _ = fk_body_poses(model, q)[body]
    for j in range(n_v):
        dp = q.copy()
        dm = q.copy()
        dp[j] += step
        dm[j] -= step
        rp, pp = fk_body_poses(model, dp)[body]
        rm, pm = fk_body_poses(model, dm)[body]
        drot = (rp - rm) / (2 * step)
        dpos = (pp - pm) / (2 * step)
        omega_hat = rot0.T @ drot
        jac[:3, j] = [omega_hat[2, 1], omega_hat[0, 2], omega_hat[1, 0]]
        jac[3:, j] = rot0.T @ dpos
    return jac


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_chain(rng, n_bodies, base="fixed", allow_fixed_joints=True):
    """Random kinematic chain with fully consistent random inertial parameters."""
    builder = ModelBuilder(f"chain{n_bodies}")
    for i in range(n_bodies):
        pi = par.theta_to_pi(rng.uniform(-1.0, 1.0, size=10))
        mass, com, i_com = par.com_form(pi)
        builder.add_link(f"link{i}", mass=mass, com=com, inertia_com=i_com)
    for i in range(n_bodies):
        parent = "world" if i == 0 else f"link{i - 1}"
        if i == 0 and base == "floating":
            kind = "floating"
        else:
            draw = rng.random()
            if allow_fixed_joints and i > 0 and draw < 0.1:
                kind = "fixed"
            elif draw < 0.35:
                kind = "prismatic"
            else:
                kind = "revolute"
        builder.add_joint(
            f"j{i}",
            kind,
            parent,
            f"link{i}",
            axis=random_unit(rng) if kind in ("revolute", "prismatic") else None,
            xyz=rng.uniform(-0.4, 0.4, size=3),
            rpy=rng.uniform(-np.pi, np.pi, size=3),
        )
    return builder.build()


def random_state(rng, model, scale=1.0):
    from inertiakit.dynamics import RobotState

    q = np.zeros(model.n_q)
    for i, joint in enumerate(model.joints):
        qo = model.joint_q_offsets[i]
        if joint.kind == "floating":
            quat = rng.normal(size=4)
            q[qo : qo + 4] = quat / np.linalg.norm(quat)
            q[qo + 4 : qo + 7] = rng.uniform(-1.0, 1.0, size=3)
        elif joint.kind == "revolute":
            q[qo] = rng.uniform(-np.pi, np.pi)
        elif joint.kind == "prismatic":
            q[qo] = rng.uniform(-0.5, 0.5)
    v = scale * rng.normal(size=model.n_v)
    a = scale * rng.normal(size=model.n_v)
    return RobotState(q, v, a)


def pendulum_about(axis, com_x=0.5, mass=1.0):
    """Point-mass pendulum: one revolute joint at the origin about the given axis."""
    builder = ModelBuilder("pendulum")
    builder.add_link("bob", mass=mass, com=(com_x, 0.0, 0.0), inertia_com=np.zeros((3, 3)))
    builder.add_joint("hinge", "revolute", "world", "bob", axis=axis)
    return builder.build()


def zaxis_rotor(izz=3.0):
    """1-dof revolute about gravity-aligned z with diagonal inertia, h = 0."""
    builder = ModelBuilder("rotor")
    builder.add_link("disk", mass=1.0, com=(0, 0, 0), inertia_com=np.diag([2.0, 2.0, izz]))
    builder.add_joint("spin", "revolute", "world", "disk", axis=(0, 0, 1))
    return builder.build()
