"""Kinematic tree data model, URDF-subset parsing and parameter bookkeeping.

A :class:`RobotModel` is an immutable, topologically sorted tree of rigid
bodies. Every body has exactly one parent joint; ``joints[i]`` is the parent
joint of ``bodies[i]``. The base joint (``joints[0]``) connects the first body
to the world and may be of any supported kind: a fixed base is a ``fixed``
weld, a floating base a 6-dof ``floating`` joint.

Inertial parameters are stored per body as the 10-vector of :mod:`.params`,
with the rotational inertia about the body-frame origin (URDF declares it at
the COM; the parallel-axis shift happens at parse time).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from xml.etree import ElementTree

import numpy as np

from . import params as par
from .errors import ModelError, ModelWarning

JOINT_KINDS = ("revolute", "prismatic", "fixed", "floating")
_JOINT_DOFS = {"revolute": (1, 1), "prismatic": (1, 1), "fixed": (0, 0), "floating": (7, 6)}
_IGNORED_LINK_ELEMENTS = ("visual", "collision")
_IGNORED_ROBOT_ELEMENTS = ("transmission", "gazebo", "material")
_AXIS_TOL = 1e-9

WORLD = -1  # parent_body index of the base joint


def _vec3(value, name: str) -> np.ndarray:
    v = np.asarray(value, dtype=float).reshape(-1)
    if v.shape != (3,):
        raise ModelError(f"{name} must be a 3-vector, got shape {v.shape}")
    return v


def rpy_to_matrix(rpy) -> np.ndarray:
    """URDF fixed-axis roll/pitch/yaw to a rotation matrix (Rz @ Ry @ Rx)."""
    r, p, y = np.asarray(rpy, dtype=float)
    cr, sr = np.cos(r), np.sin(r)
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class JointDef:
    """One joint: kind, axis and the fixed transform from the parent body frame.

    ``xyz``/``rpy`` are the joint origin in the parent body frame (URDF
    convention); ``rotation`` is the derived matrix mapping joint-frame
    coordinates into parent-frame coordinates.
    """

    name: str
    kind: str
    parent_body: int
    axis: np.ndarray | None = None
    xyz: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rpy: np.ndarray = field(default_factory=lambda: np.zeros(3))
    limits: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in JOINT_KINDS:
            raise ModelError(f"joint '{self.name}': unsupported joint type '{self.kind}'")
        object.__setattr__(self, "xyz", _freeze(_vec3(self.xyz, f"joint '{self.name}' origin xyz")))
        object.__setattr__(self, "rpy", _freeze(_vec3(self.rpy, f"joint '{self.name}' origin rpy")))
        if self.kind in ("revolute", "prismatic"):
            if self.axis is None:
                raise ModelError(f"joint '{self.name}': {self.kind} joint requires an axis")
            axis = _vec3(self.axis, f"joint '{self.name}' axis")
            norm = np.linalg.norm(axis)
            if abs(norm - 1.0) > _AXIS_TOL:
                raise ModelError(
                    f"joint '{self.name}': axis must have unit norm within {_AXIS_TOL:g}"
                    f" (got |axis| = {norm:.12g})"
                )
            object.__setattr__(self, "axis", _freeze(axis / norm))
        elif self.axis is not None:
            object.__setattr__(self, "axis", None)

    @property
    def rotation(self) -> np.ndarray:
        return rpy_to_matrix(self.rpy)

    @property
    def n_q(self) -> int:
        return _JOINT_DOFS[self.kind][0]

    @property
    def n_v(self) -> int:
        return _JOINT_DOFS[self.kind][1]


@dataclass(frozen=True)
class RigidBodyDef:
    """One rigid body with its nominal inertial parameters."""

    name: str
    parent_joint: int
    nominal_params: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.nominal_params, dtype=float).reshape(-1)
        if pi.shape != (par.PARAMS_PER_BODY,):
            raise ModelError(f"body '{self.name}': nominal_params must be a 10-vector")
        object.__setattr__(self, "nominal_params", _freeze(pi))


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Immutable kinematic tree, safe to share across concurrent readers."""

    name: str
    bodies: tuple[RigidBodyDef, ...]
    joints: tuple[JointDef, ...]
    base_type: str
    gravity: np.ndarray
    joint_q_offsets: tuple[int, ...]
    joint_v_offsets: tuple[int, ...]
    n_q: int
    n_v: int
    actuated_dof_selection: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gravity", _freeze(_vec3(self.gravity, "gravity")))
        mask = np.asarray(self.actuated_dof_selection, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "actuated_dof_selection", mask)

    @property
    def n_bodies(self) -> int:
        return len(self.bodies)

    @property
    def n_u(self) -> int:
        return int(np.count_nonzero(self.actuated_dof_selection))

    def body_index(self, name: str) -> int:
        for i, body in enumerate(self.bodies):
            if body.name == name:
                return i
        raise ModelError(f"no body named '{name}'")

    def parent_body(self, body: int) -> int:
        return self.joints[self.bodies[body].parent_joint].parent_body

    def joint_of(self, body: int) -> JointDef:
        return self.joints[self.bodies[body].parent_joint]

    def q_slice(self, body: int) -> slice:
        j = self.bodies[body].parent_joint
        return slice(self.joint_q_offsets[j], self.joint_q_offsets[j] + self.joints[j].n_q)

    def v_slice(self, body: int) -> slice:
        j = self.bodies[body].parent_joint
        return slice(self.joint_v_offsets[j], self.joint_v_offsets[j] + self.joints[j].n_v)

    def with_body_params(self, body: int, pi) -> "RobotModel":
        """Copy of the model with one body's nominal parameters replaced."""
        if not 0 <= body < self.n_bodies:
            raise ModelError(f"body index {body} out of range")
        bodies = list(self.bodies)
        bodies[body] = replace(bodies[body], nominal_params=np.asarray(pi, dtype=float))
        return replace(self, bodies=tuple(bodies))

    def with_gravity(self, gravity) -> "RobotModel":
        return replace(self, gravity=np.asarray(gravity, dtype=float))


@dataclass(frozen=True)
class EstimationSelection:
    """Ordered body indices whose stacked parameters form the estimated subset."""

    estimated_bodies: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "estimated_bodies", tuple(int(i) for i in self.estimated_bodies))
        if len(set(self.estimated_bodies)) != len(self.estimated_bodies):
            raise ModelError("estimated body indices must be duplicate-free")

    @property
    def dim(self) -> int:
        return par.PARAMS_PER_BODY * len(self.estimated_bodies)

    def validate(self, model: RobotModel) -> None:
        for i in self.estimated_bodies:
            if not 0 <= i < model.n_bodies:
                raise ModelError(f"estimated body index {i} out of range for model")
            if not np.any(model.bodies[i].nominal_params):
                raise ModelError(
                    f"body '{model.bodies[i].name}' has all-zero inertial parameters"
                    " (no <inertial> declared) and cannot be selected for estimation"
                )


def selection_by_names(model: RobotModel, names) -> EstimationSelection:
    sel = EstimationSelection(tuple(model.body_index(n) for n in names))
    sel.validate(model)
    return sel


# ---------------------------------------------------------------------------
# assembly shared by the parser and the programmatic builder


def _assemble_model(name, links, joints, gravity) -> RobotModel:
    link_names = [l["name"] for l in links]
    if len(set(link_names)) != len(link_names):
        raise ModelError("duplicate link names in model")
    joint_names = [j["name"] for j in joints]
    if len(set(joint_names)) != len(joint_names):
        raise ModelError("duplicate joint names in model")

    link_by_name = {l["name"]: l for l in links}
    children: dict[str, list[dict]] = {n: [] for n in link_names}
    parent_joint_of: dict[str, dict] = {}
    for j in joints:
        for key in ("parent", "child"):
            if j[key] != "world" and j[key] not in link_by_name:
                raise ModelError(f"joint '{j['name']}' references unknown link '{j[key]}'")
        if j["child"] == "world":
            raise ModelError(f"joint '{j['name']}': 'world' cannot be a child link")
        if j["child"] in parent_joint_of:
            raise ModelError(
                f"link '{j['child']}' has more than one parent joint (kinematic loop)"
            )
        parent_joint_of[j["child"]] = j
        children.setdefault(j["parent"], []).append(j)

    # the world frame may appear either implicitly (a root link with no parent
    # joint) or explicitly (a massless link named "world", or joints whose
    # parent is the name "world")
    explicit_world = "world" in link_by_name
    if explicit_world and link_by_name["world"].get("has_inertial"):
        warnings.warn("inertial block on the 'world' link is ignored", ModelWarning, stacklevel=3)
    world_joints = children.get("world", [])

    roots = [
        n for n in link_names if n != "world" and n not in parent_joint_of
    ]
    if world_joints:
        if len(world_joints) != 1:
            raise ModelError("exactly one joint may connect the tree to 'world'")
        base_joint_raw = world_joints[0]
        base_link = base_joint_raw["child"]
        if roots:
            raise ModelError(f"disconnected links without a path to the base: {roots}")
    else:
        if explicit_world:
            raise ModelError("a 'world' link is declared but no joint attaches the tree to it")
        if not roots:
            raise ModelError("no root link: the joint graph contains a kinematic loop")
        if len(roots) > 1:
            raise ModelError(f"multiple root links (disconnected tree): {roots}")
        base_link = roots[0]
        base_joint_raw = {
            "name": f"{base_link}_weld",
            "kind": "fixed",
            "parent": "world",
            "child": base_link,
            "xyz": np.zeros(3),
            "rpy": np.zeros(3),
            "axis": None,
            "limits": None,
        }

    # depth-first walk in declaration order gives a topological body ordering
    order: list[str] = []
    joint_for: list[dict] = []
    stack = [(base_link, base_joint_raw)]
    while stack:
        link, joint_raw = stack.pop()
        order.append(link)
        joint_for.append(joint_raw)
        for child_joint in reversed(children.get(link, [])):
            stack.append((child_joint["child"], child_joint))
    missing = [n for n in link_names if n != "world" and n not in order]
    if missing:
        raise ModelError(f"links unreachable from the base (loop or disconnect): {missing}")

    body_index = {n: i for i, n in enumerate(order)}
    body_defs = []
    joint_defs = []
    for i, link_name in enumerate(order):
        raw = link_by_name[link_name]
        joint_raw = joint_for[i]
        parent = WORLD if joint_raw["parent"] == "world" else body_index[joint_raw["parent"]]
        joint_defs.append(
            JointDef(
                name=joint_raw["name"],
                kind=joint_raw["kind"],
                parent_body=parent,
                axis=joint_raw["axis"],
                xyz=joint_raw["xyz"],
                rpy=joint_raw["rpy"],
                limits=joint_raw["limits"],
            )
        )
        mass = float(raw.get("mass", 0.0))
        if mass < 0.0:
            raise ModelError(f"link '{link_name}': negative mass {mass:g}")
        pi = par.params_from_com_form(mass, raw.get("com", np.zeros(3)), raw.get("inertia_com", np.zeros((3, 3))))
        body_defs.append(RigidBodyDef(name=link_name, parent_joint=i, nominal_params=pi))
        if np.any(pi):
            report = par.is_fully_consistent(pi)
            if not report:
                warnings.warn(
                    f"link '{link_name}': nominal parameters are not fully physically"
                    f" consistent ({report.describe()})",
                    ModelWarning,
                    stacklevel=3,
                )
        elif raw.get("has_inertial", False) is False:
            warnings.warn(
                f"link '{link_name}': no <inertial> declared, using all-zero parameters",
                ModelWarning,
                stacklevel=3,
            )

    q_offsets, v_offsets = [], []
    n_q = n_v = 0
    actuated = []
    for jd in joint_defs:
        q_offsets.append(n_q)
        v_offsets.append(n_v)
        n_q += jd.n_q
        n_v += jd.n_v
        actuated.extend([jd.kind in ("revolute", "prismatic")] * jd.n_v)

    return RobotModel(
        name=name,
        bodies=tuple(body_defs),
        joints=tuple(joint_defs),
        base_type="floating" if joint_defs[0].kind == "floating" else "fixed",
        gravity=np.asarray(gravity, dtype=float),
        joint_q_offsets=tuple(q_offsets),
        joint_v_offsets=tuple(v_offsets),
        n_q=n_q,
        n_v=n_v,
        actuated_dof_selection=np.array(actuated, dtype=bool),
    )


# ---------------------------------------------------------------------------
# URDF subset parser

DEFAULT_GRAVITY = (0.0, 0.0, -9.81)


def _parse_floats(text: str, n: int, what: str) -> np.ndarray:
    try:
        vals = np.array([float(x) for x in text.split()], dtype=float)
    except ValueError as exc:
        raise ModelError(f"{what}: cannot parse '{text}'") from exc
    if vals.shape != (n,):
        raise ModelError(f"{what}: expected {n} numbers, got '{text}'")
    return vals


def _parse_origin(elem) -> tuple[np.ndarray, np.ndarray]:
    origin = elem.find("origin")
    if origin is None:
        return np.zeros(3), np.zeros(3)
    xyz = _parse_floats(origin.get("xyz", "0 0 0"), 3, "origin xyz")
    rpy = _parse_floats(origin.get("rpy", "0 0 0"), 3, "origin rpy")
    return xyz, rpy


def parse_urdf(text: str, gravity=DEFAULT_GRAVITY) -> RobotModel:
    """Parse a URDF-subset document into a :class:`RobotModel`.

    Supported: link <inertial> blocks and revolute/continuous/prismatic/
    fixed/floating joints with origin and axis. Visuals, collisions, mimics
    and transmissions are ignored with a warning. ``continuous`` is treated
    as ``revolute``; any other joint type is rejected.
    """
    try:
        root = ElementTree.fromstring(text)
    except ElementTree.ParseError as exc:
        raise ModelError(f"malformed XML: {exc}") from exc
    if root.tag != "robot":
        raise ModelError(f"expected <robot> document, got <{root.tag}>")

    ignored: set[str] = set()
    links = []
    for link in root.findall("link"):
        name = link.get("name")
        if name is None:
            raise ModelError("link without a name attribute")
        for kind in _IGNORED_LINK_ELEMENTS:
            if link.find(kind) is not None:
                ignored.add(kind)
        inertial = link.find("inertial")
        entry = {"name": name, "has_inertial": inertial is not None}
        if inertial is not None:
            com, rpy = _parse_origin(inertial)
            mass_elem = inertial.find("mass")
            mass = float(mass_elem.get("value")) if mass_elem is not None else 0.0
            inertia_elem = inertial.find("inertia")
            if inertia_elem is not None:
                comp = [
                    float(inertia_elem.get(k, "0"))
                    for k in ("ixx", "ixy", "ixz", "iyy", "iyz", "izz")
                ]
            else:
                comp = [0.0] * 6
            i_local = np.array(
                [
                    [comp[0], comp[1], comp[2]],
                    [comp[1], comp[3], comp[4]],
                    [comp[2], comp[4], comp[5]],
                ]
            )
            rot = rpy_to_matrix(rpy)
            entry.update(mass=mass, com=com, inertia_com=rot @ i_local @ rot.T)
        links.append(entry)

    joints = []
    for joint in root.findall("joint"):
        name = joint.get("name")
        kind = joint.get("type")
        if name is None or kind is None:
            raise ModelError("joint without a name or type attribute")
        if kind == "continuous":
            kind = "revolute"
        if kind not in JOINT_KINDS:
            raise ModelError(f"joint '{name}': unsupported joint type '{joint.get('type')}'")
        if joint.find("mimic") is not None:
            ignored.add("mimic")
        parent = joint.find("parent")
        child = joint.find("child")
        if parent is None or child is None:
            raise ModelError(f"joint '{name}': missing parent or child link")
        xyz, rpy = _parse_origin(joint)
        axis_elem = joint.find("axis")
        axis = (
            _parse_floats(axis_elem.get("xyz", "1 0 0"), 3, f"joint '{name}' axis")
            if axis_elem is not None
            else (np.array([1.0, 0.0, 0.0]) if kind in ("revolute", "prismatic") else None)
        )
        limit_elem = joint.find("limit")
        limits = None
        if limit_elem is not None and limit_elem.get("lower") is not None:
            limits = (float(limit_elem.get("lower")), float(limit_elem.get("upper")))
        joints.append(
            {
                "name": name,
                "kind": kind,
                "parent": parent.get("link"),
                "child": child.get("link"),
                "xyz": xyz,
                "rpy": rpy,
                "axis": axis if kind in ("revolute", "prismatic") else None,
                "limits": limits,
            }
        )

    for kind in _IGNORED_ROBOT_ELEMENTS:
        if root.find(kind) is not None:
            ignored.add(kind)
    if ignored:
        warnings.warn(
            f"ignored URDF elements outside the supported subset: {sorted(ignored)}",
            ModelWarning,
            stacklevel=2,
        )
    return _assemble_model(root.get("name", "robot"), links, joints, gravity)


def _fmt(x: float) -> str:
    return repr(float(x))


def model_to_urdf(model: RobotModel) -> str:
    """Serialize back to the URDF subset; numeric fields survive a round trip."""
    lines = [f'<robot name="{model.name}">']
    base = model.joints[0]
    trivial_weld = (
        base.kind == "fixed" and not np.any(base.xyz) and not np.any(base.rpy)
    )
    if not trivial_weld:
        lines.append('  <link name="world"/>')
    for i, body in enumerate(model.bodies):
        lines.append(f'  <link name="{body.name}">')
        pi = body.nominal_params
        if np.any(pi):
            mass, com, i_com = par.com_form(pi)
            c = par.inertia_components(i_com)
            lines.append("    <inertial>")
            lines.append(
                f'      <origin xyz="{_fmt(com[0])} {_fmt(com[1])} {_fmt(com[2])}" rpy="0 0 0"/>'
            )
            lines.append(f'      <mass value="{_fmt(mass)}"/>')
            lines.append(
                f'      <inertia ixx="{_fmt(c[0])}" ixy="{_fmt(c[1])}" ixz="{_fmt(c[2])}"'
                f' iyy="{_fmt(c[3])}" iyz="{_fmt(c[4])}" izz="{_fmt(c[5])}"/>'
            )
            lines.append("    </inertial>")
        lines.append("  </link>")
    for i, joint in enumerate(model.joints):
        if i == 0 and trivial_weld:
            continue
        parent = "world" if joint.parent_body == WORLD else model.bodies[joint.parent_body].name
        child = model.bodies[i].name
        lines.append(f'  <joint name="{joint.name}" type="{joint.kind}">')
        lines.append(
            f'    <origin xyz="{_fmt(joint.xyz[0])} {_fmt(joint.xyz[1])} {_fmt(joint.xyz[2])}"'
            f' rpy="{_fmt(joint.rpy[0])} {_fmt(joint.rpy[1])} {_fmt(joint.rpy[2])}"/>'
        )
        lines.append(f'    <parent link="{parent}"/>')
        lines.append(f'    <child link="{child}"/>')
        if joint.axis is not None:
            lines.append(
                f'    <axis xyz="{_fmt(joint.axis[0])} {_fmt(joint.axis[1])} {_fmt(joint.axis[2])}"/>'
            )
        if joint.limits is not None:
            lines.append(
                f'    <limit lower="{_fmt(joint.limits[0])}" upper="{_fmt(joint.limits[1])}"'
                ' effort="0" velocity="0"/>'
            )
        lines.append("  </joint>")
    lines.append("</robot>")
    return "\n".join(lines) + "\n"


class ModelBuilder:
    """Programmatic twin of the parser; accepts the same fields link-for-link."""

    def __init__(self, name: str = "robot", gravity=DEFAULT_GRAVITY):
        self.name = name
        self.gravity = gravity
        self._links: list[dict] = []
        self._joints: list[dict] = []

    def add_link(self, name, mass=0.0, com=(0.0, 0.0, 0.0), inertia_com=None, has_inertial=None):
        """Declare a link; inertia_com is the 3x3 (or 6-component) inertia at the COM."""
        if inertia_com is None:
            inertia = np.zeros((3, 3))
        else:
            inertia = np.asarray(inertia_com, dtype=float)
            if inertia.shape == (6,):
                c = inertia
                inertia = np.array(
                    [[c[0], c[1], c[2]], [c[1], c[3], c[4]], [c[2], c[4], c[5]]]
                )
        declared = has_inertial if has_inertial is not None else bool(
            mass or np.any(inertia) or np.any(np.asarray(com, dtype=float))
        )
        self._links.append(
            {
                "name": name,
                "mass": float(mass),
                "com": np.asarray(com, dtype=float),
                "inertia_com": inertia,
                "has_inertial": declared,
            }
        )
        return self

    def add_joint(self, name, kind, parent, child, axis=None, xyz=(0, 0, 0), rpy=(0, 0, 0), limits=None):
        if kind == "continuous":
            kind = "revolute"
        self._joints.append(
            {
                "name": name,
                "kind": kind,
                "parent": parent,
                "child": child,
                "axis": None if axis is None else np.asarray(axis, dtype=float),
                "xyz": np.asarray(xyz, dtype=float),
                "rpy": np.asarray(rpy, dtype=float),
                "limits": limits,
            }
        )
        return self

    def build(self) -> RobotModel:
        return _assemble_model(self.name, self._links, self._joints, self.gravity)


# ---------------------------------------------------------------------------
# parameter stacking and the estimate/nominal split


def stack_params(model: RobotModel) -> np.ndarray:
    """Concatenated per-body parameter vectors, body order, 10 entries each."""
    if model.n_bodies == 0:
        return np.zeros(0)
    return np.concatenate([b.nominal_params for b in model.bodies])


def scatter_params(sel: EstimationSelection, pi_est, n_bodies: int) -> np.ndarray:
    """Estimated sub-vector placed into a full-length stacked vector of zeros."""
    pi_est = np.asarray(pi_est, dtype=float).reshape(-1)
    if pi_est.shape != (sel.dim,):
        raise ModelError(f"pi_est must have length {sel.dim}, got {pi_est.shape}")
    out = np.zeros(par.PARAMS_PER_BODY * n_bodies)
    for k, body in enumerate(sel.estimated_bodies):
        out[par.PARAMS_PER_BODY * body : par.PARAMS_PER_BODY * (body + 1)] = pi_est[
            par.PARAMS_PER_BODY * k : par.PARAMS_PER_BODY * (k + 1)
        ]
    return out


def split_params(model: RobotModel, sel: EstimationSelection) -> tuple[np.ndarray, RobotModel]:
    """Stacked parameters of the selected bodies and the zeroed nominal model.

    A single inverse-dynamics pass on the returned model yields the nominal
    torque of everything *not* being estimated.
    """
    sel.validate(model)
    pieces = [model.bodies[i].nominal_params for i in sel.estimated_bodies]
    pi_est = np.concatenate(pieces) if pieces else np.zeros(0)
    zeroed = model
    for i in sel.estimated_bodies:
        zeroed = zeroed.with_body_params(i, np.zeros(par.PARAMS_PER_BODY))
    return pi_est, zeroed
