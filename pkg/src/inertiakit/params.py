"""Inertial parameterizations of a rigid body.

Two charts are used throughout the package:

* the Euclidean 10-vector ``pi = [m, hx, hy, hz, Ixx, Ixy, Ixz, Iyy, Iyz, Izz]``
  with mass m (kg), first moment of mass h = m*com (kg*m) and the rotational
  inertia expressed about the *body-frame origin* (kg*m^2). Any real vector is
  representable here, including physically impossible ones; and
* the log-Cholesky 10-vector ``theta = [alpha, d1, d2, d3, s12, s13, s23,
  t1, t2, t3]`` built from the Cholesky factor of the pseudo-inertia matrix.
  Every real theta maps to a fully physically consistent body, which is what
  makes it usable inside an unconstrained filter.

``theta_to_pi`` / ``pi_to_theta`` implement the chart map and its inverse,
``g_jacobian`` its closed-form 10x10 Jacobian.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChartOverflowError, InconsistentParametersError

PARAMS_PER_BODY = 10
PARAM_LABELS = ("m", "hx", "hy", "hz", "Ixx", "Ixy", "Ixz", "Iyy", "Iyz", "Izz")
THETA_LABELS = ("alpha", "d1", "d2", "d3", "s12", "s13", "s23", "t1", "t2", "t3")

# exp(2*300) is representable in float64 but products of two such factors are
# not; reject the chart region where silent infinities could appear.
EXP_ARG_LIMIT = 300.0

DEFAULT_CONSISTENCY_TOL = 1e-10


def _as_pi(pi) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (PARAMS_PER_BODY,):
        raise ValueError(f"expected a 10-vector of inertial parameters, got shape {pi.shape}")
    return pi


def inertia_matrix(pi) -> np.ndarray:
    """Symmetric 3x3 rotational inertia about the body-frame origin."""
    pi = _as_pi(pi)
    ixx, ixy, ixz, iyy, iyz, izz = pi[4:]
    return np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])


def inertia_components(inertia: np.ndarray) -> np.ndarray:
    """Unique entries [Ixx, Ixy, Ixz, Iyy, Iyz, Izz] of a symmetric 3x3 matrix."""
    inertia = np.asarray(inertia, dtype=float)
    if inertia.shape != (3, 3):
        raise ValueError(f"expected 3x3 inertia, got {inertia.shape}")
    if not np.allclose(inertia, inertia.T, atol=1e-12, rtol=0.0):
        raise ValueError("inertia matrix must be symmetric to 1e-12")
    i = inertia
    return np.array([i[0, 0], i[0, 1], i[0, 2], i[1, 1], i[1, 2], i[2, 2]])


def params_from_com_form(mass: float, com, inertia_com) -> np.ndarray:
    """Assemble pi from mass, COM offset and inertia about the COM.

    The stored inertia is shifted to the body-frame origin via the parallel
    axis theorem; h = mass * com.
    """
    com = np.asarray(com, dtype=float).reshape(3)
    i_com = np.asarray(inertia_com, dtype=float).reshape(3, 3)
    shift = mass * (np.dot(com, com) * np.eye(3) - np.outer(com, com))
    pi = np.empty(PARAMS_PER_BODY)
    pi[0] = mass
    pi[1:4] = mass * com
    pi[4:] = inertia_components(i_com + shift)
    return pi


def com_form(pi) -> tuple[float, np.ndarray, np.ndarray]:
    """Inverse of :func:`params_from_com_form`: (mass, com, inertia about COM).

    For a zero-mass body the COM is reported at the origin and the inertia is
    returned unshifted; a zero-mass body with nonzero h has no COM form.
    """
    pi = _as_pi(pi)
    m = pi[0]
    h = pi[1:4]
    i_origin = inertia_matrix(pi)
    if m == 0.0:
        if np.any(h != 0.0):
            raise InconsistentParametersError(
                "zero mass with nonzero first moment has no (mass, com, inertia) form"
            )
        return 0.0, np.zeros(3), i_origin
    com = h / m
    shift = m * (np.dot(com, com) * np.eye(3) - np.outer(com, com))
    return float(m), com, i_origin - shift


def pseudo_inertia(pi) -> np.ndarray:
    """Symmetric 4x4 pseudo-inertia [[tr(I)/2*eye - I, h], [h^T, m]].

    Positive definiteness of this matrix characterizes full physical
    consistency (density realizability) of the body.
    """
    pi = _as_pi(pi)
    i_origin = inertia_matrix(pi)
    sigma = 0.5 * np.trace(i_origin) * np.eye(3) - i_origin
    j = np.empty((4, 4))
    j[:3, :3] = sigma
    j[:3, 3] = pi[1:4]
    j[3, :3] = pi[1:4]
    j[3, 3] = pi[0]
    return j


def theta_to_pi(theta) -> np.ndarray:
    """Map log-Cholesky coordinates to inertial parameters (the chart map).

    Total on R^10 apart from coordinates so large that exp overflows float64,
    which raise :class:`ChartOverflowError` instead of returning infinities.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (PARAMS_PER_BODY,):
        raise ValueError(f"expected a 10-vector of chart coordinates, got shape {theta.shape}")
    alpha, d1, d2, d3, s12, s13, s23, t1, t2, t3 = theta
    if max(abs(alpha), abs(d1), abs(d2), abs(d3)) > EXP_ARG_LIMIT:
        raise ChartOverflowError(
            f"|alpha| and |d| must be <= {EXP_ARG_LIMIT:g} to avoid float64 overflow"
        )
    with np.errstate(over="ignore"):
        e2a = np.exp(2.0 * alpha)
        ed1, ed2, ed3 = np.exp(d1), np.exp(d2), np.exp(d3)
        pi = e2a * np.array(
            [
                t1 * t1 + t2 * t2 + t3 * t3 + 1.0,
                t1 * ed1,
                t1 * s12 + t2 * ed2,
                t1 * s13 + t2 * s23 + t3 * ed3,
                s12 * s12 + s13 * s13 + s23 * s23 + ed2 * ed2 + ed3 * ed3,
                -s12 * ed1,
                -s13 * ed1,
                s13 * s13 + s23 * s23 + ed1 * ed1 + ed3 * ed3,
                -s12 * s13 - s23 * ed2,
                s12 * s12 + ed1 * ed1 + ed2 * ed2,
            ]
        )
    if not np.all(np.isfinite(pi)):
        raise ChartOverflowError("chart coordinates overflow float64 in combination")
    return pi


def pi_to_theta(pi) -> np.ndarray:
    """Invert the chart map on the strictly consistent set.

    Factors the pseudo-inertia as R^T R with R upper triangular and positive
    on the diagonal, then reads the coordinates off R. Raises
    :class:`InconsistentParametersError` outside the domain.
    """
    pi = _as_pi(pi)
    if not np.all(np.isfinite(pi)):
        raise InconsistentParametersError("inertial parameters must be finite")
    if pi[0] <= 0.0:
        raise InconsistentParametersError(f"mass must be positive, got {pi[0]:g}")
    j = pseudo_inertia(pi)
    try:
        lower = np.linalg.cholesky(j)
    except np.linalg.LinAlgError as exc:
        raise InconsistentParametersError(
            "pseudo-inertia is not positive definite; parameters are not fully consistent"
        ) from exc
    r = lower.T  # J = R^T R, R upper triangular with positive diagonal
    scale = r[3, 3]
    u = r / scale
    theta = np.empty(PARAMS_PER_BODY)
    theta[0] = np.log(scale)
    theta[1:4] = np.log(np.diagonal(u)[:3])
    theta[4] = u[0, 1]
    theta[5] = u[0, 2]
    theta[6] = u[1, 2]
    theta[7:] = u[:3, 3]
    return theta


def g_jacobian(theta) -> np.ndarray:
    """Closed-form 10x10 Jacobian of :func:`theta_to_pi`."""
    theta = np.asarray(theta, dtype=float)
    pi = theta_to_pi(theta)  # validates and raises on overflow
    _, d1, d2, d3, s12, s13, s23, t1, t2, t3 = theta
    e2a = np.exp(2.0 * theta[0])
    ed1, ed2, ed3 = np.exp(d1), np.exp(d2), np.exp(d3)
    g = np.zeros((PARAMS_PER_BODY, PARAMS_PER_BODY))
    # d pi / d alpha = 2 pi (every entry carries the common e^{2 alpha} factor)
    g[:, 0] = 2.0 * pi
    # remaining columns: e^{2 alpha} * d u / d theta_j, rows in pi order
    g[0, 7] = 2.0 * t1
    g[0, 8] = 2.0 * t2
    g[0, 9] = 2.0 * t3
    g[1, 1] = t1 * ed1
    g[1, 7] = ed1
    g[2, 2] = t2 * ed2
    g[2, 4] = t1
    g[2, 7] = s12
    g[2, 8] = ed2
    g[3, 3] = t3 * ed3
    g[3, 5] = t1
    g[3, 6] = t2
    g[3, 7] = s13
    g[3, 8] = s23
    g[3, 9] = ed3
    g[4, 2] = 2.0 * ed2 * ed2
    g[4, 3] = 2.0 * ed3 * ed3
    g[4, 4] = 2.0 * s12
    g[4, 5] = 2.0 * s13
    g[4, 6] = 2.0 * s23
    g[5, 1] = -s12 * ed1
    g[5, 4] = -ed1
    g[6, 1] = -s13 * ed1
    g[6, 5] = -ed1
    g[7, 1] = 2.0 * ed1 * ed1
    g[7, 3] = 2.0 * ed3 * ed3
    g[7, 5] = 2.0 * s13
    g[7, 6] = 2.0 * s23
    g[8, 2] = -s23 * ed2
    g[8, 4] = -s13
    g[8, 5] = -s12
    g[8, 6] = -ed2
    g[9, 1] = 2.0 * ed1 * ed1
    g[9, 2] = 2.0 * ed2 * ed2
    g[9, 4] = 2.0 * s12
    rest = np.s_[1:]
    g[:, rest] *= e2a
    return g


@dataclass(frozen=True)
class ConsistencyReport:
    """Verdict of the full-physical-consistency check with diagnostics.

    Truthiness equals ``consistent``. ``principal_moments`` are the COM-frame
    principal moments of inertia (ascending) and ``triangle_margins`` the three
    values J1+J2-J3, J1+J3-J2, J2+J3-J1; both are None when the mass is too
    small to define a COM frame.
    """

    consistent: bool
    mass: float
    min_pseudo_eigenvalue: float
    failures: tuple[str, ...]
    principal_moments: np.ndarray | None
    triangle_margins: np.ndarray | None

    def __bool__(self) -> bool:
        return self.consistent

    def describe(self) -> str:
        if self.consistent:
            return "fully physically consistent"
        parts = []
        if "mass" in self.failures:
            parts.append(f"mass not positive (m = {self.mass:g})")
        if "pseudo_inertia" in self.failures:
            msg = f"pseudo-inertia not positive definite (min eig {self.min_pseudo_eigenvalue:.3g})"
            if self.triangle_margins is not None and np.any(self.triangle_margins <= 0.0):
                moments = ", ".join(f"{v:.4g}" for v in self.principal_moments)
                margins = ", ".join(f"{v:.4g}" for v in self.triangle_margins)
                msg += (
                    f"; COM principal moments ({moments}) violate the triangle"
                    f" inequality (margins {margins})"
                )
            parts.append(msg)
        return "; ".join(parts)


def is_fully_consistent(pi, tol: float = DEFAULT_CONSISTENCY_TOL) -> ConsistencyReport:
    """Check m > tol and pseudo-inertia min eigenvalue > tol.

    Returns a truthy/falsy :class:`ConsistencyReport` carrying which condition
    failed and the COM-frame triangle-inequality margins.
    """
    pi = _as_pi(pi)
    m = float(pi[0])
    eigs = np.linalg.eigvalsh(pseudo_inertia(pi))
    failures = []
    if not m > tol:
        failures.append("mass")
    if not eigs[0] > tol:
        failures.append("pseudo_inertia")
    moments = margins = None
    if m > tol:
        com = pi[1:4] / m
        shift = m * (np.dot(com, com) * np.eye(3) - np.outer(com, com))
        moments = np.linalg.eigvalsh(inertia_matrix(pi) - shift)
        j1, j2, j3 = moments
        margins = np.array([j1 + j2 - j3, j1 + j3 - j2, j2 + j3 - j1])
    return ConsistencyReport(
        consistent=not failures,
        mass=m,
        min_pseudo_eigenvalue=float(eigs[0]),
        failures=tuple(failures),
        principal_moments=moments,
        triangle_margins=margins,
    )
