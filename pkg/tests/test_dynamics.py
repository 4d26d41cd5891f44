import numpy as np
import pytest

from helpers import (
    fd_body_jacobian,
    pendulum_about,
    random_chain,
    random_state,
    static_torque_oracle,
    zaxis_rotor,
)
from inertiakit import dynamics as dyn
from inertiakit import model as mdl
from inertiakit.dynamics import ContactWrench, RobotState, Transform, zero_state
from inertiakit.errors import DimensionError, ModelError, SingularMassMatrixError
from inertiakit.model import EstimationSelection


class TestTransforms:
    def test_compose_matches_matrix_product(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = Transform(
                dyn.axis_angle_matrix(rng.normal(size=3) / np.linalg.norm(rng.normal(size=3)), rng.uniform(-3, 3)),
                rng.normal(size=3),
            )
            b = Transform(
                dyn.axis_angle_matrix(rng.normal(size=3) / np.linalg.norm(rng.normal(size=3)), rng.uniform(-3, 3)),
                rng.normal(size=3),
            )
            np.testing.assert_allclose(
                a.after(b).motion6(), a.motion6() @ b.motion6(), atol=1e-12
            )
            np.testing.assert_allclose(
                a.inverse().motion6() @ a.motion6(), np.eye(6), atol=1e-12
            )

    def test_force_transform_is_transpose(self):
        rng = np.random.default_rng(2)
        x = Transform(dyn.axis_angle_matrix([0, 0, 1.0], 0.7), np.array([0.1, -0.2, 0.3]))
        f = rng.normal(size=6)
        np.testing.assert_allclose(x.force_to_parent(f), x.motion6().T @ f, atol=1e-13)


class TestRnea:
    def test_zero_gravity_zero_state(self):
        rng = np.random.default_rng(3)
        model = random_chain(rng, 4).with_gravity((0, 0, 0))
        tau = dyn.rnea(model, zero_state(model))
        np.testing.assert_allclose(tau, np.zeros(model.n_v), atol=1e-14)

    def test_planar_rotor(self):
        model = zaxis_rotor(izz=3.0)
        state = RobotState([0.0], [0.0], [2.0])
        np.testing.assert_allclose(dyn.rnea(model, state), [6.0], atol=1e-12)

    def test_static_pendulum_matches_potential_gradient(self):
        # point mass 1 kg at 0.5 m, hinge about -y: holding torque +4.905 N m
        model = pendulum_about((0, -1.0, 0))
        state = RobotState([0.0], [0.0], [0.0])
        tau = dyn.rnea(model, state)
        oracle = static_torque_oracle(model, [0.0])
        np.testing.assert_allclose(tau, oracle, atol=1e-7)
        assert abs(tau[0]) == pytest.approx(4.905, abs=1e-9)
        assert tau[0] == pytest.approx(4.905, abs=1e-9)

    def test_static_random_chains_match_potential_gradient(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            model = random_chain(rng, rng.integers(2, 6))
            q = random_state(rng, model).q
            state = RobotState(q, np.zeros(model.n_v), np.zeros(model.n_v))
            np.testing.assert_allclose(
                dyn.rnea(model, state), static_torque_oracle(model, q), atol=1e-6
            )

    def test_dimension_mismatch(self):
        model = zaxis_rotor()
        with pytest.raises(DimensionError):
            dyn.rnea(model, RobotState([0.0, 0.0], [0.0], [0.0]))


class TestNominalTorque:
    def test_all_selected_gives_zero(self):
        rng = np.random.default_rng(5)
        model = random_chain(rng, 3)
        sel = EstimationSelection(tuple(range(model.n_bodies)))
        _, zeroed = mdl.split_params(model, sel)
        state = random_state(rng, model)
        np.testing.assert_allclose(
            dyn.nominal_torque(zeroed, state), np.zeros(model.n_v), atol=1e-14
        )

    def test_none_selected_equals_full_rnea(self):
        rng = np.random.default_rng(6)
        model = random_chain(rng, 3)
        _, zeroed = mdl.split_params(model, EstimationSelection(()))
        state = random_state(rng, model)
        np.testing.assert_allclose(dyn.nominal_torque(zeroed, state), dyn.rnea(model, state))

    def test_split_identity(self):
        rng = np.random.default_rng(7)
        model = random_chain(rng, 3)
        sel = EstimationSelection((1,))
        pi_est, zeroed = mdl.split_params(model, sel)
        state = random_state(rng, model)
        y = dyn.regressor(model, state, sel)
        lhs = dyn.nominal_torque(zeroed, state) + y @ pi_est
        np.testing.assert_allclose(lhs, dyn.rnea(model, state), rtol=1e-12, atol=1e-12)


class TestRegressor:
    def test_static_pendulum_columns(self):
        model = pendulum_about((0, -1.0, 0))
        sel = EstimationSelection((0,))
        state = RobotState([0.0], [0.0], [0.0])
        y = dyn.regressor(model, state, sel)
        assert y[0, 1] == pytest.approx(9.81, abs=1e-12)  # h_x column
        assert y[0, 0] == pytest.approx(0.0, abs=1e-12)  # mass column

    def test_rotor_inertia_column(self):
        model = zaxis_rotor()
        sel = EstimationSelection((0,))
        state = RobotState([0.3], [0.0], [2.0])
        y = dyn.regressor(model, state, sel)
        assert y[0, 9] == pytest.approx(2.0, abs=1e-12)  # Izz column
        assert y[0, 0] == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(y[0, 1:4], 0.0, atol=1e-12)

    def test_identity_random_chains(self):
        rng = np.random.default_rng(8)
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(2, 8))
            base = "floating" if rng.random() < 0.5 else "fixed"
            model = random_chain(rng, n, base=base)
            k = int(rng.integers(1, n + 1))
            sel = EstimationSelection(tuple(sorted(rng.choice(n, size=k, replace=False))))
            state = random_state(rng, model)
            pi_est, zeroed = mdl.split_params(model, sel)
            y = dyn.regressor(model, state, sel)
            full = dyn.rnea(model, state)
            resid = np.linalg.norm(y @ pi_est + dyn.nominal_torque(zeroed, state) - full)
            rel = resid / (1.0 + np.linalg.norm(full))
            worst = max(worst, rel)
        assert worst <= 1e-9

    def test_columns_match_finite_differences(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            model = random_chain(rng, 3)
            sel = EstimationSelection((0, 2))
            state = random_state(rng, model)
            y = dyn.regressor(model, state, sel)
            pi_full = mdl.stack_params(model)
            step = 1e-6
            for k, body in enumerate(sel.estimated_bodies):
                for p in range(10):
                    dp = pi_full.copy()
                    dm = pi_full.copy()
                    dp[10 * body + p] += step
                    dm[10 * body + p] -= step
                    col = (
                        dyn.rnea(model, state, params=dp) - dyn.rnea(model, state, params=dm)
                    ) / (2 * step)
                    denom = 1.0 + np.max(np.abs(y))
                    np.testing.assert_allclose(
                        y[:, 10 * k + p], col, atol=1e-6 * denom, rtol=0
                    )

    def test_linearity_in_parameters(self):
        rng = np.random.default_rng(10)
        model = random_chain(rng, 4)
        sel = EstimationSelection((1, 3))
        state = random_state(rng, model)
        y = dyn.regressor(model, state, sel)
        pi_full = mdl.stack_params(model)
        delta = rng.normal(size=sel.dim)
        perturbed = pi_full + mdl.scatter_params(sel, delta, model.n_bodies)
        diff = dyn.rnea(model, state, params=perturbed) - dyn.rnea(model, state)
        np.testing.assert_allclose(diff, y @ delta, rtol=1e-9, atol=1e-10)
        # Y itself does not depend on the parameter values
        y2 = dyn.regressor(model.with_body_params(1, np.zeros(10)), state, sel)
        np.testing.assert_array_equal(y, y2)


class TestMassMatrix:
    def test_rotor(self):
        model = zaxis_rotor(izz=3.0)
        np.testing.assert_allclose(dyn.mass_matrix(model, [0.1]), [[3.0]], atol=1e-13)

    def test_columns_match_rnea(self):
        rng = np.random.default_rng(11)
        for base in ("fixed", "floating"):
            model = random_chain(rng, 4, base=base)
            q = random_state(rng, model).q
            m = dyn.mass_matrix(model, q)
            bias = dyn.rnea(model, RobotState(q, np.zeros(model.n_v), np.zeros(model.n_v)))
            for j in range(model.n_v):
                ej = np.zeros(model.n_v)
                ej[j] = 1.0
                col = dyn.rnea(model, RobotState(q, np.zeros(model.n_v), ej)) - bias
                np.testing.assert_allclose(m[:, j], col, rtol=1e-10, atol=1e-11)

    def test_symmetric_positive_definite(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            model = random_chain(rng, int(rng.integers(2, 7)), base="floating")
            q = random_state(rng, model).q
            m = dyn.mass_matrix(model, q)
            assert np.max(np.abs(m - m.T)) <= 1e-10
            assert np.linalg.eigvalsh(m)[0] > 0.0


class TestForwardDynamics:
    def test_rotor_acceleration(self):
        model = zaxis_rotor(izz=3.0)
        a = dyn.forward_dynamics(model, [0.0], [0.0], [6.0])
        np.testing.assert_allclose(a, [2.0], atol=1e-12)

    def test_pendulum_release(self):
        model = pendulum_about((0, -1.0, 0), com_x=0.5)
        a = dyn.forward_dynamics(model, [0.0], [0.0], [0.0])
        assert abs(a[0]) == pytest.approx(9.81 / 0.5, rel=1e-12)

    def test_round_trip_with_rnea(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            base = "floating" if rng.random() < 0.5 else "fixed"
            model = random_chain(rng, int(rng.integers(2, 8)), base=base)
            state = random_state(rng, model)
            tau_full = dyn.rnea(model, state)
            tau_act = tau_full[model.actuated_dof_selection]
            if not model.actuated_dof_selection.all():
                # unactuated rows must be produced by contacts: use a world
                # wrench equal to the base rows is not available here, so only
                # run the fully actuated check on fixed-base chains
                continue
            a = dyn.forward_dynamics(model, state.q, state.v, tau_act)
            np.testing.assert_allclose(
                a, state.a, rtol=1e-8, atol=1e-8 * (1 + np.max(np.abs(state.a)))
            )

    def test_floating_round_trip_free_dynamics(self):
        rng = np.random.default_rng(14)
        model = random_chain(rng, 3, base="floating")
        state0 = random_state(rng, model)
        tau_act = rng.normal(size=model.n_u)
        a = dyn.forward_dynamics(model, state0.q, state0.v, tau_act)
        reproduced = dyn.rnea(model, RobotState(state0.q, state0.v, a))
        expected = dyn.scatter_actuation(model, tau_act)
        np.testing.assert_allclose(reproduced, expected, rtol=1e-8, atol=1e-9)

    def test_singular_mass_matrix(self):
        builder = mdl.ModelBuilder("degenerate")
        builder.add_link("a", mass=0.0, inertia_com=np.zeros((3, 3)), has_inertial=True)
        builder.add_joint("j", "revolute", "world", "a", axis=(0, 0, 1))
        model = builder.build()
        with pytest.raises(SingularMassMatrixError):
            dyn.forward_dynamics(model, [0.0], [0.0], [1.0])


class TestContacts:
    def test_empty_set(self):
        rng = np.random.default_rng(15)
        model = random_chain(rng, 3)
        q = random_state(rng, model).q
        np.testing.assert_array_equal(dyn.apply_contacts(model, q, []), np.zeros(model.n_v))

    def test_floating_base_vertical_force(self):
        builder = mdl.ModelBuilder("box")
        builder.add_link("base", mass=2.0, inertia_com=np.diag([0.1, 0.1, 0.1]))
        builder.add_joint("root", "floating", "world", "base")
        model = builder.build()
        wrench = np.array([0, 0, 0, 0, 0, 19.62])
        for frame in ("body", "world"):
            tau = dyn.apply_contacts(
                model, zero_state(model).q, [ContactWrench(0, wrench, frame)]
            )
            np.testing.assert_allclose(tau, wrench, atol=1e-12)

    def test_distal_wrench_matches_fd_jacobian(self):
        rng = np.random.default_rng(16)
        model = random_chain(rng, 3, allow_fixed_joints=False)
        q = random_state(rng, model).q
        wrench = rng.normal(size=6)
        tau = dyn.apply_contacts(model, q, [ContactWrench(2, wrench, "body")])
        jac = fd_body_jacobian(model, q, 2)
        np.testing.assert_allclose(tau, jac.T @ wrench, rtol=1e-6, atol=1e-6)

    def test_invalid_frame(self):
        model = zaxis_rotor()
        with pytest.raises(ModelError, match="frame"):
            dyn.apply_contacts(model, [0.0], [ContactWrench(0, np.zeros(6), "spatial")])

    def test_invalid_body(self):
        model = zaxis_rotor()
        with pytest.raises(ModelError):
            dyn.apply_contacts(model, [0.0], [ContactWrench(5, np.zeros(6))])


class TestIntegration:
    def test_energy_drift_conservative_chain(self):
        rng = np.random.default_rng(17)
        model = random_chain(rng, 3, allow_fixed_joints=False).with_gravity((0, 0, 0))
        q = random_state(rng, model).q
        v = 0.5 * rng.normal(size=model.n_v)
        e0 = dyn.kinetic_energy(model, q, v)
        dt = 1e-3
        for _ in range(10_000):
            a = dyn.forward_dynamics(model, q, v, np.zeros(model.n_u))
            q, v = dyn.integrate_semi_implicit(model, q, v, a, dt)
        e1 = dyn.kinetic_energy(model, q, v)
        assert abs(e1 - e0) / e0 <= 0.01

    def test_quaternion_renormalized(self):
        builder = mdl.ModelBuilder("fb")
        builder.add_link("base", mass=1.0, inertia_com=np.diag([0.2, 0.3, 0.4]))
        builder.add_joint("root", "floating", "world", "base")
        model = builder.build().with_gravity((0, 0, 0))
        state = zero_state(model)
        q, v = state.q, np.array([1.0, 2.0, 3.0, 0.1, 0.0, -0.1])
        for _ in range(2000):
            a = dyn.forward_dynamics(model, q, v, np.zeros(0))
            q, v = dyn.integrate_semi_implicit(model, q, v, a, 1e-3)
        assert abs(np.linalg.norm(q[:4]) - 1.0) < 1e-12
