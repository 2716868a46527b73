import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from nmcontrol.bloch import (REFERENCE_INITIAL_STATE, BlochVector, ControlField, DensityMatrix2,
                             TimeGrid, Trajectory, as_vector, bloch_from_density,
                             density_from_bloch, drift_matrix, integrate, step_halving_error,
                             target_trajectory)
from nmcontrol.reservoir import CoefficientTrace, Method

unit = st.floats(-1.0, 1.0)


def _driven_case(grid):
    t = grid.times
    control = ControlField(grid, 0.5 * np.sin(1.3 * t), 0.3 * np.cos(0.4 * t))
    coeffs = CoefficientTrace(grid, 0.05 * (1 - np.exp(-t)), 0.01 * np.sin(t) ** 2, Method.EXACT)
    return control, coeffs


class TestStates:
    def test_reference_state(self):
        x = REFERENCE_INITIAL_STATE
        assert x.as_array() == pytest.approx([math.sqrt(3) / 2, -math.sqrt(2) / 4,
                                              -math.sqrt(2) / 4])
        assert x.norm == pytest.approx(1.0)
        assert x.is_physical

    def test_unphysical_vector(self):
        assert not BlochVector(1.0, 1.0, 0.0).is_physical

    def test_as_vector_shapes(self):
        assert as_vector(BlochVector(1, 2, 3)).tolist() == [1, 2, 3]
        with pytest.raises(ValueError):
            as_vector([1.0, 2.0])

    def test_basis_states(self):
        assert bloch_from_density(DensityMatrix2(1.0, 0.0, 0.0)) == BlochVector(0, 0, 1)
        assert bloch_from_density(DensityMatrix2(0.5, 0.5, 0.5)) == BlochVector(1, 0, 0)
        # rho01 = -i/2: x2 = i (rho01 - rho10) = 1
        assert bloch_from_density(DensityMatrix2(0.5, 0.5, -0.5j)) == BlochVector(0, 1, 0)

    def test_x_components_follow_pauli_expectations(self):
        rho = density_from_bloch([0.3, -0.4, 0.5]).as_matrix()
        sx = np.array([[0, 1], [1, 0]])
        sy = np.array([[0, -1j], [1j, 0]])
        sz = np.diag([1, -1])
        got = [np.trace(rho @ s).real for s in (sx, sy, sz)]
        assert got == pytest.approx([0.3, -0.4, 0.5])

    @settings(max_examples=100)
    @given(unit, unit, unit)
    def test_round_trip(self, x1, x2, x3):
        x = BlochVector(x1, x2, x3)
        back = bloch_from_density(density_from_bloch(x))
        assert back.as_array() == pytest.approx(x.as_array(), abs=1e-15)

    @settings(max_examples=100)
    @given(unit, unit, unit)
    def test_validity_matches_norm(self, x1, x2, x3):
        x = BlochVector(x1, x2, x3)
        assert density_from_bloch(x).is_valid(atol=1e-12) == x.is_physical


class TestGridAndFields:
    def test_grid(self):
        g = TimeGrid(0.0, 2.0, 4)
        assert g.h == 0.5
        assert g.times.tolist() == [0, 0.5, 1.0, 1.5, 2.0]
        assert g.midpoints.tolist() == [0.25, 0.75, 1.25, 1.75]
        assert g.refined(3).n_steps == 12

    @pytest.mark.parametrize("kw", [dict(tf=0.0), dict(n_steps=0), dict(n_steps=2.5)])
    def test_grid_validation(self, kw):
        with pytest.raises(ValueError):
            TimeGrid(**kw)

    def test_trajectory_shape_checked(self):
        with pytest.raises(ValueError):
            Trajectory(TimeGrid(0, 1, 4), np.zeros((4, 3)))

    def test_control_interpolation(self):
        g = TimeGrid(0.0, 1.0, 2)
        c = ControlField(g, [0.0, 1.0, 0.0], [2.0, 2.0, 2.0])
        ux, uy = c(0.25)
        assert (ux, uy) == (0.5, 2.0)
        assert c.resample(g.refined(2)).ux.tolist() == [0, 0.5, 1.0, 0.5, 0]
        assert c.amplitude[1] == pytest.approx(math.sqrt(5))
        with pytest.raises(ValueError):
            ControlField(g, [0.0], [0.0])


class TestDynamics:
    def test_drift_matrix(self):
        A, B = drift_matrix(0.2, 0.3, 0.05, 0.01, omega0=2.0)
        assert A.tolist() == [[-0.05, -2.0, 0.3], [2.0, -0.05, -0.2], [-0.3, 0.2, -0.1]]
        assert B.tolist() == [0.0, 0.0, -0.02]

    def test_closed_system_generator_is_antisymmetric(self):
        A, B = drift_matrix(0.7, -1.1, 0.0, 0.0)
        assert np.array_equal(A, -A.T)
        assert not B.any()

    def test_target_is_free_precession(self):
        t = np.linspace(0, 10, 7)
        x = target_trajectory(t, REFERENCE_INITIAL_STATE, omega0=1.5)
        assert np.linalg.norm(x, axis=1) == pytest.approx(1.0)
        assert np.all(x[:, 2] == REFERENCE_INITIAL_STATE.x3)
        assert target_trajectory(0.0, REFERENCE_INITIAL_STATE).shape == (3,)

    def test_closed_system_round_trip(self):
        g = TimeGrid(0.0, 2 * math.pi, 1000)
        coeffs = CoefficientTrace.constant(g, 0.0, 0.0)
        traj = integrate(REFERENCE_INITIAL_STATE, ControlField.zeros(g), coeffs)
        assert np.max(np.abs(traj.final.as_array() - REFERENCE_INITIAL_STATE.as_array())) <= 1e-8
        ref = target_trajectory(g.times, REFERENCE_INITIAL_STATE)
        assert np.max(np.abs(traj.states - ref)) <= 1e-8

    def test_matches_adaptive_solver(self):
        g = TimeGrid(0.0, 10.0, 2000)
        control, coeffs = _driven_case(g)
        traj = integrate(REFERENCE_INITIAL_STATE, control, coeffs)

        def rhs(t, x):
            ux, uy = control(t)
            d = np.interp(t, g.times, coeffs.delta)
            gm = np.interp(t, g.times, coeffs.gamma)
            A, B = drift_matrix(ux, uy, d, gm)
            return A @ x + B

        sol = solve_ivp(rhs, (0, 10), REFERENCE_INITIAL_STATE.as_array(), t_eval=g.times[::100],
                        rtol=1e-11, atol=1e-12, method="DOP853")
        assert np.max(np.abs(sol.y.T - traj.states[::100])) <= 1e-7

    def test_fourth_order_convergence(self):
        g = TimeGrid(0.0, 10.0, 200)
        control, coeffs = _driven_case(g)
        ref = integrate(REFERENCE_INITIAL_STATE, control, coeffs, g.refined(64)).states[::64]
        errs = [np.max(np.abs(integrate(REFERENCE_INITIAL_STATE, control, coeffs,
                                        g.refined(f)).states[::f] - ref)) for f in (1, 2, 4)]
        orders = np.log2(np.array(errs[:-1]) / errs[1:])
        assert orders.min() >= 3.8

    def test_step_halving_error_estimates_error(self):
        g = TimeGrid(0.0, 10.0, 200)
        control, coeffs = _driven_case(g)
        ref = integrate(REFERENCE_INITIAL_STATE, control, coeffs, g.refined(64)).states[::64]
        err = np.max(np.abs(integrate(REFERENCE_INITIAL_STATE, control, coeffs).states - ref))
        assert step_halving_error(REFERENCE_INITIAL_STATE, control, coeffs) == pytest.approx(
            err, rel=0.1)

    def test_lindblad_regime_stays_physical(self):
        g = TimeGrid(0.0, 20.0, 2000)
        t = g.times
        coeffs = CoefficientTrace.constant(g, 0.05, 0.02)  # delta >= |gamma|
        control = ControlField(g, np.sin(t), np.cos(2 * t))
        traj = integrate(REFERENCE_INITIAL_STATE, control, coeffs)
        assert np.linalg.norm(traj.states, axis=1).max() <= 1.0 + 1e-12

    def test_relaxes_to_thermal_state(self):
        # steady state of constant coefficients without control: x3 = -gamma / delta
        g = TimeGrid(0.0, 400.0, 8000)
        coeffs = CoefficientTrace.constant(g, 0.05, 0.02)
        final = integrate(REFERENCE_INITIAL_STATE, ControlField.zeros(g), coeffs).final
        assert final.as_array() == pytest.approx([0, 0, -0.4], abs=1e-8)

    def test_interpolates_inputs_from_other_grid(self):
        g = TimeGrid(0.0, 5.0, 100)
        control, coeffs = _driven_case(g)
        fine = integrate(REFERENCE_INITIAL_STATE, control, coeffs, g.refined(2))
        assert fine.grid == g.refined(2)
        with pytest.raises(ValueError, match="cover"):
            integrate(REFERENCE_INITIAL_STATE, control, coeffs, TimeGrid(0.0, 6.0, 100))


class TestIntegratorProperties:
    def test_affine_in_initial_state(self):
        g = TimeGrid(0.0, 10.0, 1000)
        control, coeffs = _driven_case(g)
        x0, y0, a = np.array([0.3, 0.1, -0.5]), np.array([-0.2, 0.6, 0.4]), 0.3
        lhs = integrate(a * x0 + (1 - a) * y0, control, coeffs).states
        rhs = a * integrate(x0, control, coeffs).states + (1 - a) * integrate(y0, control, coeffs).states
        assert np.max(np.abs(lhs - rhs)) <= 1e-10

    def test_closed_system_halving_factor(self):
        g = TimeGrid(0.0, 2 * math.pi, 50)
        zero = lambda grid: (ControlField.zeros(grid), CoefficientTrace.constant(grid, 0.0, 0.0))
        exact = REFERENCE_INITIAL_STATE.as_array()  # one full period
        errs = []
        for f in (1, 2):
            gr = g.refined(f)
            errs.append(np.max(np.abs(integrate(exact, *zero(gr)).final.as_array() - exact)))
        assert errs[0] / errs[1] >= 12
