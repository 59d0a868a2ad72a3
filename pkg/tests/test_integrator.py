import math

import numpy as np
import pytest

from oracles import modal_matrix_exp, scalar_ode
from qsdw.errors import ConvergenceError, NonFiniteError, NumericalFailure
from qsdw.experiments import scale_to_energy_norm
from qsdw.integrator import (EquationSpec, State, integrate, linear_modal_exact,
                             modal_decay_rate, n_steps, rhs_accel, step_imex, step_midpoint,
                             step_pseudoparabolic)
from qsdw.nonlinearity import NonlinearitySpec
from qsdw.spectral import build_basis

LINEAR = NonlinearitySpec(phi_kind="zero", f_kind="zero")


@pytest.fixture
def basis8():
    return build_basis(1, 8, math.pi)


def random_state(basis, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    k = np.arange(1, basis.N + 1, dtype=float)
    return State(scale * rng.standard_normal(basis.shape) / k ** 2,
                 scale * rng.standard_normal(basis.shape) / k ** 2)


class TestEquationSpec:
    def test_gamma_positive(self, basis8):
        with pytest.raises(ValueError, match="gamma"):
            EquationSpec(basis8, gamma=0.0)

    def test_structural_alpha(self, basis8):
        with pytest.raises(ValueError, match="alpha"):
            EquationSpec(basis8, "structural", alpha=0.3)

    def test_unknown_family(self, basis8):
        with pytest.raises(ValueError, match="family"):
            EquationSpec(basis8, "plate")

    def test_membrane_operators(self, basis8):
        eq = EquationSpec(basis8, "membrane")
        np.testing.assert_array_equal(eq.damping, basis8.eigenvalues ** 2)


class TestRhsAccel:
    @pytest.mark.parametrize("family", ["main", "kirchhoff", "membrane", "structural"])
    def test_zero_state(self, basis8, family):
        eq = EquationSpec(basis8, family, alpha=0.75)
        np.testing.assert_array_equal(rhs_accel(State.zero(basis8), eq), 0.0)

    def test_linear_single_mode(self, basis8):
        eq = EquationSpec(basis8, gamma=0.7, nonlinearity=LINEAR)
        st = State(basis8.mode(3, 2.0), basis8.mode(3, -1.0))
        lam = 9.0
        np.testing.assert_allclose(rhs_accel(st, eq), basis8.mode(3, -lam * (0.7 * -1 + 2)))

    def test_quadratic_phi(self, basis8):
        eq = EquationSpec(basis8, gamma=0.7, nonlinearity=NonlinearitySpec(p=1, f_kind="zero"))
        st = State(basis8.mode(2, 1.5), basis8.mode(2, 0.5))
        lam = 4.0
        expect = -lam * (0.7 * 0.5 + 1.5) - 2 * lam * 1.5
        np.testing.assert_allclose(rhs_accel(st, eq), basis8.mode(2, expect), atol=1e-12)

    def test_overflow_reports_index(self, basis8):
        eq = EquationSpec(basis8, nonlinearity=NonlinearitySpec(q=4.0))
        with pytest.raises(NonFiniteError, match="grid index") as info:
            rhs_accel(State(basis8.mode(1, 1e80), basis8.zeros()), eq)
        assert info.value.index is not None


class TestLinearModalExact:
    def test_repeated_root(self):
        u0, v0, t = 0.3, -1.1, 1.7
        u, _ = linear_modal_exact(u0, v0, 1.0, 2.0, t)
        assert u == pytest.approx((u0 + (u0 + v0) * t) * math.exp(-t), rel=1e-14)

    def test_large_gamma(self):
        u, _ = linear_modal_exact(1.0, 0.0, 1.0, 100.0, 10.0)
        assert u == pytest.approx(math.exp(-10 / 100), rel=1e-2)

    def test_zero_data(self):
        u, v = linear_modal_exact(0.0, 0.0, 3.0, 0.5, 2.0)
        assert u == 0.0 and v == 0.0

    @pytest.mark.parametrize("gamma", [0.1, 0.5, 1.0, 2.0, 7.0])
    def test_matches_matrix_exponential(self, gamma):
        lam = np.array([1.0, 4.0, 9.0, 100.0])
        u0 = np.array([1.0, -0.5, 0.2, 0.1])
        v0 = np.array([0.3, 0.0, -1.0, 2.0])
        u, v = linear_modal_exact(u0, v0, lam, gamma, 0.8)
        ue, ve = modal_matrix_exp(u0, v0, lam, lam, gamma, 0.8)
        np.testing.assert_allclose(u, ue, rtol=1e-10, atol=1e-13)
        np.testing.assert_allclose(v, ve, rtol=1e-10, atol=1e-13)

    def test_decay_rate(self):
        assert modal_decay_rate(1.0, 100.0) == pytest.approx(1 / 100, rel=1e-3)
        assert modal_decay_rate(1.0, 1.0) == 0.5


class TestStepMidpoint:
    def test_zero_state(self, basis8):
        eq = EquationSpec(basis8)
        out = step_midpoint(State.zero(basis8), eq, 1e-2)
        np.testing.assert_array_equal(out.u, 0.0)
        np.testing.assert_array_equal(out.v, 0.0)

    def test_second_order(self, basis8):
        eq = EquationSpec(basis8, gamma=1.0, nonlinearity=LINEAR)
        st0 = State(basis8.mode(1), basis8.zeros())
        errs = []
        for dt in (1e-2, 5e-3, 2.5e-3, 1.25e-3):
            tr = integrate(st0, eq, dt, 1.0, cadence=n_steps(dt, 1.0))
            u, _ = linear_modal_exact(1.0, 0.0, 1.0, 1.0, 1.0)
            errs.append(abs(tr.u[-1][0] - u))
        ratios = np.array(errs[:-1]) / np.array(errs[1:])
        assert np.all((ratios >= 3.6) & (ratios <= 4.4)), ratios

    def test_contraction_within_eight_iterations(self):
        b = build_basis(1, 32, math.pi)
        eq = EquationSpec(b, nonlinearity=NonlinearitySpec(p=3, q=2))
        for target in (0.1, 1.0, 10.0):
            st = scale_to_energy_norm(random_state(b, 1), eq, target)
            for _ in range(20):
                st = step_midpoint(st, eq, 1e-3, tol=1e-12, max_iter=8)

    def test_non_convergence(self):
        b = build_basis(1, 16, math.pi)
        eq = EquationSpec(b, nonlinearity=NonlinearitySpec(p=3, q=2))
        with pytest.raises(ConvergenceError) as info:
            step_midpoint(State(b.mode(1, 30.0), b.zeros()), eq, 0.5, max_iter=5)
        assert info.value.residual > 0

    def test_matches_rk4_nonlinear(self):
        b = build_basis(1, 8, math.pi)
        eq = EquationSpec(b, nonlinearity=NonlinearitySpec(p=3, q=2))
        st0 = random_state(b, 2)
        mid = integrate(st0, eq, 2e-4, 0.2, cadence=1000)
        rk = integrate(st0, eq, 1e-5, 0.2, cadence=20000, scheme="rk4_oracle")
        np.testing.assert_allclose(mid.u[-1], rk.u[-1], atol=1e-7)


class TestStepImex:
    def test_zero_state(self, basis8):
        eq = EquationSpec(basis8)
        st, hist = step_imex(State.zero(basis8), eq, 1e-2)
        st, _ = step_imex(st, eq, 1e-2, hist)
        np.testing.assert_array_equal(st.u, 0.0)

    def test_linear_is_crank_nicolson(self, basis8):
        eq = EquationSpec(basis8, nonlinearity=LINEAR)
        st0 = random_state(basis8, 3)
        a, hist = step_imex(st0, eq, 1e-2)
        b, _ = step_imex(a, eq, 1e-2, hist)
        c = step_midpoint(step_midpoint(st0, eq, 1e-2), eq, 1e-2)
        np.testing.assert_allclose(b.u, c.u, atol=1e-15)

    def test_second_order_against_midpoint(self):
        b = build_basis(1, 16, math.pi)
        eq = EquationSpec(b, nonlinearity=NonlinearitySpec(p=3, q=2))
        st0 = random_state(b, 4)
        diffs = []
        for dt in (4e-3, 2e-3, 1e-3):
            m = integrate(st0, eq, dt, 1.0, cadence=n_steps(dt, 1.0))
            i = integrate(st0, eq, dt, 1.0, cadence=n_steps(dt, 1.0), scheme="imex")
            diffs.append(b.sobolev_norm(m.u[-1] - i.u[-1], 1))
        ratios = np.array(diffs[:-1]) / np.array(diffs[1:])
        assert np.all((ratios >= 3.6) & (ratios <= 4.4)), ratios


class TestPseudoparabolic:
    def test_free_decay(self, basis8):
        eq = EquationSpec(basis8, gamma=2.0, nonlinearity=LINEAR)
        w = basis8.mode(1) + basis8.mode(3, 0.5)
        dt, T = 1e-3, 1.0
        for _ in range(n_steps(dt, T)):
            w = step_pseudoparabolic(w, dt, 0.0, None, eq)
        expect = (basis8.mode(1) + basis8.mode(3, 0.5)) * math.exp(-T / 2.0)
        np.testing.assert_allclose(w, expect, rtol=1e-6)

    def test_zero_stays_zero(self, basis8):
        eq = EquationSpec(basis8)
        w = basis8.zeros()
        for _ in range(10):
            w = step_pseudoparabolic(w, 1e-2, 1.0, None, eq)
        np.testing.assert_array_equal(w, 0.0)

    def test_steady_state(self, basis8):
        gamma = 0.5
        eq = EquationSpec(basis8, gamma=gamma, nonlinearity=LINEAR)
        h = basis8.mode(1, 2.0) + basis8.mode(2, -1.0)
        w = basis8.zeros()
        dt = 1e-2
        for _ in range(n_steps(dt, 20 * gamma)):
            w = step_pseudoparabolic(w, dt, 0.0, h, eq)
        np.testing.assert_allclose(w, h / basis8.eigenvalues, atol=1e-6)

    def test_nonlinear_against_ode(self):
        b = build_basis(1, 4, math.pi)
        spec = NonlinearitySpec(phi_kind="zero", q=2)
        eq = EquationSpec(b, gamma=1.0, nonlinearity=spec)
        w = b.mode(1, 0.8)
        dt, T = 1e-3, 0.5
        for _ in range(n_steps(dt, T)):
            w = step_pseudoparabolic(w, dt, 1.0, None, eq)

        # Galerkin ODE for the same four modes, with f evaluated on the grid
        def rhs(_, y):
            f = b.to_spectral(b.to_grid(y) ** 3)
            return (-(b.eigenvalues + 1.0) * y - f) / b.eigenvalues

        ref = scalar_ode(rhs, b.mode(1, 0.8), T)
        np.testing.assert_allclose(w, ref, atol=1e-6)


class TestIntegrate:
    def test_zero_horizon(self, basis8):
        tr = integrate(State(basis8.mode(1), basis8.zeros()), EquationSpec(basis8), 1e-2, 0.0)
        assert len(tr) == 1 and tr.t[0] == 0.0

    def test_modal_samples(self, basis8):
        eq = EquationSpec(basis8, gamma=1.0, nonlinearity=LINEAR)
        tr = integrate(State(basis8.mode(2), basis8.zeros()), eq, 1e-4, 1.0, cadence=500)
        for i in range(len(tr)):
            u, v = linear_modal_exact(1.0, 0.0, 4.0, 1.0, tr.t[i])
            assert abs(tr.u[i][1] - u) <= 1e-8 and abs(tr.v[i][1] - v) <= 1e-8

    def test_deterministic(self):
        b = build_basis(1, 16, math.pi)
        eq = EquationSpec(b)
        st = random_state(b, 5)
        a = integrate(st, eq, 1e-3, 0.1, cadence=10)
        c = integrate(st, eq, 1e-3, 0.1, cadence=10)
        assert a.u.tobytes() == c.u.tobytes() and a.v.tobytes() == c.v.tobytes()

    def test_cadence_must_divide(self, basis8):
        with pytest.raises(ValueError, match="cadence"):
            integrate(State.zero(basis8), EquationSpec(basis8), 1e-2, 1.0, cadence=7)

    def test_failure_time_attached(self):
        b = build_basis(1, 16, math.pi)
        eq = EquationSpec(b, nonlinearity=NonlinearitySpec(p=3, q=2))
        with pytest.raises(NumericalFailure) as info:
            integrate(State(b.mode(1, 30.0), b.zeros()), eq, 0.25, 1.0, max_iter=5)
        assert info.value.t == 0.0 and "at t=" in str(info.value)

    def test_dissipated_integral(self, basis8):
        eq = EquationSpec(basis8, nonlinearity=LINEAR)
        tr = integrate(State(basis8.mode(1), basis8.zeros()), eq, 1e-3, 1.0, cadence=100)
        assert tr.dissipated[0] == 0.0 and np.all(np.diff(tr.dissipated) >= 0)


class TestCrossFamily:
    def _pair(self, family_eq, basis):
        st0 = random_state(basis, 6)
        main = EquationSpec(basis, nonlinearity=NonlinearitySpec(phi_kind="zero", q=2))
        a = integrate(st0, family_eq, 1e-3, 0.5, cadence=50)
        c = integrate(st0, main, 1e-3, 0.5, cadence=50)
        return a, c

    def test_structural_alpha_one(self, basis8):
        eq = EquationSpec(basis8, "structural", alpha=1.0,
                          nonlinearity=NonlinearitySpec(phi_kind="zero", q=2))
        a, c = self._pair(eq, basis8)
        assert np.max(np.abs(a.u - c.u)) <= 1e-12

    def test_kirchhoff_without_stiffening(self, basis8):
        eq = EquationSpec(basis8, "kirchhoff", kirchhoff_coeff=0.0,
                          nonlinearity=NonlinearitySpec(phi_kind="zero", q=2))
        a, c = self._pair(eq, basis8)
        assert np.max(np.abs(a.u - c.u)) <= 1e-12

    def test_membrane_linear_oracle(self, basis8):
        eq = EquationSpec(basis8, "membrane", gamma=0.3, nonlinearity=LINEAR)
        st0 = random_state(basis8, 7)
        tr = integrate(st0, eq, 1e-4, 0.2, cadence=2000)
        lam2 = basis8.eigenvalues ** 2
        u, _ = linear_modal_exact(st0.u, st0.v, lam2, 0.3, 0.2)
        np.testing.assert_allclose(tr.u[-1], u, atol=1e-6)
