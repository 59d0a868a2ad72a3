import math

import numpy as np
import pytest

from oracles import modal_matrix_exp
from qsdw.diagnostics import energy_norm
from qsdw.experiments import (EquationConfig, ExperimentConfig, GridConfig, InitialConfig,
                              TimeConfig, build_initial, build_setup, run_experiment,
                              scale_to_energy_norm, slow_rate, validate_config)

LINEAR = dict(phi_kind="zero", f_kind="zero")


def make(experiment, eq=None, grid=None, time=None, initial=None, **options):
    return ExperimentConfig(
        experiment,
        equation=EquationConfig(**(eq or {})),
        grid=GridConfig(**(grid or {})),
        time=TimeConfig(**(time or {})),
        initial=initial or InitialConfig(),
        options=options,
    )


class TestInitialPresets:
    def test_smooth_amplitudes(self):
        cfg = make("dissipativity", grid=dict(N=8),
                   initial=InitialConfig("smooth", params={"u_amplitudes": [1.0, 0.5],
                                                           "v_amplitudes": [0.0, 0.0, 2.0]}))
        b, eq = build_setup(cfg)
        st = build_initial(cfg, b, eq)
        np.testing.assert_array_equal(st.u[:3], [1.0, 0.5, 0.0])
        np.testing.assert_array_equal(st.v[:3], [0.0, 0.0, 2.0])

    def test_random_needs_seed(self):
        cfg = make("dissipativity", initial=InitialConfig("random_spectral"))
        with pytest.raises(ValueError, match="seed"):
            validate_config(cfg)

    def test_unknown_parameter(self):
        cfg = make("dissipativity", initial=InitialConfig("smooth", params={"sigma": 1.0}))
        with pytest.raises(ValueError, match="unknown parameters"):
            validate_config(cfg)

    def test_rough_velocity_resolution_consistent(self):
        def velocity(N):
            cfg = make("smoothing", grid=dict(N=N),
                       initial=InitialConfig("rough_velocity", seed=3))
            b, eq = build_setup(cfg)
            return b, build_initial(cfg, b, eq).v

        b64, v64 = velocity(64)
        b128, v128 = velocity(128)
        np.testing.assert_array_equal(v128[:64], v64)
        # the L2 norm is fixed at the reference resolution, so truncations stay below 1
        assert b64.sobolev_norm(v64, 0) < b128.sobolev_norm(v128, 0) < 1.0
        assert b128.sobolev_norm(v128, 1) > 2 * b64.sobolev_norm(v64, 1)

    def test_random_spectral_2d(self):
        cfg = make("dissipativity", grid=dict(dim=2, N=8, lengths=[1.0, 2.0]),
                   initial=InitialConfig("random_spectral", seed=0, params={"sigma": 2.0}))
        b, eq = build_setup(cfg)
        st = build_initial(cfg, b, eq)
        assert st.u.shape == (8, 8) and np.all(st.v == 0)

    def test_scale_to_energy_norm(self):
        cfg = make("dissipativity", grid=dict(N=16))
        b, eq = build_setup(cfg)
        st = build_initial(cfg, b, eq)
        for target in (0.1, 1.0, 10.0):
            scaled = scale_to_energy_norm(st, eq, target)
            assert math.sqrt(energy_norm(scaled, eq)) == pytest.approx(target, rel=1e-10)


class TestDissipativity:
    def test_linear_modal_rate(self):
        cfg = make("dissipativity", eq=dict(gamma=3.0, **LINEAR), grid=dict(N=8),
                   time=dict(dt=1e-2, T=20.0, cadence=10))
        res = run_experiment(cfg)
        assert res.passed, res.failed
        expect = slow_rate(1.0, 1.0, 3.0)
        assert abs(res.fits["xi_E_decay"]["rate"] - expect) <= 0.05 * expect

    def test_modal_rate_oracle(self):
        # slowest root of r^2 + 3 r + 1 from the companion matrix
        roots = np.roots([1.0, 3.0, 1.0])
        assert slow_rate(1.0, 1.0, 3.0) == pytest.approx(-max(roots.real), rel=1e-12)

    def test_zero_data(self):
        cfg = make("dissipativity", grid=dict(N=8), time=dict(dt=1e-2, T=1.0, cadence=5),
                   initial=InitialConfig("zero"))
        res = run_experiment(cfg)
        assert res.passed
        assert np.all(res.tables["timeseries"].rows[:, 1:] == 0)

    def test_magnitudes_enter_ball_in_order(self):
        cfg = make("dissipativity", grid=dict(N=32), time=dict(dt=1e-2, T=30.0, cadence=10),
                   magnitudes=[0.1, 1.0, 10.0])
        res = run_experiment(cfg)
        assert res.check("ball_entry").passed
        assert res.check("entry_time_ordering").passed
        entry = res.info["ball_entry_times"]
        assert entry[0] < entry[1] < entry[2]


class TestLipschitz:
    def test_zero_perturbation(self):
        cfg = make("lipschitz", grid=dict(N=16), time=dict(dt=1e-3, T=0.2), eps=[0.0])
        res = run_experiment(cfg)
        rows = res.tables["lipschitz"].rows
        assert np.all(rows[:, 1:] == 0)

    def test_linear_ratio_constant(self):
        cfg = make("lipschitz", eq=LINEAR, grid=dict(N=16), time=dict(dt=1e-3, T=1.0))
        res = run_experiment(cfg)
        assert res.check("linear_ratio_constancy").measured <= 1e-8

    def test_nonlinear_ratio_spread(self):
        cfg = make("lipschitz", grid=dict(N=32), time=dict(dt=1e-3, T=1.0))
        res = run_experiment(cfg)
        assert res.check("lipschitz_ratio_spread").measured <= 2.0
        assert res.check("e_minus1_equivalence").passed


class TestSmoothing:
    def test_smooth_data(self):
        cfg = make("smoothing", grid=dict(N=32), time=dict(dt=1e-3, T=1.0, cadence=10),
                   initial=InitialConfig("smooth", params={"v_amplitudes": [1.0]}))
        res = run_experiment(cfg)
        assert res.passed
        vals = res.tables["probes"].rows[:, 1]
        assert np.all(np.isfinite(vals)) and vals[0] == pytest.approx(math.sqrt(math.pi / 2))

    def test_linear_rough_matches_modal(self):
        cfg = make("smoothing", eq=LINEAR, grid=dict(N=64),
                   time=dict(dt=2.5e-5, T=1.0, cadence=100),
                   initial=InitialConfig("rough_velocity", seed=1), refine=False)
        res = run_experiment(cfg)
        assert res.check("modal_probe_match").measured <= 1e-6
        # independent check of the oracle at t = 0.1 via the matrix exponential
        b, eq = build_setup(cfg)
        st = build_initial(cfg, b, eq)
        _, v = modal_matrix_exp(st.u, st.v, b.eigenvalues, b.eigenvalues, 1.0, 0.1)
        assert res.info["modal_probes"][2] == pytest.approx(b.sobolev_norm(v, 1), rel=1e-9)


class TestSplitting:
    def test_zero(self):
        cfg = make("splitting", grid=dict(N=16), time=dict(dt=1e-2, T=1.0, cadence=10),
                   initial=InitialConfig("zero"))
        res = run_experiment(cfg)
        assert np.all(res.tables["splitting"].rows[:, 1:] == 0)

    def test_linear_rate(self):
        cfg = make("splitting", eq=LINEAR, grid=dict(N=16),
                   time=dict(dt=1e-2, T=2.0, cadence=10))
        res = run_experiment(cfg)
        assert res.check("linear_rate_match").passed
        assert res.fits["linear_rate"]["rate"] == pytest.approx(2.0)

    def test_consistency_is_numerical(self):
        cfg = make("splitting", grid=dict(N=16), time=dict(dt=1e-2, T=1.0, cadence=10),
                   consistency_tol=1e-30)
        check = run_experiment(cfg).check("splitting consistency")
        assert not check.passed and check.kind == "numerical"

    def test_rejects_other_family(self):
        cfg = make("splitting", eq=dict(family="membrane"), grid=dict(N=8),
                   time=dict(dt=1e-2, T=1.0, cadence=10))
        with pytest.raises(ValueError, match="main family"):
            run_experiment(cfg)


class TestStrongNorm:
    def test_zero(self):
        cfg = make("strong_norm", grid=dict(N=8), time=dict(dt=1e-2, T=1.0),
                   initial=InitialConfig("zero"))
        res = run_experiment(cfg)
        assert res.passed and np.all(res.tables["strong"].rows[:, 1:] == 0)

    def test_linear_decays(self):
        cfg = make("strong_norm", eq=LINEAR, grid=dict(N=16), time=dict(dt=1e-2, T=4.0))
        res = run_experiment(cfg)
        h2 = res.tables["strong"].rows[:, 1]
        assert res.passed and h2[-1] < h2[0]

    def test_supercritical_power(self):
        cfg = make("strong_norm", eq=dict(p=4.0), grid=dict(N=64),
                   time=dict(dt=1e-3, T=2.0, cadence=20), limit_diagnostic=True)
        res = run_experiment(cfg)
        assert res.passed
        assert len(res.info["grad_L18_pow6_windows"]) == 2


class TestConvergence:
    def test_linear_order_two(self):
        cfg = make("convergence", eq=LINEAR, grid=dict(N=8), time=dict(dt=1e-2, T=1.0))
        res = run_experiment(cfg)
        assert all(abs(o - 2.0) <= 0.2 for o in res.fits["dt_order"]["orders"])

    def test_spectral_in_N(self):
        cfg = make("convergence", grid=dict(N=16), time=dict(dt=1e-3, T=0.5), mode="N")
        res = run_experiment(cfg)
        assert res.check("spectral_convergence").passed
        assert min(res.info["N_ratios"]) >= 10

    def test_dt_self_convergence(self):
        cfg = make("convergence", grid=dict(N=32), time=dict(dt=4e-3, T=0.5, cadence=25))
        res = run_experiment(cfg)
        assert all(3.6 <= r <= 4.4 for r in res.info["dt_ratios"])


class TestReproducibility:
    def test_bit_identical(self):
        cfg = make("lipschitz", grid=dict(N=16), time=dict(dt=1e-3, T=0.2),
                   initial=InitialConfig("random_spectral", seed=4))
        a, b = run_experiment(cfg), run_experiment(cfg)
        for name in a.tables:
            assert a.tables[name].rows.tobytes() == b.tables[name].rows.tobytes()
        assert a.provenance == b.provenance

    def test_unknown_option(self):
        with pytest.raises(ValueError, match="unknown options"):
            run_experiment(make("strong_norm", bogus=1))
