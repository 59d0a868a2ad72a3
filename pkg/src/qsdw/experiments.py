"""
Scenario drivers: each turns one qualitative property of the strongly
damped wave dynamics into measured time series, fitted rates and named
pass/fail checks.

=================  ==========================================================
experiment         what is measured
=================  ==========================================================
dissipativity      energy decay / entry into a common terminal band
lipschitz          growth of E_-1 differences versus perturbation size
smoothing          instantaneous H^1 regularization of a rough velocity
splitting          u = v + w with w bounded in H^2 and v decaying in H^1
strong_norm        uniform-in-time H^2 bound of u
convergence        observed orders in dt and spectral convergence in N
=================  ==========================================================
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .diagnostics import (_grad_magnitude, balance_residual, diff_metrics, e_minus1_bounds,
                          energy_norm, energy_report, fit_decay, fit_power_law)
from .errors import NumericalFailure
from .integrator import (EquationSpec, State, Trajectory, integrate, linear_modal_exact, n_steps,
                         rhs_accel, step_midpoint, step_pseudoparabolic)
from .nonlinearity import NonlinearitySpec, validate_conditions
from .parallel import parallel_map
from .spectral import build_basis

__all__ = [
    "EquationConfig", "ForcingConfig", "GridConfig", "TimeConfig", "InitialConfig",
    "ExperimentConfig", "Table", "Check", "RunResult", "EXPERIMENTS",
    "build_setup", "build_initial", "scale_to_energy_norm", "standard_table",
    "run_experiment", "run_dissipativity", "run_lipschitz", "run_smoothing",
    "run_splitting", "run_strong_norm", "run_convergence", "slow_rate",
]

SERIES_COLUMNS = ("t", "E", "modified_E", "energy_norm", "h1_u", "h2_u", "h1_dtu",
                  "hm1_dtdtu", "balance_residual")


# -- configuration ----------------------------------------------------------

@dataclass
class EquationConfig:
    family: str = "main"
    gamma: float = 1.0
    alpha: float = 1.0
    p: float = 3.0
    q: float = 2.0
    C_f: float = 0.0
    phi_kind: str = "power"
    f_kind: str = "power"
    kirchhoff_m: float = 1.0
    kirchhoff_coeff: float = 1.0
    limit_case_p5: bool = False


@dataclass
class ForcingConfig:
    kind: str = "zero"
    k: int | list = 1
    amplitude: float = 0.0


@dataclass
class GridConfig:
    dim: int = 1
    N: int = 32
    M: int | None = None
    lengths: list = field(default_factory=lambda: [math.pi])


@dataclass
class TimeConfig:
    dt: float = 1e-3
    T: float = 1.0
    cadence: int = 10
    scheme: str = "midpoint"
    tol: float = 1e-12
    max_iter: int = 50


PRESET_PARAMS = {
    "smooth": {"u_amplitudes": [1.0], "v_amplitudes": [], "magnitude": None},
    "random_spectral": {"sigma": 2.0, "amplitude": 1.0, "v_amplitude": 0.0,
                        "ref_modes": None},
    "rough_velocity": {"sigma": 0.51, "l2_norm": 1.0, "u_amplitudes": [1.0],
                       "ref_modes": None},
    "zero": {},
}
RANDOM_PRESETS = ("random_spectral", "rough_velocity")


@dataclass
class InitialConfig:
    """Initial-data preset.

    ``smooth``: ``u = sum_k a_k e_k``, ``v = sum_k b_k e_k`` from the amplitude
    lists (index ``k`` is the diagonal mode ``(k, .., k)``); ``magnitude``
    rescales both to that energy "norm" ``||xi||_E``.
    ``random_spectral``: ``u_k = amplitude xi_k |k|^-sigma`` (``v`` likewise
    with ``v_amplitude``). ``rough_velocity``: smooth ``u`` and
    ``v_k = c xi_k |k|^-sigma`` with ``c`` fixing ``||v||_L2 = l2_norm`` at
    the reference resolution ``ref_modes``. Random draws are made on the
    reference grid and truncated, so refinement in ``N`` keeps the low modes.
    """

    preset: str = "smooth"
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def resolved(self):
        if self.preset not in PRESET_PARAMS:
            raise ValueError(f"unknown initial preset {self.preset!r}")
        unknown = set(self.params) - set(PRESET_PARAMS[self.preset])
        if unknown:
            raise ValueError(f"unknown parameters for preset {self.preset!r}: {sorted(unknown)}")
        if self.preset in RANDOM_PRESETS and self.seed is None:
            raise ValueError(f"preset {self.preset!r} requires a seed")
        out = copy.deepcopy(PRESET_PARAMS[self.preset])
        out.update(self.params)
        return out


@dataclass
class ExperimentConfig:
    experiment: str = "dissipativity"
    equation: EquationConfig = field(default_factory=EquationConfig)
    forcing: ForcingConfig = field(default_factory=ForcingConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    options: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()


# -- results ------------------------------------------------------------------

@dataclass
class Table:
    columns: tuple
    rows: np.ndarray

    @classmethod
    def empty(cls, columns):
        return cls(tuple(columns), np.zeros((0, len(columns))))


@dataclass
class Check:
    """A named invariant with its measured value.

    ``kind`` is ``"physics"`` for properties of the dynamics and
    ``"numerical"`` for internal consistency of the discretization.
    """

    name: str
    passed: bool
    measured: float
    threshold: float
    kind: str = "physics"
    detail: str = ""

    def __post_init__(self):
        if self.kind not in ("physics", "numerical"):
            raise ValueError(f"check kind must be physics or numerical, got {self.kind!r}")
        self.passed = bool(self.passed)
        self.measured = float(self.measured)
        self.threshold = float(self.threshold)


@dataclass
class RunResult:
    experiment: str
    tables: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    info: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def failed(self):
        return [c for c in self.checks if not c.passed]

    @property
    def passed(self):
        return not self.failed


# -- setup ----------------------------------------------------------------------

def build_setup(config):
    """Basis and equation described by ``config``."""
    gc = config.grid
    basis = build_basis(gc.dim, gc.N, gc.lengths, gc.M)
    return basis, build_equation(config, basis)


def build_equation(config, basis):
    ec = config.equation
    nl = NonlinearitySpec(ec.p, ec.q, ec.C_f, ec.phi_kind, ec.f_kind, ec.limit_case_p5)
    fc = config.forcing
    if fc.kind == "zero":
        g = None
    elif fc.kind == "mode":
        g = basis.mode(fc.k, fc.amplitude)
    else:
        raise ValueError(f"unknown forcing kind {fc.kind!r}")
    return EquationSpec(basis, ec.family, ec.gamma, ec.alpha, nl, ec.kirchhoff_m,
                        ec.kirchhoff_coeff, g)


def _diag_modes(basis, amplitudes):
    u = basis.zeros()
    for k, a in enumerate(amplitudes, start=1):
        if k > basis.N:
            break
        u[(k - 1,) * basis.dim] = a
    return u


def _random_field(basis, seed, sigma, ref_modes, stream):
    ref = ref_modes or (4096 if basis.dim == 1 else 256)
    if ref < basis.N:
        raise ValueError(f"ref_modes={ref} smaller than N={basis.N}")
    rng = np.random.default_rng([seed, stream])
    xi = rng.standard_normal((ref,) * basis.dim)
    k = np.arange(1, ref + 1, dtype=float)
    mag2 = sum(np.meshgrid(*([k * k] * basis.dim), indexing="ij"))
    weights = xi * mag2 ** (-sigma / 2)
    return weights, weights[(slice(0, basis.N),) * basis.dim].copy()


def build_initial(config, basis, eq):
    ic = config.initial
    prm = ic.resolved()
    if ic.preset == "zero":
        return State.zero(basis)
    if ic.preset == "smooth":
        st = State(_diag_modes(basis, prm["u_amplitudes"]),
                   _diag_modes(basis, prm["v_amplitudes"]))
        if prm["magnitude"] is not None:
            st = scale_to_energy_norm(st, eq, prm["magnitude"])
        return st
    if ic.preset == "random_spectral":
        _, u = _random_field(basis, ic.seed, prm["sigma"], prm["ref_modes"], 0)
        _, v = _random_field(basis, ic.seed, prm["sigma"], prm["ref_modes"], 1)
        return State(prm["amplitude"] * u, prm["v_amplitude"] * v)
    # rough_velocity
    full, v = _random_field(basis, ic.seed, prm["sigma"], prm["ref_modes"], 1)
    c = prm["l2_norm"] / math.sqrt(basis.norm_weight * float(np.sum(full * full)))
    return State(_diag_modes(basis, prm["u_amplitudes"]), c * v)


def scale_to_energy_norm(state, eq, target, rtol=1e-12):
    """Rescale ``state`` by a common factor so that ``sqrt(energy_norm) == target``."""
    if target < 0:
        raise ValueError("target energy norm must be >= 0")
    if target == 0:
        return State.zero(eq.basis, state.t)

    def size(s):
        return math.sqrt(energy_norm(State(s * state.u, s * state.v), eq))

    if size(1.0) == 0:
        raise ValueError("cannot rescale a zero state to a positive energy norm")
    lo, hi = 0.0, 1.0
    while size(hi) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if size(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    s = 0.5 * (lo + hi)
    return State(s * state.u, s * state.v, state.t)


def slow_rate(D, K, gamma):
    """Decay rate of the slowest root of ``r^2 + gamma D r + K = 0``."""
    b = gamma * D
    disc = b * b - 4 * K
    if disc < 0:
        return b / 2
    return 2 * K / (b + math.sqrt(disc))


# -- shared helpers ---------------------------------------------------------------

def standard_table(traj, eq):
    """The per-sample series every experiment writes as ``timeseries``."""
    basis = eq.basis
    br = balance_residual(traj, eq)
    rows = np.empty((len(traj), len(SERIES_COLUMNS)))
    for i in range(len(traj)):
        st = traj.state(i)
        rep = energy_report(st, eq)
        rows[i] = (st.t, rep.total, rep.modified_total, energy_norm(st, eq),
                   basis.sobolev_norm(st.u, 1), basis.sobolev_norm(st.u, 2),
                   basis.sobolev_norm(st.v, 1),
                   basis.sobolev_norm(rhs_accel(st, eq), -1), br.residuals[i])
    return Table(SERIES_COLUMNS, rows)


def _run(config, eq, initial, dt=None, T=None, cadence=None, hook=None):
    tc = config.time
    return integrate(initial, eq, dt or tc.dt, tc.T if T is None else T,
                     cadence or tc.cadence, tc.scheme, tc.tol, tc.max_iter, hook=hook)


def _provenance(config, basis):
    return {
        "config_hash": config.config_hash(),
        "seed": config.initial.seed,
        "scheme": config.time.scheme,
        "dt": config.time.dt,
        "N": basis.N,
        "M": basis.M,
        "dim": basis.dim,
    }


def _opts(config, defaults):
    unknown = set(config.options) - set(defaults)
    if unknown:
        raise ValueError(f"unknown options for {config.experiment}: {sorted(unknown)}")
    out = dict(defaults)
    out.update(config.options)
    return out


def _xi_norm(traj, eq):
    return np.array([math.sqrt(energy_norm(traj.state(i), eq)) for i in range(len(traj))])


def _fit_dict(fit):
    return {"rate": fit.rate, "intercept": fit.intercept, "r_squared": fit.r_squared}


# -- dissipativity ------------------------------------------------------------------

DISSIPATIVITY_DEFAULTS = {
    "magnitudes": None,
    "fit_from": 0.25,
    "energy_slack": 1e-10,
    "band_tol": 0.1,
    "ball_radius": 1e-4,
    "modal_rate_tol": 0.05,
}


def run_dissipativity(config):
    """Energy decay (unforced, coercive) or entry into a common band (otherwise).

    With ``g = 0`` and ``C_f = 0`` the energy must be non-increasing and
    ``||xi||_E`` decays exponentially; the rate is fitted on ``t >= fit_from T``.
    For linear equations the fitted rate is compared with the slowest
    excited modal rate. With forcing (or ``C_f > 0``) and several
    ``magnitudes``, all runs must end in a band of relative width
    ``band_tol`` and approach their end state at a positive fitted rate.
    """
    opt = _opts(config, DISSIPATIVITY_DEFAULTS)
    basis, eq = build_setup(config)
    base = build_initial(config, basis, eq)
    mags = opt["magnitudes"]
    starts = [base] if not mags else [scale_to_energy_norm(base, eq, m) for m in mags]
    trajs = parallel_map(lambda st: _run(config, eq, st), starts)

    res = RunResult("dissipativity", provenance=_provenance(config, basis))
    res.tables["timeseries"] = standard_table(trajs[0], eq)
    t = trajs[0].t
    xis = [_xi_norm(tr, eq) for tr in trajs]
    if mags:
        cols = ("t",) + tuple(f"xi_E_{i}" for i in range(len(mags)))
        res.tables["magnitudes"] = Table(cols, np.column_stack([t] + xis))
        res.info["magnitudes"] = list(mags)

    unforced = not np.any(eq.g) and eq.nonlinearity.C_f == 0
    if unforced:
        worst = -math.inf
        for tr in trajs:
            E = np.array([energy_report(tr.state(i), eq).total for i in range(len(tr))])
            if len(E) > 1:
                worst = max(worst, float(np.max(np.diff(E))))
        worst = max(worst, 0.0) if worst != -math.inf else 0.0
        res.checks.append(Check("energy_monotone", worst <= opt["energy_slack"], worst,
                                opt["energy_slack"]))
        sel = t >= opt["fit_from"] * t[-1]
        y = xis[0][sel]
        if np.all(y == 0):
            res.checks.append(Check("decay_rate_positive", True, 0.0, 0.0,
                                    detail="zero trajectory"))
        else:
            fit = fit_decay(t[sel], y)
            res.fits["xi_E_decay"] = _fit_dict(fit)
            res.checks.append(Check("decay_rate_positive", fit.rate > 0, fit.rate, 0.0))
            if eq.is_linear:
                excited = (np.abs(base.u) + np.abs(base.v)) > 0
                rates = [slow_rate(D, K, eq.gamma) for D, K in
                         zip(eq.damping[excited], eq.stiffness[excited])]
                expect = min(rates)
                res.fits["modal_rate"] = {"rate": expect}
                err = abs(fit.rate - expect) / expect
                res.checks.append(Check("modal_rate_match", err <= opt["modal_rate_tol"], err,
                                        opt["modal_rate_tol"]))
        if mags and len(mags) > 1:
            entry = []
            for xi in xis:
                below = np.flatnonzero(xi < opt["ball_radius"])
                entry.append(float(t[below[0]]) if below.size else math.inf)
            res.info["ball_entry_times"] = entry
            all_in = all(np.isfinite(entry))
            res.checks.append(Check("ball_entry", all_in, float(max(entry)), float(t[-1])))
            order = [e for _, e in sorted(zip(mags, entry))]
            ordered = all(a <= b for a, b in zip(order, order[1:]))
            res.checks.append(Check("entry_time_ordering", ordered, float(ordered), 1.0))
    else:
        finals = np.array([xi[-1] for xi in xis])
        band = float(np.mean(finals))
        res.info["terminal_band"] = band
        if len(trajs) > 1:
            spread = float(finals.max() - finals.min())
            rel = spread / band if band > 0 else 0.0
            res.checks.append(Check("terminal_band", rel <= opt["band_tol"], rel,
                                    opt["band_tol"]))
        for i, tr in enumerate(trajs):
            uT, vT = tr.u[-1], tr.v[-1]
            half = t <= 0.5 * t[-1]
            dist = np.array([math.sqrt(basis.sobolev_norm(tr.u[j] - uT, 1) ** 2
                                       + basis.sobolev_norm(tr.v[j] - vT, 0) ** 2)
                             for j in np.flatnonzero(half)])
            keep = dist > 0
            if keep.sum() >= 10:
                fit = fit_decay(t[half][keep], dist[keep])
                res.fits[f"approach_{i}"] = _fit_dict(fit)
                res.checks.append(Check(f"approach_rate_positive_{i}", fit.rate > 0,
                                        fit.rate, 0.0))
    return res


# -- Lipschitz dependence ---------------------------------------------------------------

LIPSCHITZ_DEFAULTS = {
    "eps": [1e-2, 1e-3, 1e-4],
    "spread_factor": 2.0,
    "linear_spread": 1e-8,
    "bound_rtol": 1e-10,
}


def run_lipschitz(config):
    """Amplification ``m(T)/m(0)`` of ``m = ||w_t||^2_{H^-1} + ||w||^2_{H^1}``.

    Each ``eps`` perturbs ``u(0)`` by ``eps e_1``; the ratio must agree across
    ``eps`` within ``spread_factor`` (and to ``linear_spread`` for linear
    equations). The two-sided equivalence of ``E_-1`` and ``m`` is checked
    at every sample. ``K`` is fitted from the growth of ``m``.
    """
    opt = _opts(config, LIPSCHITZ_DEFAULTS)
    basis, eq = build_setup(config)
    base = build_initial(config, basis, eq)
    direction = basis.mode(1)
    eps = list(opt["eps"])
    starts = [base] + [State(base.u + e * direction, base.v) for e in eps]
    trajs = parallel_map(lambda st: _run(config, eq, st), starts)
    ref = trajs[0]

    res = RunResult("lipschitz", provenance=_provenance(config, basis))
    res.tables["timeseries"] = standard_table(ref, eq)
    k1, k2 = e_minus1_bounds(eq.gamma, basis.lambda1)
    cols, series, ratios = ["t"], [ref.t], {}
    bound_ok = True
    worst = 0.0
    for e, tr in zip(eps, trajs[1:]):
        mets = [diff_metrics(tr.state(i), ref.state(i), eq.gamma, basis) for i in range(len(tr))]
        m = np.array([d.m for d in mets])
        em1 = np.array([d.e_minus1 for d in mets])
        cols += [f"m_eps{e:g}", f"Em1_eps{e:g}"]
        series += [m, em1]
        tol = opt["bound_rtol"] * np.maximum(m, 1e-300)
        lo_ok = np.all(k1 * m - em1 <= tol)
        hi_ok = np.all(em1 - k2 * m <= tol)
        bound_ok &= bool(lo_ok and hi_ok)
        if m[0] > 0:
            worst = max(worst, float(np.max(np.abs(em1 / np.where(m > 0, m, 1)))))
            ratios[e] = float(m[-1] / m[0])
            pos = m > 0
            if pos.sum() >= 10:
                fit = fit_decay(tr.t[pos], m[pos])
                res.fits[f"K_eps{e:g}"] = {"K": -fit.rate, "r_squared": fit.r_squared}
    res.tables["lipschitz"] = Table(tuple(cols), np.column_stack(series))
    res.info["kappa"] = [k1, k2]
    res.info["ratios"] = {f"{e:g}": r for e, r in ratios.items()}
    res.checks.append(Check("e_minus1_equivalence", bound_ok, worst, k2))
    if len(ratios) >= 2:
        vals = np.array(list(ratios.values()))
        spread = float(vals.max() / vals.min())
        res.checks.append(Check("lipschitz_ratio_spread", spread <= opt["spread_factor"],
                                spread, opt["spread_factor"]))
        if eq.is_linear:
            res.checks.append(Check("linear_ratio_constancy", spread - 1 <= opt["linear_spread"],
                                    spread - 1, opt["linear_spread"]))
    return res


# -- smoothing --------------------------------------------------------------------------

SMOOTHING_DEFAULTS = {
    "probe_times": [0.01, 0.05, 0.1, 0.5, 1.0],
    "refine": True,
    "stability_tol": 0.02,
    "growth_min": 0.4,
    "blowup_window": 0.1,
    "modal_tol": 1e-6,
}


def _probe_run(config, eq, initial, probes):
    dt = config.time.dt
    targets = {n_steps(dt, tp): tp for tp in probes}
    got = {}

    def hook(n, state, mid):
        if n in targets:
            got[targets[n]] = state

    _run(config, eq, initial, T=max(probes), cadence=n_steps(dt, max(probes)), hook=hook)
    return [got[tp] for tp in probes]


def _refined(config):
    fine = copy.deepcopy(config)
    fine.grid.N = 2 * config.grid.N
    if config.grid.M is not None:
        fine.grid.M = 2 * config.grid.M
    return fine


def run_smoothing(config):
    """``||u_t(t)||_{H^1}`` at probe times for rough initial velocity.

    With ``refine`` the run is repeated at ``2N``: every probe value must
    change by at most ``stability_tol``; for the ``rough_velocity`` preset
    ``||u_t(0)||_{H^1}`` must also grow by at least ``growth_min``. The
    blow-up exponent ``k`` of ``||u_t(t)||_{H^1} ~ t^-k`` is fitted on probes
    ``t <= blowup_window``. For linear equations the probes are compared
    with the modal closed form.
    """
    opt = _opts(config, SMOOTHING_DEFAULTS)
    probes = sorted(float(x) for x in opt["probe_times"])
    configs = [config] + ([_refined(config)] if opt["refine"] else [])

    def one(cfg):
        basis, eq = build_setup(cfg)
        st0 = build_initial(cfg, basis, eq)
        states = _probe_run(cfg, eq, st0, probes)
        vals = [basis.sobolev_norm(s.v, 1) for s in states]
        return basis, eq, st0, vals

    out = parallel_map(one, configs)
    basis, eq, st0, vals = out[0]
    res = RunResult("smoothing", provenance=_provenance(config, basis))
    cols = ["t", f"h1_dtu_N{basis.N}"]
    data = [np.array([0.0] + probes), np.array([basis.sobolev_norm(st0.v, 1)] + vals)]
    res.info["h1_dtu0"] = {basis.N: data[1][0]}

    if len(out) > 1:
        b2, _, st2, vals2 = out[1]
        cols.append(f"h1_dtu_N{b2.N}")
        data.append(np.array([b2.sobolev_norm(st2.v, 1)] + vals2))
        res.info["h1_dtu0"][b2.N] = data[2][0]
        rel = [abs(a - b) / abs(b) if b != 0 else abs(a - b) for a, b in zip(vals, vals2)]
        finite = all(np.isfinite(vals + vals2))
        worst = float(max(rel)) if rel else 0.0
        res.info["probe_relative_change"] = dict(zip(probes, rel))
        res.checks.append(Check("probe_refinement_stability",
                                finite and worst <= opt["stability_tol"], worst,
                                opt["stability_tol"]))
        h0, h0f = data[1][0], data[2][0]
        growth = (h0f - h0) / h0 if h0 > 0 else 0.0
        res.info["initial_h1_growth"] = growth
        # only rough data must show the growth; it certifies v0 is outside H^1
        if config.initial.preset == "rough_velocity":
            res.checks.append(Check("initial_h1_growth", growth >= opt["growth_min"], growth,
                                    opt["growth_min"]))
    res.tables["probes"] = Table(tuple(cols), np.column_stack(data))

    small = [(tp, v) for tp, v in zip(probes, vals) if tp <= opt["blowup_window"] and v > 0]
    if len(small) >= 2:
        k, c = fit_power_law([a for a, _ in small], [b for _, b in small])
        res.fits["blowup"] = {"exponent": k, "prefactor": c, "implied_N": 2 * k}

    if eq.is_linear and np.array_equal(eq.damping, eq.stiffness) and not np.any(eq.g):
        exact = []
        for tp in probes:
            _, v = linear_modal_exact(st0.u, st0.v, eq.damping, eq.gamma, tp)
            exact.append(basis.sobolev_norm(v, 1))
        rel = max(abs(a - b) / b for a, b in zip(vals, exact) if b > 0)
        res.info["modal_probes"] = exact
        res.checks.append(Check("modal_probe_match", rel <= opt["modal_tol"], rel,
                                opt["modal_tol"], kind="numerical"))
    return res


# -- splitting -----------------------------------------------------------------------

SPLITTING_DEFAULTS = {
    "shift_L": None,
    "consistency_tol": 1e-6,
    "r2_min": 0.98,
    "linear_rate_tol": 0.05,
}


def default_shift(nonlinearity):
    """``C_hat + 1`` with ``C_hat`` the sampled lower-bound constant of ``f'``."""
    rep = validate_conditions(nonlinearity)
    C = 0.0 if math.isnan(rep.C_hat) else rep.C_hat
    return C + 1.0


def run_splitting(config):
    """Split ``u = v + w`` with ``w`` pseudoparabolic and ``v`` the decaying remainder.

    ``w`` solves ``-gamma Lap w_t - Lap w + L w + f(w) - div phi'(grad w) = h_u``
    from ``w(0) = 0`` with ``h_u = -u_tt + g + L u`` taken from the
    acceleration at each midpoint state of the ``u`` run; ``v`` solves the
    remainder equation from ``v(0) = u(0)`` independently. Checks: ``u = v + w``
    to ``consistency_tol`` (a numerical check), ``||w||_{H^2}`` not growing in
    the second half of the run, and exponential decay of ``||v||_{H^1}``.
    """
    opt = _opts(config, SPLITTING_DEFAULTS)
    basis, eq = build_setup(config)
    if eq.family != "main":
        raise ValueError("the splitting experiment needs the main family")
    L = opt["shift_L"] if opt["shift_L"] is not None else default_shift(eq.nonlinearity)
    st = build_initial(config, basis, eq)
    tc = config.time
    steps = n_steps(tc.dt, tc.T)
    if steps % tc.cadence:
        raise ValueError(f"cadence={tc.cadence} does not divide the step count {steps}")
    w = basis.zeros()
    rem = st.u.copy()
    samples = [(st.t, st.u, w, rem)]
    vs, diss = [st.v], [0.0]
    acc, rate = 0.0, eq.dissipation(st.v)
    for n in range(1, steps + 1):
        try:
            new, mid = step_midpoint(st, eq, tc.dt, tc.tol, tc.max_iter, return_mid=True)
            h = -rhs_accel(mid, eq) + eq.g + L * mid.u
            w_new = step_pseudoparabolic(w, tc.dt, L, h, eq, tc.tol, tc.max_iter)
            rem = step_pseudoparabolic(rem, tc.dt, L, None, eq, tc.tol, tc.max_iter,
                                       background=0.5 * (w + w_new))
        except NumericalFailure as exc:
            exc.t = st.t
            raise
        w = w_new
        st = State(new.u, new.v, n * tc.dt)
        new_rate = eq.dissipation(st.v)
        acc += 0.5 * tc.dt * (rate + new_rate)
        rate = new_rate
        if n % tc.cadence == 0:
            samples.append((st.t, st.u, w, rem))
            vs.append(st.v)
            diss.append(acc)

    t = np.array([s[0] for s in samples])
    gap = np.array([basis.sobolev_norm(s[1] - s[2] - s[3], 0) for s in samples])
    w_h2 = np.array([basis.sobolev_norm(s[2], 2) for s in samples])
    v_h1 = np.array([basis.sobolev_norm(s[3], 1) for s in samples])
    u_h1 = np.array([basis.sobolev_norm(s[1], 1) for s in samples])
    res = RunResult("splitting", provenance=_provenance(config, basis))
    traj = Trajectory(t, np.array([s[1] for s in samples]), np.array(vs), np.array(diss),
                      tc.dt, "midpoint")
    res.tables["timeseries"] = standard_table(traj, eq)
    res.info["shift_L"] = L
    res.tables["splitting"] = Table(("t", "u_h1", "w_h2", "v_h1", "consistency"),
                                    np.column_stack([t, u_h1, w_h2, v_h1, gap]))
    worst = float(gap.max())
    res.checks.append(Check("splitting consistency", worst <= opt["consistency_tol"], worst,
                            opt["consistency_tol"], kind="numerical"))
    first = t <= 0.5 * t[-1]
    late = float(w_h2[~first].max()) if np.any(~first) else 0.0
    early = float(w_h2[first].max())
    res.checks.append(Check("w_h2_bounded", late <= early, late, early))
    if np.all(v_h1 == 0):
        res.checks.append(Check("v_h1_decay", True, 0.0, 0.0, detail="zero trajectory"))
    else:
        fit = fit_decay(t, v_h1)
        res.fits["v_h1_decay"] = _fit_dict(fit)
        res.checks.append(Check("v_h1_decay", fit.rate > 0 and fit.r_squared >= opt["r2_min"],
                                fit.r_squared, opt["r2_min"],
                                detail=f"rate={fit.rate:.6g}"))
        if eq.nonlinearity.linear:
            lam = basis.eigenvalues[np.abs(samples[0][1]) > 0]
            expect = float(np.min((lam + L) / (eq.gamma * lam)))
            err = abs(fit.rate - expect) / expect
            res.fits["linear_rate"] = {"rate": expect}
            res.checks.append(Check("linear_rate_match", err <= opt["linear_rate_tol"], err,
                                    opt["linear_rate_tol"]))
    return res


# -- strong norm -------------------------------------------------------------------------

STRONG_DEFAULTS = {"limit_diagnostic": False}


def run_strong_norm(config):
    """No growth of ``||u||_{H^2}`` and ``||u_t||_{H^1}``.

    Each series passes when its max over ``[T/2, T]`` is at most its max
    over ``[0, T/2]``.

    With ``limit_diagnostic`` the integrals of ``||grad u||^6_{L^18}`` over
    unit time windows are reported as well.
    """
    opt = _opts(config, STRONG_DEFAULTS)
    basis, eq = build_setup(config)
    tr = _run(config, eq, build_initial(config, basis, eq))
    res = RunResult("strong_norm", provenance=_provenance(config, basis))
    res.tables["timeseries"] = standard_table(tr, eq)
    h2 = np.array([basis.sobolev_norm(u, 2) for u in tr.u])
    h1v = np.array([basis.sobolev_norm(v, 1) for v in tr.v])
    cols, data = ["t", "h2_u", "h1_dtu"], [tr.t, h2, h1v]
    if opt["limit_diagnostic"]:
        l18 = np.array([basis.lp_norm(_grad_magnitude(basis, u), 18) ** 6 for u in tr.u])
        cols.append("grad_L18_pow6")
        data.append(l18)
        windows = []
        t0 = tr.t[0]
        while t0 + 1 <= tr.t[-1] + 1e-12:
            sel = (tr.t >= t0 - 1e-12) & (tr.t <= t0 + 1 + 1e-12)
            windows.append(float(np.trapezoid(l18[sel], tr.t[sel])))
            t0 += 1
        res.info["grad_L18_pow6_windows"] = windows
    res.tables["strong"] = Table(tuple(cols), np.column_stack(data))
    first = tr.t <= 0.5 * tr.t[-1]
    for name, series in (("h2_u_no_growth", h2), ("h1_dtu_no_growth", h1v)):
        early = float(series[first].max())
        late = float(series[~first].max()) if np.any(~first) else 0.0
        res.checks.append(Check(name, late <= early, late, early))
    return res


# -- convergence ---------------------------------------------------------------------------

CONVERGENCE_DEFAULTS = {
    "mode": "dt",
    "dt_levels": 3,
    "order_target": 2.0,
    "order_tol": 0.2,
    "ratio_bounds": [3.6, 4.4],
    "N_list": [16, 32, 64],
    "N_ref": 128,
    "spectral_ratio": 10.0,
    "error_floor": 1e-13,
}


def _final_state(cfg, eq, initial):
    tr = _run(cfg, eq, initial, cadence=n_steps(cfg.time.dt, cfg.time.T))
    return tr.state(len(tr) - 1)


def _state_error(basis, a, b):
    return math.sqrt(basis.sobolev_norm(a.u - b.u, 1) ** 2 + basis.sobolev_norm(a.v - b.v, 0) ** 2)


def run_convergence(config):
    """Observed convergence in ``dt`` (order 2) and in ``N`` (spectral).

    ``dt`` mode: for linear equations with zero forcing the reference is the
    modal closed form and the observed order must be within ``order_tol`` of
    ``order_target``; otherwise successive differences of halved-``dt`` runs
    must shrink by a ratio in ``ratio_bounds``. ``N`` mode: each ``N`` in
    ``N_list`` is compared with ``N_ref`` on the shared modes (modes beyond
    ``N`` count as error), and the error must fall by ``spectral_ratio`` per
    doubling until it reaches ``error_floor``. Errors are measured in
    ``||u||_{H^1} + ||u_t||_{L^2}`` at ``T``.
    """
    opt = _opts(config, CONVERGENCE_DEFAULTS)
    if opt["mode"] not in ("dt", "N", "both"):
        raise ValueError(f"convergence mode must be dt, N or both, got {opt['mode']!r}")
    basis, eq = build_setup(config)
    res = RunResult("convergence", provenance=_provenance(config, basis))

    if opt["mode"] in ("dt", "both"):
        initial = build_initial(config, basis, eq)
        levels = int(opt["dt_levels"])
        oracle = (eq.is_linear and not np.any(eq.g)
                  and np.array_equal(eq.damping, eq.stiffness))
        n_runs = levels if oracle else levels + 1
        dts = [config.time.dt / 2 ** i for i in range(n_runs)]

        def at(dt):
            cfg = copy.deepcopy(config)
            cfg.time.dt = dt
            return _final_state(cfg, eq, initial)

        finals = parallel_map(at, dts)
        if oracle:
            u, v = linear_modal_exact(initial.u, initial.v, eq.damping, eq.gamma, config.time.T)
            ref = State(u, v)
            errs = [_state_error(basis, f, ref) for f in finals]
        else:
            errs = [_state_error(basis, finals[i], finals[i + 1]) for i in range(levels)]
            dts = dts[:levels]
        ratios = [a / b for a, b in zip(errs, errs[1:])]
        orders = [math.log2(r) for r in ratios]
        res.tables["dt_convergence"] = Table(("dt", "error"), np.column_stack([dts, errs]))
        res.info["dt_ratios"] = ratios
        res.fits["dt_order"] = {"orders": orders}
        if oracle:
            worst = max(abs(o - opt["order_target"]) for o in orders)
            res.checks.append(Check("dt_order", worst <= opt["order_tol"], worst,
                                    opt["order_tol"]))
        else:
            lo, hi = opt["ratio_bounds"]
            ok = all(lo <= r <= hi for r in ratios)
            res.checks.append(Check("dt_ratio", ok, min(ratios) if ok else
                                    (min(ratios) if min(ratios) < lo else max(ratios)), hi))

    if opt["mode"] in ("N", "both"):
        Ns = list(opt["N_list"]) + [opt["N_ref"]]

        def final_at(N):
            cfg = copy.deepcopy(config)
            cfg.grid.N = N
            if config.grid.M is not None:
                cfg.grid.M = max(math.ceil(3 * N / 2), round(config.grid.M * N / config.grid.N))
            b, e = build_setup(cfg)
            return b, _final_state(cfg, e, build_initial(cfg, b, e))

        runs = parallel_map(final_at, Ns)
        bref, ref = runs[-1]
        errs = []
        for b, st in runs[:-1]:
            sl = (slice(0, b.N),) * b.dim
            du, dv = ref.u.copy(), ref.v.copy()
            du[sl] -= st.u
            dv[sl] -= st.v
            errs.append(math.sqrt(bref.sobolev_norm(du, 1) ** 2 + bref.sobolev_norm(dv, 0) ** 2))
        ratios = [a / max(b, opt["error_floor"]) for a, b in zip(errs, errs[1:])]
        res.tables["N_convergence"] = Table(("N", "error"),
                                            np.column_stack([Ns[:-1], errs]))
        res.info["N_ratios"] = ratios
        ok = all(r >= opt["spectral_ratio"] or b <= opt["error_floor"]
                 for r, b in zip(ratios, errs[1:]))
        res.checks.append(Check("spectral_convergence", ok, min(ratios) if ratios else math.inf,
                                opt["spectral_ratio"]))
    return res


EXPERIMENTS = {
    "dissipativity": run_dissipativity,
    "lipschitz": run_lipschitz,
    "smoothing": run_smoothing,
    "splitting": run_splitting,
    "strong_norm": run_strong_norm,
    "convergence": run_convergence,
}


OPTION_DEFAULTS = {
    "dissipativity": DISSIPATIVITY_DEFAULTS,
    "lipschitz": LIPSCHITZ_DEFAULTS,
    "smoothing": SMOOTHING_DEFAULTS,
    "splitting": SPLITTING_DEFAULTS,
    "strong_norm": STRONG_DEFAULTS,
    "convergence": CONVERGENCE_DEFAULTS,
}


def validate_config(config):
    """Check every precondition of ``config`` without integrating.

    Raises ``ValueError`` naming the failing operation.
    """
    if config.experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {config.experiment!r}; "
                         f"expected one of {sorted(EXPERIMENTS)}")
    basis, eq = build_setup(config)
    build_initial(config, basis, eq)
    opt = _opts(config, OPTION_DEFAULTS[config.experiment])
    tc = config.time
    if tc.scheme not in ("midpoint", "imex", "rk4_oracle"):
        raise ValueError(f"integrate: unknown scheme {tc.scheme!r}")
    if not tc.dt > 0 or not tc.T > 0:
        raise ValueError("integrate: needs dt > 0 and T > 0")
    if isinstance(tc.cadence, bool) or not isinstance(tc.cadence, int) or tc.cadence < 1:
        raise ValueError(f"integrate: cadence must be a positive integer, got {tc.cadence!r}")
    steps = n_steps(tc.dt, tc.T)
    if steps % tc.cadence:
        raise ValueError(f"integrate: cadence={tc.cadence} does not divide the step count {steps}")
    samples = steps // tc.cadence + 1
    if config.experiment == "splitting" and samples < 10:
        raise ValueError(f"run_splitting: the decay fit needs >= 10 samples, T/dt/cadence "
                         f"gives {samples}")
    if config.experiment == "dissipativity":
        tail = sum(1 for i in range(samples)
                   if i * tc.cadence * tc.dt >= opt["fit_from"] * tc.T - 1e-12 * tc.T)
        if tail < 10:
            raise ValueError(f"run_dissipativity: the decay fit on t >= {opt['fit_from']} T "
                             f"needs >= 10 samples, got {tail}")
    if config.experiment == "smoothing":
        for tp in opt["probe_times"]:
            if not 0 < tp <= tc.T:
                raise ValueError(f"run_smoothing: probe time {tp} outside (0, T]")
            n_steps(tc.dt, tp)
    if config.experiment == "splitting":
        if eq.family != "main":
            raise ValueError("run_splitting: needs the main family")
        if tc.scheme != "midpoint":
            raise ValueError("run_splitting: the splitting is built on the midpoint scheme")
    if config.experiment == "lipschitz" and any(e < 0 for e in opt["eps"]):
        raise ValueError("run_lipschitz: perturbation sizes must be >= 0")
    if config.experiment == "dissipativity" and opt["magnitudes"]:
        if any(m <= 0 for m in opt["magnitudes"]):
            raise ValueError("run_dissipativity: magnitudes must be > 0")
    if config.experiment == "convergence":
        if opt["mode"] not in ("dt", "N", "both"):
            raise ValueError(f"run_convergence: mode must be dt, N or both, got {opt['mode']!r}")
        if opt["mode"] != "N" and int(opt["dt_levels"]) < 2:
            raise ValueError("run_convergence: dt_levels must be >= 2")
        if opt["mode"] != "dt" and any(N >= opt["N_ref"] for N in opt["N_list"]):
            raise ValueError("run_convergence: every N in N_list must be below N_ref")


def run_experiment(config):
    validate_config(config)
    return EXPERIMENTS[config.experiment](config)
