"""
Energy functionals and trajectory diagnostics.

All potentials are integrated with the same grid quadrature that the
pseudo-spectral nonlinear terms use, which makes the semi-discrete energy
identity ``dE/dt = -gamma (D v, v)`` exact; the residual measured by
:func:`balance_residual` is therefore purely time-discretization error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nonlinearity import F_eval, membrane_Phi, phi_eval

__all__ = [
    "EnergyReport", "DiffMetrics", "BalanceResult", "DecayFit",
    "default_alpha", "energy_report", "energy_norm", "diff_metrics",
    "e_minus1_bounds", "balance_residual", "fit_decay", "fit_power_law",
    "lyapunov_lower_bound",
]


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    dirichlet: float
    phi_potential: float
    f_potential: float
    forcing: float
    total: float
    modified_total: float
    alpha_used: float


@dataclass(frozen=True)
class DiffMetrics:
    """Norms of the difference ``w = uA - uB`` of two states.

    ``h1 = ||grad w||``, ``hm1_dt = ||w_t||_{H^-1}``, ``l2 = ||w||`` and
    ``e_minus1 = gamma/2 h1^2 + (w_t, w) + 2/gamma (hm1_dt^2 + l2^2)``.
    """

    h1: float
    hm1_dt: float
    l2: float
    e_minus1: float

    @property
    def m(self):
        """``||w_t||^2_{H^-1} + ||w||^2_{H^1}``."""
        return self.hm1_dt ** 2 + self.h1 ** 2


@dataclass(frozen=True)
class BalanceResult:
    residuals: np.ndarray
    max_abs: float


@dataclass(frozen=True)
class DecayFit:
    rate: float
    intercept: float
    r_squared: float


def default_alpha(eq):
    """Weight of the ``alpha u`` multiplier: ``min(gamma, 1) D_1 / 4``.

    For the main family this is ``min(gamma lam_1 / 4, lam_1 / 4)``, small
    enough that ``(D v, v) >= 2 alpha ||v||^2`` on every resolved mode.
    """
    d1 = float(np.min(eq.damping))
    return min(eq.gamma * d1 / 4, d1 / 4)


def _grad_magnitude(basis, u):
    grad = basis.grad_to_grid(u)
    if basis.dim == 1:
        return np.abs(grad[0])
    return np.sqrt(sum(g * g for g in grad))


def energy_report(state, eq, alpha=None):
    """Evaluate the energy of ``state`` and its modified (Lyapunov) version.

    For the membrane family the ``dirichlet`` slot holds ``1/2 ||Lap u||^2``
    and ``phi_potential`` the stress potential of ``Lap u``; for the
    Kirchhoff family ``phi_potential`` is ``1/2 int_0^s Phi`` with
    ``s = ||grad u||^2``.
    """
    basis = eq.basis
    nl = eq.nonlinearity
    if alpha is None:
        alpha = default_alpha(eq)
    if alpha < 0:
        raise ValueError("energy_report: alpha must be >= 0")
    u, v = basis.check(state.u, "u"), basis.check(state.v, "v")

    kinetic = 0.5 * basis.sobolev_norm(v, 0) ** 2
    phi_pot = 0.0
    if eq.family == "membrane":
        dirichlet = 0.5 * basis.sobolev_norm(u, 2) ** 2
        if nl.phi_kind != "zero":
            lap = basis.to_grid(-basis.laplacian_pow(u, 1))
            phi_pot = basis.integrate(membrane_Phi(lap, nl))
    else:
        dirichlet = 0.5 * basis.sobolev_norm(u, 1) ** 2
        if eq.family == "main" and nl.phi_kind != "zero":
            if basis.dim == 1:
                dens = phi_eval(basis.grad_to_grid(u)[0], nl)
            else:
                dens = phi_eval(np.stack(basis.grad_to_grid(u)), nl, vector=True)
            phi_pot = basis.integrate(dens)
        elif eq.family == "kirchhoff" and eq.kirchhoff_coeff != 0:
            s = 2 * dirichlet
            m = eq.kirchhoff_m
            phi_pot = 0.5 * eq.kirchhoff_coeff * s ** (m + 1) / (m + 1)
    f_pot = basis.integrate(F_eval(basis.to_grid(u), nl)) if nl.f_kind != "zero" else 0.0
    forcing = -basis.inner(eq.g, u)
    total = kinetic + dirichlet + phi_pot + f_pot + forcing
    damp_u = basis.norm_weight * float(np.sum(eq.damping * u * u))
    modified = total + alpha * eq.gamma / 2 * damp_u + alpha * basis.inner(v, u)
    return EnergyReport(kinetic, dirichlet, phi_pot, f_pot, forcing, total, modified,
                        float(alpha))


def energy_norm(state, eq):
    """The squared energy "norm" ``||v||^2 + ||grad u||^{p+1}_{p+1} + ||u||^{q+2}_{q+2}``.

    Not a norm (the exponents are not 2); the squared sum is returned. With
    ``phi`` switched off the gradient term uses exponent 2, and with ``f``
    switched off the last term is dropped. The membrane family uses
    ``Lap u`` in place of ``grad u``; Kirchhoff and structural families use
    ``||grad u||^2``.
    """
    basis = eq.basis
    nl = eq.nonlinearity
    u, v = basis.check(state.u, "u"), basis.check(state.v, "v")
    out = basis.sobolev_norm(v, 0) ** 2
    r = nl.p + 1 if (nl.phi_kind == "power" and eq.family in ("main", "membrane")) else 2
    if eq.family == "membrane":
        out += basis.lp_norm(basis.to_grid(basis.laplacian_pow(u, 1)), r) ** r
    elif r == 2:
        out += basis.sobolev_norm(u, 1) ** 2
    else:
        out += basis.lp_norm(_grad_magnitude(basis, u), r) ** r
    if nl.f_kind == "power":
        out += basis.lp_norm(basis.to_grid(u), nl.q + 2) ** (nl.q + 2)
    return out


def diff_metrics(state_a, state_b, gamma, basis):
    """Difference metrics of two states sharing ``basis``."""
    w = basis.check(state_a.u, "uA") - basis.check(state_b.u, "uB")
    wt = basis.check(state_a.v, "vA") - basis.check(state_b.v, "vB")
    h1 = basis.sobolev_norm(w, 1)
    hm1 = basis.sobolev_norm(wt, -1)
    l2 = basis.sobolev_norm(w, 0)
    e = gamma / 2 * h1 ** 2 + basis.inner(wt, w) + 2 / gamma * (hm1 ** 2 + l2 ** 2)
    return DiffMetrics(h1, hm1, l2, e)


def e_minus1_bounds(gamma, lambda1):
    """Constants ``k1, k2`` with ``k1 m <= E_-1 <= k2 m`` on every sine field.

    Per mode, in the scaled variables ``x = sqrt(lam) w``, ``y = w_t / sqrt(lam)``,
    ``E_-1`` is the quadratic form ``[[gamma/2 + 2/(gamma lam), 1/2], [1/2, 2/gamma]]``
    and ``m = x^2 + y^2``. Its smallest eigenvalue is increasing in the top-left
    entry, so ``k1`` is its limit as ``lam -> inf`` and ``k2`` the largest
    eigenvalue at ``lam_1``.
    """
    def eig(a, b):
        mean, rad = (a + b) / 2, math.hypot((a - b) / 2, 0.5)
        return mean - rad, mean + rad

    k1, _ = eig(gamma / 2, 2 / gamma)
    _, k2 = eig(gamma / 2 + 2 / (gamma * lambda1), 2 / gamma)
    return k1, k2


def balance_residual(trajectory, eq):
    """Discrete energy balance ``E(t_{n+1}) - E(t_n) + int gamma (D v, v) dt``.

    The dissipation integral is the per-step trapezoid sum accumulated by
    :func:`qsdw.integrator.integrate`. The first entry (no interval) is 0.
    """
    E = np.array([energy_report(trajectory.state(i), eq, alpha=0.0).total
                  for i in range(len(trajectory))])
    r = np.zeros(len(E))
    r[1:] = np.diff(E) + np.diff(trajectory.dissipated)
    return BalanceResult(r, float(np.max(np.abs(r))) if len(r) else 0.0)


def fit_decay(t, y):
    """Least-squares line through ``(t, log y)``; ``rate = -slope``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("fit_decay: t and y must be 1-d arrays of equal length")
    if len(t) < 10:
        raise ValueError(f"fit_decay: need >= 10 samples, got {len(t)}")
    bad = np.flatnonzero(~(y > 0))
    if bad.size:
        raise ValueError(f"fit_decay: non-positive sample at index {int(bad[0])}")
    ly = np.log(y)
    slope, intercept = np.polyfit(t, ly, 1)
    resid = ly - (slope * t + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    # a constant series is fitted exactly
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, float(np.sum(ly ** 2))) else 1.0 - ss_res / ss_tot
    return DecayFit(float(-slope), float(intercept), r2)


def fit_power_law(t, y):
    """Fit ``y ~ c t^(-k)``; returns ``(k, c)``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, icpt = np.polyfit(np.log(t), np.log(y), 1)
    return float(-slope), float(math.exp(icpt))


def lyapunov_lower_bound(states, eq):
    """Fit ``beta, C`` with ``beta X - C (1 + ||g||^2) <= modified energy`` on samples.

    ``X = ||v||^2 + ||grad u||^{p+1}_{p+1} + ||u||^{q+1}_{q+1}``. ``C`` is the
    smallest value making the bound hold at ``X = 0`` up to the most negative
    modified energy observed, and ``beta`` the largest slope compatible
    with every sample. Returns ``(beta, C)``.
    """
    basis = eq.basis
    nl = eq.nonlinearity
    g2 = basis.sobolev_norm(eq.g, 0) ** 2
    X, Y = [], []
    for st in states:
        x = basis.sobolev_norm(st.v, 0) ** 2
        if nl.phi_kind == "power" and eq.family == "main":
            x += basis.lp_norm(_grad_magnitude(basis, st.u), nl.p + 1) ** (nl.p + 1)
        else:
            x += basis.sobolev_norm(st.u, 1) ** 2
        if nl.f_kind == "power":
            x += basis.lp_norm(basis.to_grid(st.u), nl.q + 1) ** (nl.q + 1)
        X.append(x)
        Y.append(energy_report(st, eq).modified_total)
    X, Y = np.array(X), np.array(Y)
    C = max(0.0, -float(Y.min())) / (1 + g2) + 1.0
    pos = X > 0
    beta = float(np.min((Y[pos] + C * (1 + g2)) / X[pos])) if np.any(pos) else float("inf")
    return beta, C
