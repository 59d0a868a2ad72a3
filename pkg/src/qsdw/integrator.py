"""
Time integration of the first-order system ``u' = v``, ``v' = a(u, v)``.

Every equation family splits its acceleration as

.. math::

    a(u, v) = -\\gamma D v - K u + \\mathcal N(u)

with ``D`` and ``K`` diagonal in the sine basis (damping and stiffness) and
``N`` the nonlinear force plus forcing. The stiff linear part is always
treated exactly or implicitly per mode; only ``N`` is iterated (implicit
midpoint) or extrapolated (IMEX).

=============  ===============  ===============  ===================================
family         D                K                N(u)
=============  ===============  ===============  ===================================
main           lambda           lambda           div phi'(grad u) - f(u) + g
kirchhoff      lambda           lambda           -Phi(|grad u|^2) (-Lap) u - f(u) + g
membrane       lambda^2         lambda^2         -Lap psi(Lap u) - f(u) + g
structural     lambda^alpha     lambda           -f(u) + g
=============  ===============  ===============  ===================================
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceError, NonFiniteError, NumericalFailure
from .nonlinearity import NonlinearitySpec, f_eval, membrane_phi, phi_prime
from .spectral import Basis

__all__ = [
    "State", "EquationSpec", "Trajectory",
    "rhs_accel", "nonlinear_force", "linear_modal_exact",
    "step_midpoint", "step_imex", "step_rk4", "step_pseudoparabolic",
    "integrate",
]

FAMILIES = ("main", "kirchhoff", "membrane", "structural")
SCHEMES = ("midpoint", "imex", "rk4_oracle")


@dataclass(frozen=True)
class State:
    """Phase-space point ``(u, du/dt)`` at time ``t`` (sine coefficients)."""

    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    @classmethod
    def zero(cls, basis, t=0.0):
        return cls(basis.zeros(), basis.zeros(), t)


@dataclass(frozen=True, eq=False)
class EquationSpec:
    """One member of the strongly damped wave family on a fixed basis.

    ``kirchhoff_coeff * s**kirchhoff_m`` is the nonlocal stiffness of the
    Kirchhoff family; a zero coefficient switches it off.
    """

    basis: Basis
    family: str = "main"
    gamma: float = 1.0
    alpha: float = 1.0
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    kirchhoff_m: float = 1.0
    kirchhoff_coeff: float = 1.0
    g: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.family == "structural" and not 0.5 <= self.alpha <= 1.0:
            raise ValueError(f"structural damping needs alpha in [1/2, 1], got {self.alpha}")
        if self.family == "kirchhoff" and (self.kirchhoff_m < 1 or self.kirchhoff_coeff < 0):
            raise ValueError("kirchhoff needs m >= 1 and a non-negative coefficient")
        g = self.basis.zeros() if self.g is None else self.basis.check(self.g, "forcing g")
        object.__setattr__(self, "g", g)
        lam = self.basis.eigenvalues
        if self.family == "membrane":
            D = K = lam ** 2
        elif self.family == "structural":
            D, K = (lam if self.alpha == 1 else lam ** self.alpha), lam
        else:
            D = K = lam
        object.__setattr__(self, "damping", D)
        object.__setattr__(self, "stiffness", K)

    def with_(self, **changes):
        return replace(self, **changes)

    @property
    def is_linear(self):
        """True when the nonlinear force does not depend on ``u``."""
        nl = self.nonlinearity
        if self.family == "kirchhoff":
            return nl.f_kind == "zero" and self.kirchhoff_coeff == 0
        if self.family == "structural":
            return nl.f_kind == "zero"
        return nl.linear

    def dissipation(self, v):
        """Energy dissipation rate ``gamma (D v, v)``."""
        return self.gamma * self.basis.norm_weight * float(np.sum(self.damping * v * v))


def _finite(values, what):
    if not np.all(np.isfinite(values)):
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
        raise NonFiniteError(f"non-finite {what} at grid index {idx}", index=idx)
    return values


def _pointwise_f(u, eq):
    with np.errstate(over="ignore", invalid="ignore"):
        vals = f_eval(eq.basis.to_grid(u), eq.nonlinearity)
    return eq.basis.to_spectral(_finite(vals, "f(u)"))


def _div_phi_prime(u, eq):
    basis = eq.basis
    grad = basis.grad_to_grid(u)
    with np.errstate(over="ignore", invalid="ignore"):
        if basis.dim == 1:
            flux = [phi_prime(grad[0], eq.nonlinearity)]
        else:
            flux = list(phi_prime(np.stack(grad), eq.nonlinearity, vector=True))
    for comp in flux:
        _finite(comp, "phi'(grad u)")
    return basis.div_from_grid(flux)


def nonlinear_force(u, eq):
    """``N(u)``: everything in the acceleration except ``-gamma D v - K u``."""
    nl = eq.nonlinearity
    basis = eq.basis
    out = eq.g.copy()
    if nl.f_kind != "zero":
        out -= _pointwise_f(u, eq)
    if eq.family == "main":
        if nl.phi_kind != "zero":
            out += _div_phi_prime(u, eq)
    elif eq.family == "kirchhoff":
        if eq.kirchhoff_coeff != 0:
            s = basis.sobolev_norm(u, 1) ** 2
            out -= eq.kirchhoff_coeff * s ** eq.kirchhoff_m * basis.laplacian_pow(u, 1)
    elif eq.family == "membrane":
        if nl.phi_kind != "zero":
            lap = basis.to_grid(-basis.laplacian_pow(u, 1))
            with np.errstate(over="ignore", invalid="ignore"):
                stress = _finite(membrane_phi(lap, nl), "phi(Lap u)")
            # -Lap(stress) = (-Lap) stress
            out += basis.laplacian_pow(basis.to_spectral(stress), 1)
    return out


def rhs_accel(state, eq):
    """Acceleration ``d^2u/dt^2`` of the family at ``state``."""
    u = eq.basis.check(state.u, "u")
    v = eq.basis.check(state.v, "v")
    return -eq.gamma * eq.damping * v - eq.stiffness * u + nonlinear_force(u, eq)


# -- closed-form linear modes -------------------------------------------------

def linear_modal_exact(u0, v0, lam, gamma, t):
    """Exact solution of ``u'' + gamma lam u' + lam u = 0`` (elementwise).

    Handles distinct real, repeated and complex characteristic roots
    ``r = (-gamma lam +- sqrt(gamma^2 lam^2 - 4 lam)) / 2``.
    """
    u0, v0, lam = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (u0, v0, lam)))
    gamma = float(gamma)
    b = gamma * lam
    disc = b * b - 4 * lam
    u = np.empty(u0.shape)
    v = np.empty(u0.shape)
    scale = np.maximum(b * b, 4 * lam)
    rep = np.abs(disc) <= 1e-14 * scale
    over = (disc > 0) & ~rep
    under = (disc < 0) & ~rep

    if np.any(rep):
        r = -b[rep] / 2
        c1 = u0[rep]
        c2 = v0[rep] - r * c1
        e = np.exp(r * t)
        u[rep] = (c1 + c2 * t) * e
        v[rep] = (r * (c1 + c2 * t) + c2) * e
    if np.any(over):
        sq = np.sqrt(disc[over])
        bb = b[over]
        # stable root pair: r_fast from the sum, r_slow = lam / r_fast
        r_fast = -(bb + sq) / 2
        r_slow = lam[over] / r_fast
        uo, vo = u0[over], v0[over]
        den = r_slow - r_fast
        cs = (vo - r_fast * uo) / den
        cf = (r_slow * uo - vo) / den
        es, ef = np.exp(r_slow * t), np.exp(r_fast * t)
        u[over] = cs * es + cf * ef
        v[over] = cs * r_slow * es + cf * r_fast * ef
    if np.any(under):
        sig = -b[under] / 2
        om = np.sqrt(-disc[under]) / 2
        uo, vo = u0[under], v0[under]
        c2 = (vo - sig * uo) / om
        e = np.exp(sig * t)
        cs, sn = np.cos(om * t), np.sin(om * t)
        u[under] = e * (uo * cs + c2 * sn)
        v[under] = e * ((sig * uo + om * c2) * cs + (sig * c2 - om * uo) * sn)
    return u, v


# -- steppers -------------------------------------------------------------

def _rel_close(diff, ref, tol):
    return math.isfinite(ref) and diff <= tol * max(1.0, ref)


def _diverged(name, k, resid):
    return ConvergenceError(f"{name}: fixed-point iteration diverged at iteration {k + 1} "
                            f"(residual {resid:.3e})", residual=resid)


def step_midpoint(state, eq, dt, tol=1e-12, max_iter=50, return_mid=False):
    """One implicit-midpoint step.

    The midpoint velocity ``w = (v0 + v1) / 2`` solves, mode by mode,

    ``(2 + dt gamma D + dt^2 K / 2) w = 2 v0 - dt K u0 + dt N(u0 + dt w / 2)``

    which is iterated as a fixed point with the diagonal left side inverted.
    Raises :class:`ConvergenceError` if successive iterates still differ
    by more than ``tol`` (relative to ``max(1, norm)``) after ``max_iter``.
    """
    if not dt > 0 or not tol > 0:
        raise ValueError("step_midpoint needs dt > 0 and tol > 0")
    basis = eq.basis
    u0, v0 = state.u, state.v
    denom = 2.0 + dt * eq.gamma * eq.damping + 0.5 * dt * dt * eq.stiffness
    base = 2.0 * v0 - dt * eq.stiffness * u0
    w = v0
    if eq.is_linear:
        w = (base + dt * nonlinear_force(u0, eq)) / denom
    else:
        resid = float("inf")
        for k in range(max_iter):
            um = u0 + 0.5 * dt * w
            try:
                w_new = (base + dt * nonlinear_force(um, eq)) / denom
                with np.errstate(over="ignore", invalid="ignore"):
                    dv = basis.sobolev_norm(w_new - w, 0)
                    ref_v = basis.sobolev_norm(w_new, 0)
                    ref_u = basis.sobolev_norm(u0 + 0.5 * dt * w_new, 0)
            except NonFiniteError:
                if k == 0:
                    raise
                raise _diverged("step_midpoint", k, math.inf) from None
            if not (math.isfinite(dv) and math.isfinite(ref_v) and math.isfinite(ref_u)):
                raise _diverged("step_midpoint", k, math.inf)
            du = 0.5 * dt * dv
            resid = dv / max(1.0, ref_v)
            w = w_new
            if _rel_close(dv, ref_v, tol) and _rel_close(du, ref_u, tol):
                break
        else:
            raise ConvergenceError(
                f"step_midpoint: fixed point not converged in {max_iter} iterations "
                f"(residual {resid:.3e}); dt={dt} too large for the nonlinear contraction",
                residual=resid)
    new = State(u0 + dt * w, 2.0 * w - v0, state.t + dt)
    if return_mid:
        return new, State(u0 + 0.5 * dt * w, w, state.t + 0.5 * dt)
    return new


def step_imex(state, eq, dt, history=None, tol=1e-12, max_iter=50):
    """Crank-Nicolson (linear part) / Adams-Bashforth 2 (nonlinear part) step.

    ``history`` is the nonlinear force at the previous step, as returned by
    the previous call. With ``history=None`` the step is a midpoint step
    (multistep startup). Returns ``(new_state, history)``.
    """
    n_now = nonlinear_force(state.u, eq)
    if history is None:
        return step_midpoint(state, eq, dt, tol, max_iter), n_now
    u0, v0 = state.u, state.v
    denom = 2.0 + dt * eq.gamma * eq.damping + 0.5 * dt * dt * eq.stiffness
    n_ex = 1.5 * n_now - 0.5 * history
    w = (2.0 * v0 - dt * eq.stiffness * u0 + dt * n_ex) / denom
    return State(u0 + dt * w, 2.0 * w - v0, state.t + dt), n_now


def step_rk4(state, eq, dt):
    """Classical explicit RK4; an oracle for small ``dt`` only (stiff)."""
    def rhs(u, v):
        return v, rhs_accel(State(u, v), eq)

    u, v = state.u, state.v
    k1u, k1v = rhs(u, v)
    k2u, k2v = rhs(u + 0.5 * dt * k1u, v + 0.5 * dt * k1v)
    k3u, k3v = rhs(u + 0.5 * dt * k2u, v + 0.5 * dt * k2v)
    k4u, k4v = rhs(u + dt * k3u, v + dt * k3v)
    return State(u + dt / 6 * (k1u + 2 * k2u + 2 * k3u + k4u),
                 v + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v),
                 state.t + dt)


def internal_force(w, eq):
    """``f(w) - div phi'(grad w)`` (main family, without forcing)."""
    out = eq.basis.zeros()
    if eq.nonlinearity.f_kind != "zero":
        out += _pointwise_f(w, eq)
    if eq.nonlinearity.phi_kind != "zero":
        out -= _div_phi_prime(w, eq)
    return out


def step_pseudoparabolic(w, dt, L_shift, h, eq, tol=1e-12, max_iter=50, background=None):
    """One implicit-midpoint step of the pseudoparabolic equation

    ``-gamma Lap w_t - Lap w + L w + f(w) - div phi'(grad w) = h``

    i.e. ``gamma lam w_t = -(lam + L) w - [f(w) - div phi'(grad w)] + h`` per
    mode. ``h`` is the forcing at the midpoint time. With ``background=b``
    the nonlinearity is replaced by its increment ``F(w + b) - F(b)``, which
    is the remainder equation of the splitting; ``b`` is then the
    background's midpoint value.
    """
    basis = eq.basis
    w0 = basis.check(w, "w")
    lam = basis.eigenvalues
    glam = eq.gamma * lam
    denom = 2.0 * glam + dt * (lam + L_shift)
    base = 2.0 * glam * w0 + dt * (basis.zeros() if h is None else h)
    nl = eq.nonlinearity

    if background is None:
        def force(x):
            return internal_force(x, eq)
    else:
        f_b = internal_force(background, eq)

        def force(x):
            return internal_force(x + background, eq) - f_b

    if nl.linear:
        wm = base / denom
    else:
        wm = w0
        resid = float("inf")
        for k in range(max_iter):
            try:
                wm_new = (base - dt * force(wm)) / denom
                with np.errstate(over="ignore", invalid="ignore"):
                    diff = basis.sobolev_norm(wm_new - wm, 0)
                    ref = basis.sobolev_norm(wm_new, 0)
            except NonFiniteError:
                if k == 0:
                    raise
                raise _diverged("step_pseudoparabolic", k, math.inf) from None
            if not (math.isfinite(diff) and math.isfinite(ref)):
                raise _diverged("step_pseudoparabolic", k, math.inf)
            resid = diff / max(1.0, ref)
            wm = wm_new
            if _rel_close(diff, ref, tol):
                break
        else:
            raise ConvergenceError(
                f"step_pseudoparabolic: fixed point not converged in {max_iter} "
                f"iterations (residual {resid:.3e})", residual=resid)
    return 2.0 * wm - w0


# -- driver -------------------------------------------------------------------

@dataclass
class Trajectory:
    """Sampled states of one run.

    ``dissipated[i]`` is the trapezoid-rule integral of ``gamma (D v, v)``
    from 0 to ``t[i]``, accumulated at every step (not only at samples).
    """

    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    dissipated: np.ndarray
    dt: float
    scheme: str

    def __len__(self):
        return len(self.t)

    def state(self, i):
        return State(self.u[i], self.v[i], float(self.t[i]))

    def states(self):
        return [self.state(i) for i in range(len(self))]


def n_steps(dt, T):
    n = T / dt
    m = int(round(n))
    if abs(n - m) > 1e-9 * max(1.0, n):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return m


def integrate(initial, eq, dt, T, cadence=1, scheme="midpoint", tol=1e-12, max_iter=50,
              hook=None):
    """Advance ``initial`` to time ``initial.t + T``, sampling every ``cadence`` steps.

    ``hook(step_index, state, mid_state)`` is called after every step when
    given (``mid_state`` is the midpoint state for the midpoint scheme, else
    ``None``). Deterministic for fixed inputs. Numerical failures are
    re-raised with the failing time attached.
    """
    if T < 0 or not dt > 0:
        raise ValueError("integrate needs T >= 0 and dt > 0")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    steps = n_steps(dt, T)
    if cadence < 1 or steps % cadence:
        raise ValueError(f"cadence={cadence} does not divide the step count {steps}")
    basis = eq.basis
    state = State(basis.check(initial.u, "u").copy(), basis.check(initial.v, "v").copy(),
                  float(initial.t))
    n_samples = steps // cadence + 1
    ts = np.empty(n_samples)
    us = np.empty((n_samples,) + basis.shape)
    vs = np.empty((n_samples,) + basis.shape)
    diss = np.empty(n_samples)
    ts[0], us[0], vs[0], diss[0] = state.t, state.u, state.v, 0.0
    acc = 0.0
    rate = eq.dissipation(state.v)
    history = None
    for n in range(1, steps + 1):
        mid = None
        try:
            if scheme == "midpoint":
                new, mid = step_midpoint(state, eq, dt, tol, max_iter, return_mid=True)
            elif scheme == "imex":
                new, history = step_imex(state, eq, dt, history, tol, max_iter)
            else:
                new = step_rk4(state, eq, dt)
            if not (np.all(np.isfinite(new.u)) and np.all(np.isfinite(new.v))):
                raise NonFiniteError(f"{scheme} step produced non-finite coefficients")
        except NumericalFailure as exc:
            exc.t = state.t
            raise
        # time from the step counter keeps sample times free of drift
        new = State(new.u, new.v, float(initial.t) + n * dt)
        new_rate = eq.dissipation(new.v)
        acc += 0.5 * dt * (rate + new_rate)
        rate = new_rate
        state = new
        if hook is not None:
            hook(n, state, mid)
        if n % cadence == 0:
            i = n // cadence
            ts[i], us[i], vs[i], diss[i] = state.t, state.u, state.v, acc
    return Trajectory(ts, us, vs, diss, dt, scheme)


def modal_decay_rate(lam, gamma):
    """Decay rate ``-Re r_+`` of the slowest root of ``r^2 + gamma lam r + lam``."""
    b = gamma * lam
    disc = b * b - 4 * lam
    if disc < 0:
        return b / 2
    return 2 * lam / (b + math.sqrt(disc))
