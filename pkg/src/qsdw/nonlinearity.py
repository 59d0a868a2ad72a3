"""
Power-law nonlinearities

.. math::

    f(s) = s|s|^q - C_f s, \\qquad \\phi(\\eta) = |\\eta|^{p+1}

their primitives and derivatives, the structural growth conditions, and the
monotonicity gap of ``phi'``. Vector arguments (``d = 2``) carry the
component index on the *first* axis, e.g. ``eta.shape == (2, ...)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NonlinearitySpec",
    "f_eval", "F_eval", "f_prime",
    "phi_eval", "phi_prime", "phi_second", "phi_hessian_min",
    "monotonicity_gap", "validate_conditions", "ConditionReport",
    "membrane_phi", "membrane_Phi",
]


@dataclass(frozen=True)
class NonlinearitySpec:
    """Parameters of ``f`` and ``phi``.

    ``p`` is the gradient exponent, ``q`` the displacement exponent and
    ``C_f`` the linear destabilization in ``f``. ``limit_case_p5`` admits
    ``p = 5``.
    """

    p: float = 3.0
    q: float = 2.0
    C_f: float = 0.0
    phi_kind: str = "power"
    f_kind: str = "power"
    limit_case_p5: bool = False

    def __post_init__(self):
        if self.phi_kind not in ("power", "zero"):
            raise ValueError(f"phi_kind must be 'power' or 'zero', got {self.phi_kind!r}")
        if self.f_kind not in ("power", "zero"):
            raise ValueError(f"f_kind must be 'power' or 'zero', got {self.f_kind!r}")
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        upper_ok = self.p < 5 or (self.p == 5 and self.limit_case_p5)
        if self.phi_kind == "power" and not upper_ok:
            raise ValueError(f"p={self.p} outside [1, 5) (p=5 needs limit_case_p5)")
        if not self.q > 0:
            raise ValueError(f"q must be > 0, got {self.q}")
        if not self.C_f >= 0:
            raise ValueError(f"C_f must be >= 0, got {self.C_f}")

    @property
    def linear(self):
        return self.phi_kind == "zero" and self.f_kind == "zero"


def _mag(eta, vector):
    eta = np.asarray(eta, dtype=float)
    return np.sqrt(np.sum(eta * eta, axis=0)) if vector else np.abs(eta)


# -- f ------------------------------------------------------------------

def f_eval(s, spec):
    s = np.asarray(s, dtype=float)
    if spec.f_kind == "zero":
        return np.zeros_like(s)
    return s * np.abs(s) ** spec.q - spec.C_f * s


def F_eval(s, spec):
    """Primitive ``F(s) = int_0^s f``."""
    s = np.asarray(s, dtype=float)
    if spec.f_kind == "zero":
        return np.zeros_like(s)
    return np.abs(s) ** (spec.q + 2) / (spec.q + 2) - 0.5 * spec.C_f * s * s


def f_prime(s, spec):
    s = np.asarray(s, dtype=float)
    if spec.f_kind == "zero":
        return np.zeros_like(s)
    return (spec.q + 1) * np.abs(s) ** spec.q - spec.C_f


# -- phi ----------------------------------------------------------------

def phi_eval(eta, spec, vector=False):
    """``|eta|^(p+1)``; with ``vector=True`` the first axis holds components."""
    r = _mag(eta, vector)
    if spec.phi_kind == "zero":
        return np.zeros_like(r)
    return r ** (spec.p + 1)


def phi_prime(eta, spec, vector=False):
    """Gradient ``(p+1)|eta|^(p-1) eta``."""
    eta = np.asarray(eta, dtype=float)
    if spec.phi_kind == "zero":
        return np.zeros_like(eta)
    coef = (spec.p + 1) * _mag(eta, vector) ** (spec.p - 1)
    return coef * eta


def phi_second(eta, spec):
    """Scalar second derivative ``p(p+1)|eta|^(p-1)``."""
    eta = np.asarray(eta, dtype=float)
    if spec.phi_kind == "zero":
        return np.zeros_like(eta)
    return spec.p * (spec.p + 1) * np.abs(eta) ** (spec.p - 1)


def phi_hessian(eta, spec):
    """Hessian of ``phi`` at a single vector ``eta``."""
    eta = np.asarray(eta, dtype=float)
    n = eta.shape[0]
    if spec.phi_kind == "zero":
        return np.zeros((n, n))
    r = float(np.linalg.norm(eta))
    p = spec.p
    H = (p + 1) * r ** (p - 1) * np.eye(n)
    if r > 0:
        H += (p + 1) * (p - 1) * r ** (p - 3) * np.outer(eta, eta)
    return H


def phi_hessian_min(eta, spec, vector=False):
    """Smallest eigenvalue of the Hessian (scalar case: ``phi''``)."""
    if not vector:
        return phi_second(eta, spec)
    r = _mag(eta, True)
    if spec.phi_kind == "zero":
        return np.zeros_like(r)
    # eigenvalues (p+1)r^(p-1) (tangential) and p(p+1)r^(p-1) (radial)
    return (spec.p + 1) * r ** (spec.p - 1)


def monotonicity_gap(eta1, eta2, spec, vector=False):
    """Ratio ``[phi'(a)-phi'(b)].(a-b) / ((|a|+|b|)^(p-1) |a-b|^2)``.

    Strictly positive for every admissible ``phi``; equals 2 when ``p = 1``.
    Coincident pairs are rejected rather than assigned a limit.
    """
    eta1 = np.asarray(eta1, dtype=float)
    eta2 = np.asarray(eta2, dtype=float)
    diff = eta1 - eta2
    dist = _mag(diff, vector)
    if np.any(dist == 0):
        raise ValueError("monotonicity_gap: coincident inputs")
    dphi = phi_prime(eta1, spec, vector) - phi_prime(eta2, spec, vector)
    # project on the unit direction first so |a-b|^2 cannot underflow
    unit = diff / dist
    proj = np.sum(dphi * unit, axis=0) if vector else dphi * unit
    scale = (_mag(eta1, vector) + _mag(eta2, vector)) ** (spec.p - 1)
    return proj / dist / scale


# -- sampled structural constants ----------------------------------------

@dataclass
class ConditionReport:
    """Tightest constants observed over the samples (``nan`` when not applicable)."""

    a0_hat: float
    a1_hat: float
    a_hat: float
    C_hat: float
    C_upper_hat: float
    delta_hat: float
    upper_gap_hat: float
    notes: list
    passed: bool


def _log_uniform(rng, n, lo, hi):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), n))


def validate_conditions(spec, sample_count=10**4, range=(1e-3, 1e3), dim=1, seed=0):
    """Estimate the constants of the growth conditions on ``phi`` and ``f``.

    Magnitudes are drawn log-uniformly in ``range``, signs (or directions
    for ``dim = 2``) uniformly. The lower bounds reported are

    * ``a0_hat = min phi''_min / |eta|^(p-1)``
    * ``a1_hat = max phi''_max / (1 + |eta|^(p-1))``
    * ``C_hat = max(0, -min f')`` and ``a_hat = min (f' + C_hat) / |s|^q``
    * ``delta_hat`` the smallest monotonicity gap over random pairs.

    The report passes iff ``delta_hat > 0``, ``a0_hat > 0`` and ``a_hat > 0``
    (conditions that do not apply are skipped). A failure is a report
    outcome, never an exception.
    """
    if sample_count < 10**4:
        raise ValueError("validate_conditions: sample_count must be >= 1e4")
    lo, hi = range
    rng = np.random.default_rng(seed)
    notes = []
    vector = dim > 1

    def draw(n):
        r = _log_uniform(rng, n, lo, hi)
        if not vector:
            return r * rng.choice([-1.0, 1.0], n)
        d = rng.standard_normal((dim, n))
        return d / np.linalg.norm(d, axis=0) * r

    nan = float("nan")
    a0 = a1 = delta = upper = nan
    if spec.phi_kind == "zero":
        notes.append("phi growth condition not applicable: phi is zero")
    else:
        eta = draw(sample_count)
        r = _mag(eta, vector)
        p = spec.p
        hmin = phi_hessian_min(eta, spec, vector)
        hmax = p * (p + 1) * r ** (p - 1)
        a0 = float(np.min(hmin / r ** (p - 1)))
        a1 = float(np.max(hmax / (1 + r ** (p - 1))))
        e1, e2 = draw(sample_count), draw(sample_count)
        keep = _mag(e1 - e2, vector) > 0
        e1, e2 = e1[..., keep], e2[..., keep]
        gap = monotonicity_gap(e1, e2, spec, vector)
        delta = float(np.min(gap))
        dphi = phi_prime(e1, spec, vector) - phi_prime(e2, spec, vector)
        diff = e1 - e2
        num = np.sum(dphi * diff, axis=0) if vector else dphi * diff
        den = (1 + _mag(e1, vector) + _mag(e2, vector)) ** (p - 1) * _mag(diff, vector) ** 2
        upper = float(np.max(num / den))

    a = C = Cup = nan
    if spec.f_kind == "zero":
        notes.append("f growth condition not applicable: f is zero")
    else:
        s = _log_uniform(rng, sample_count, lo, hi) * rng.choice([-1.0, 1.0], sample_count)
        s = np.append(s, 0.0)
        fp = f_prime(s, spec)
        C = max(0.0, float(-np.min(fp)))
        nz = s != 0
        a = float(np.min((fp[nz] + C) / np.abs(s[nz]) ** spec.q))
        Cup = float(np.max(fp / (1 + np.abs(s) ** spec.q)))

    checks = [x > 0 for x in (delta, a0, a) if not np.isnan(x)]
    return ConditionReport(a0, a1, a, C, Cup, delta, upper, notes, all(checks))


# -- membrane stress law ---------------------------------------------------

def membrane_phi(z, spec):
    """Monotone stress ``|z|^(p-1) z`` applied to the Laplacian in the plate model."""
    z = np.asarray(z, dtype=float)
    if spec.phi_kind == "zero":
        return np.zeros_like(z)
    return np.abs(z) ** (spec.p - 1) * z


def membrane_Phi(z, spec):
    """Primitive ``|z|^(p+1) / (p+1)`` of :func:`membrane_phi`."""
    z = np.asarray(z, dtype=float)
    if spec.phi_kind == "zero":
        return np.zeros_like(z)
    return np.abs(z) ** (spec.p + 1) / (spec.p + 1)
