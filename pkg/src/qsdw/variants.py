"""
Related equation families: strongly damped Kirchhoff, hinged membrane and
structurally damped wave equations.

They run through the same integrator and diagnostics as the main equation;
this module adds the family constructors, their energies and the validators
of the structural conditions each family needs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import EnergyReport, energy_report
from .integrator import EquationSpec
from .nonlinearity import NonlinearitySpec

__all__ = [
    "VariantValidatorReport", "validate_kirchhoff", "validate_structural",
    "membrane_energy", "kirchhoff_energy",
    "kirchhoff_equation", "membrane_equation", "structural_equation",
    "kirchhoff_sign_margin",
]


@dataclass(frozen=True)
class VariantValidatorReport:
    family: str
    condition: str
    passed: bool
    margin: float
    note: str = ""


def kirchhoff_sign_margin(s, m, coeff=1.0):
    """``Phi(s) s - int_0^s Phi`` for ``Phi(s) = coeff s^m``."""
    s = np.asarray(s, dtype=float)
    return coeff * (s ** (m + 1) - s ** (m + 1) / (m + 1))


def validate_kirchhoff(m, samples=10**4, s_max=1e3, seed=0):
    """Check the sign condition ``Phi(s) s - int_0^s Phi >= 0`` for ``Phi = s^m``.

    ``samples`` is either an array of points ``s >= 0`` or a count of points
    drawn uniformly in ``[0, s_max]`` (``s = 0`` is always included).
    """
    if m < 1:
        raise ValueError(f"validate_kirchhoff: m must be >= 1, got {m}")
    if np.isscalar(samples):
        rng = np.random.default_rng(seed)
        s = np.append(rng.uniform(0.0, s_max, int(samples)), 0.0)
    else:
        s = np.asarray(samples, dtype=float)
        if np.any(s < 0):
            raise ValueError("validate_kirchhoff: samples must be >= 0")
    margin = float(np.min(kirchhoff_sign_margin(s, m)))
    return VariantValidatorReport("kirchhoff", "Phi(s)s - int_0^s Phi >= 0", margin >= 0,
                                  margin)


def validate_structural(alpha, q):
    """Growth restriction ``q + 2 < 6 / (3 - 4 alpha)`` needed when ``alpha < 3/4``.

    For ``alpha >= 3/4`` no restriction applies and the margin is ``+inf``.
    The bound is the three-dimensional one; in ``d <= 2`` it is informational.
    """
    if not 0.5 <= alpha <= 1.0:
        raise ValueError(f"validate_structural: alpha must lie in [1/2, 1], got {alpha}")
    note = "3D growth bound; informational for d in {1, 2}"
    if alpha >= 0.75:
        return VariantValidatorReport("structural", "q + 2 < 6/(3 - 4 alpha)", True,
                                      math.inf, note + "; unrestricted for alpha >= 3/4")
    margin = 6.0 / (3.0 - 4.0 * alpha) - (q + 2)
    return VariantValidatorReport("structural", "q + 2 < 6/(3 - 4 alpha)", margin > 0,
                                  margin, note)


def membrane_energy(state, eq, alpha=None):
    """``1/2 ||Lap u||^2 + (Phi(Lap u), 1) + 1/2 ||u_t||^2 + (F(u), 1) - (g, u)``."""
    if eq.family != "membrane":
        raise ValueError(f"membrane_energy: equation family is {eq.family!r}")
    return energy_report(state, eq, alpha)


def kirchhoff_energy(state, eq, alpha=None) -> EnergyReport:
    if eq.family != "kirchhoff":
        raise ValueError(f"kirchhoff_energy: equation family is {eq.family!r}")
    return energy_report(state, eq, alpha)


def kirchhoff_equation(basis, gamma=1.0, m=1.0, coeff=1.0, nonlinearity=None, g=None):
    nl = nonlinearity or NonlinearitySpec(phi_kind="zero")
    return EquationSpec(basis, "kirchhoff", gamma, nonlinearity=nl, kirchhoff_m=m,
                        kirchhoff_coeff=coeff, g=g)


def membrane_equation(basis, gamma=1.0, nonlinearity=None, g=None):
    return EquationSpec(basis, "membrane", gamma, nonlinearity=nonlinearity or NonlinearitySpec(),
                        g=g)


def structural_equation(basis, gamma=1.0, alpha=0.75, nonlinearity=None, g=None):
    nl = nonlinearity or NonlinearitySpec(phi_kind="zero")
    return EquationSpec(basis, "structural", gamma, alpha, nonlinearity=nl, g=g)
