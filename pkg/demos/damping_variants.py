"""Structural, Kirchhoff and membrane variants and their validators."""
import math

import numpy as np

from qsdw import NonlinearitySpec, State, build_basis, integrate
from qsdw.variants import (membrane_energy, membrane_equation, structural_equation,
                           validate_kirchhoff, validate_structural)

# %% admissible growth of f under fractional damping
for alpha, q in ((0.5, 3.0), (0.5, 4.5), (0.75, 10.0)):
    rep = validate_structural(alpha, q)
    print(f"alpha={alpha} q={q}: passed={rep.passed} margin={rep.margin}")

# %% the Kirchhoff sign condition on random samples
for m in (1, 2, 3):
    print(f"m={m}: margin {validate_kirchhoff(m).margin}")

# %% half-strength damping still dissipates energy, only more slowly
b = build_basis(1, 16, math.pi)
st0 = State(b.mode(1), b.mode(2, 0.5))
for alpha in (0.5, 1.0):
    eq = structural_equation(b, alpha=alpha, nonlinearity=NonlinearitySpec(phi_kind="zero"))
    tr = integrate(st0, eq, 1e-3, 2.0, cadence=100)
    print(f"alpha={alpha}: ||u(2)||_H1 = {b.sobolev_norm(tr.u[-1], 1):.4f}")

# %% fourth-order membrane problem
eq = membrane_equation(b, nonlinearity=NonlinearitySpec(p=2, q=2))
tr = integrate(st0, eq, 1e-4, 0.2, cadence=200)
E = [membrane_energy(s, eq).total for s in tr.states()]
print("membrane energy:", np.round(E, 6))
