"""Energy, dissipation balance and decay fits along a quasilinear trajectory."""
import math

import numpy as np

from qsdw import (EquationSpec, NonlinearitySpec, State, balance_residual, build_basis,
                  energy_report, fit_decay, integrate)

b = build_basis(1, 32, math.pi)
eq = EquationSpec(b, nonlinearity=NonlinearitySpec(p=3, q=2))
st0 = State(b.mode(1) + b.mode(2, 0.5), b.mode(3, 1.0))
tr = integrate(st0, eq, 1e-3, 5.0, cadence=50)

# %% the energy is non-increasing and the balance closes to O(dt^2)
E = np.array([energy_report(s, eq).total for s in tr.states()])
print("E(0), E(T):", E[0], E[-1], " max increase:", np.diff(E).max())
print("max balance residual:", balance_residual(tr, eq).max_abs)

# %% exponential decay of the energy
fit = fit_decay(tr.t[1:], E[1:])
print(f"rate {fit.rate:.4f}, r^2 {fit.r_squared:.4f}")
