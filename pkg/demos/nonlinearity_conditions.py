"""Growth and monotonicity conditions for phi and f, estimated from samples."""
import numpy as np

from qsdw import NonlinearitySpec, monotonicity_gap, validate_conditions

# %% constants of the growth conditions for a few powers
for p in (1.0, 2.0, 3.0, 4.9):
    rep = validate_conditions(NonlinearitySpec(p=p, q=2))
    print(f"p={p:<4} a0={rep.a0_hat:.3g} a1={rep.a1_hat:.3g} delta={rep.delta_hat:.3g} "
          f"passed={rep.passed}")

# %% a destabilizing linear part in f shows up as C_hat
print(validate_conditions(NonlinearitySpec(q=2, C_f=1.5)).C_hat)

# %% the monotonicity gap over random pairs stays bounded below
rng = np.random.default_rng(1)
a, b = rng.standard_normal((2, 10**5)) * 10
print("min gap, p=3:", monotonicity_gap(a, b, NonlinearitySpec(p=3)).min())
