"""Sine basis on a box: transforms, fractional Sobolev norms, dealiasing grid."""
import math

import numpy as np

from qsdw import build_basis

# %% a 1-d basis on (0, pi); M defaults to ceil(3N/2)
b = build_basis(1, 16, math.pi)
print(b)

# %% lambda_1 = 1 here, so every Sobolev norm of e_1 equals sqrt(pi/2)
e1 = b.mode(1)
for s in (-1, 0, 1, 2):
    print(f"||e_1||_H^{s} = {b.sobolev_norm(e1, s):.6f}")

# %% round trip through the collocation grid is exact up to rounding
rng = np.random.default_rng(0)
u = rng.standard_normal(b.shape) / np.arange(1, 17) ** 2
print("round trip error:", np.max(np.abs(b.to_spectral(b.to_grid(u)) - u)))

# %% (-Laplacian)^s acts diagonally on the coefficients
print("A^(1/2) e_3 / e_3 =", b.laplacian_pow(b.mode(3), 0.5)[2])

# %% 2-d rectangle
b2 = build_basis(2, 8, (1.0, 2.0))
print(b2, "lambda_1 =", b2.lambda1)
