"""
Dirichlet sine eigenbasis on an interval or a rectangle.

A field is stored as its array of sine coefficients ``u_hat`` with shape
``(N,) * dim``; entry ``u_hat[k]`` multiplies

.. math::

    e_k(x) = \\prod_i \\sin(k_i \\pi x_i / L_i),  \\qquad k_i = 1, \\dots, N

so that ``||e_k||^2 = prod(L_i / 2)``. Pointwise nonlinearities are evaluated
on a uniform collocation grid. Two grids are used:

* the *interior* grid ``x_j = j L / (M + 1)``, ``j = 1..M`` on which sine
  series are sampled (boundary values vanish identically);
* the *closed* grid ``j = 0..M+1`` on which gradients (cosine series) are
  sampled, since they do not vanish on the boundary.

Projections use the discrete orthogonality of the DST-I / DCT-I families, so
``to_spectral(to_grid(u)) == u`` and ``div_from_grid(grad_to_grid(u)) ==
laplacian(u)`` hold exactly on the retained modes. Transforms are dense
matrix products applied axis by axis; at desk scale this is cheaper than
the bookkeeping an FFT would need.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = ["Basis", "build_basis", "lp_norm"]


def _apply(mat, arr, axis):
    """Contract ``mat`` (out, in) with ``arr`` along ``axis``."""
    out = np.tensordot(mat, arr, axes=(1, axis))
    return np.moveaxis(out, 0, axis)


class Basis:
    """Sine eigenbasis of the Dirichlet Laplacian on ``prod(0, L_i)``.

    Instances are immutable after construction and may be shared between
    threads; every method is a pure function of its arguments.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    N : int
        Retained modes per axis.
    lengths : sequence of float
        Side lengths ``L_i``.
    M : int
        Interior collocation points per axis, at least ``ceil(3N/2)``.
    """

    def __init__(self, dim, N, lengths, M):
        if dim not in (1, 2):
            raise ValueError(f"build_basis: dim must be 1 or 2, got {dim}")
        if int(N) != N or N < 1:
            raise ValueError(f"build_basis: N must be a positive integer, got {N}")
        N = int(N)
        lengths = np.broadcast_to(np.asarray(lengths, dtype=float), (dim,))
        if np.any(lengths <= 0) or not np.all(np.isfinite(lengths)):
            raise ValueError(f"build_basis: lengths must be positive, got {lengths}")
        if int(M) != M or M < math.ceil(3 * N / 2):
            raise ValueError(
                f"build_basis: M={M} < ceil(3N/2)={math.ceil(3 * N / 2)} "
                "(dealiasing capacity, aliasing risk)")
        M = int(M)

        self.dim = dim
        self.N = N
        self.M = M
        self.lengths = tuple(float(L) for L in lengths)
        self.shape = (N,) * dim
        self.grid_shape = (M,) * dim
        self.closed_shape = (M + 2,) * dim

        k = np.arange(1, N + 1)
        self.wavenumbers = tuple(k * np.pi / L for L in self.lengths)
        lam = np.zeros(self.shape)
        for i, kk in enumerate(self.wavenumbers):
            idx = [None] * dim
            idx[i] = slice(None)
            lam = lam + (kk ** 2)[tuple(idx)]
        self.eigenvalues = lam
        self.eigenvalues.flags.writeable = False
        self.lambda1 = float(lam.flat[0])
        self.norm_weight = float(np.prod([L / 2 for L in self.lengths]))

        theta = np.pi / (M + 1)
        j_in = np.arange(1, M + 1)
        j_cl = np.arange(0, M + 2)
        # interior sine synthesis (M, N) and its exact discrete inverse (N, M)
        self._sin_in = np.sin(theta * np.outer(j_in, k))
        self._sin_in_inv = (2.0 / (M + 1)) * self._sin_in.T
        # sine synthesis on the closed grid; end rows are zero
        self._sin_cl = np.sin(theta * np.outer(j_cl, k))
        self._sin_cl[[0, -1]] = 0.0
        self._sin_cl_inv = (2.0 / (M + 1)) * self._sin_cl.T
        # derivative of the sine series sampled on the closed grid, per axis
        cos_cl = np.cos(theta * np.outer(j_cl, k))
        self._dcos = tuple(cos_cl * kk for kk in self.wavenumbers)
        # trapezoid (DCT-I) projection of a closed-grid array onto cos modes,
        # followed by d/dx back to sine coefficients
        trap = np.ones(M + 2)
        trap[[0, -1]] = 0.5
        self._div = tuple(-(2.0 / (M + 1)) * (cos_cl * trap[:, None]).T * kk[:, None]
                          for kk in self.wavenumbers)

        self.spacing = tuple(L / (M + 1) for L in self.lengths)
        self.points = tuple(j_in * h for h in self.spacing)
        self.closed_points = tuple(j_cl * h for h in self.spacing)
        w_in = np.full(M, 1.0)
        self._weights_in = _outer_weights([w_in * h for h in self.spacing])
        self._weights_cl = _outer_weights([trap * h for h in self.spacing])

    def __repr__(self):
        return (f"Basis(dim={self.dim}, N={self.N}, lengths={self.lengths}, "
                f"M={self.M})")

    def __eq__(self, other):
        if not isinstance(other, Basis):
            return NotImplemented
        return (self.dim, self.N, self.M, self.lengths) == (
            other.dim, other.N, other.M, other.lengths)

    def __hash__(self):
        return hash((self.dim, self.N, self.M, self.lengths))

    # -- helpers ---------------------------------------------------------
    def zeros(self):
        return np.zeros(self.shape)

    def mode(self, k, amplitude=1.0):
        """Coefficient array of ``amplitude * e_k``; ``k`` is 1-based."""
        k = (k,) * self.dim if np.isscalar(k) else tuple(k)
        u = self.zeros()
        u[tuple(ki - 1 for ki in k)] = amplitude
        return u

    def check(self, u, what="field"):
        u = np.asarray(u, dtype=float)
        if u.shape != self.shape:
            raise ValueError(f"{what} has shape {u.shape}, basis expects {self.shape}")
        return u

    def mesh(self, closed=False):
        pts = self.closed_points if closed else self.points
        return np.meshgrid(*pts, indexing="ij")

    # -- transforms ------------------------------------------------------
    def to_grid(self, u):
        """Sample a sine series on the interior grid."""
        u = self.check(u)
        for ax in range(self.dim):
            u = _apply(self._sin_in, u, ax)
        return u

    def to_spectral(self, values):
        """Project interior-grid values onto the retained sine modes."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.grid_shape:
            raise ValueError(
                f"grid values have shape {values.shape}, expected {self.grid_shape}")
        for ax in range(self.dim):
            values = _apply(self._sin_in_inv, values, ax)
        return values

    def to_closed_grid(self, u):
        """Sample a sine series on the closed grid (zero boundary rows)."""
        u = self.check(u)
        for ax in range(self.dim):
            u = _apply(self._sin_cl, u, ax)
        return u

    def grad_to_grid(self, u):
        """Gradient components sampled on the closed grid, one array per axis."""
        u = self.check(u)
        out = []
        for i in range(self.dim):
            g = u
            for ax in range(self.dim):
                g = _apply(self._dcos[i] if ax == i else self._sin_cl, g, ax)
            out.append(g)
        return out

    def div_from_grid(self, components):
        """Sine coefficients of the divergence of a closed-grid vector field."""
        if len(components) != self.dim:
            raise ValueError(f"expected {self.dim} components, got {len(components)}")
        acc = self.zeros()
        for i, comp in enumerate(components):
            comp = np.asarray(comp, dtype=float)
            if comp.shape != self.closed_shape:
                raise ValueError(
                    f"component {i} has shape {comp.shape}, expected {self.closed_shape}")
            for ax in range(self.dim):
                comp = _apply(self._div[i] if ax == i else self._sin_cl_inv, comp, ax)
            acc = acc + comp
        return acc

    # -- operators and norms --------------------------------------------
    def laplacian_pow(self, u, s):
        """``(-Laplacian)^s u``: multiply each coefficient by ``lambda_k^s``."""
        u = self.check(u)
        if s == 0:
            return u.copy()
        if s == 1:
            return self.eigenvalues * u
        return self.eigenvalues ** s * u

    def laplacian(self, u):
        return -self.laplacian_pow(u, 1)

    def sobolev_norm(self, u, s):
        """``H^s`` norm ``sqrt(sum lambda_k^s u_k^2)`` in the sine scale.

        ``s=0`` is the L2 norm, ``s=1`` the L2 norm of the gradient, ``s=2``
        the L2 norm of the Laplacian; negative ``s`` gives dual norms.
        """
        u = self.check(u)
        w = self.eigenvalues ** s if s != 0 else 1.0
        return math.sqrt(self.norm_weight * float(np.sum(w * u * u)))

    def inner(self, u, w):
        """L2 inner product of two sine series."""
        return self.norm_weight * float(np.sum(self.check(u) * self.check(w)))

    def lp_norm(self, values, r):
        """Rectangle/trapezoid-rule ``L^r`` norm of interior or closed grid values."""
        return lp_norm(values, r, self)

    def integrate(self, values):
        """Quadrature of interior or closed grid values over the domain."""
        values = np.asarray(values, dtype=float)
        return float(np.sum(self._weights_for(values) * values))

    def _weights_for(self, values):
        if values.shape == self.grid_shape:
            return self._weights_in
        if values.shape == self.closed_shape:
            return self._weights_cl
        raise ValueError(
            f"grid values have shape {values.shape}; expected {self.grid_shape} "
            f"(interior) or {self.closed_shape} (closed)")


def _outer_weights(ws):
    w = ws[0]
    for extra in ws[1:]:
        w = np.multiply.outer(w, extra)
    return w


def build_basis(dim, N, lengths, M=None):
    """Construct a :class:`Basis`; ``M`` defaults to ``ceil(3N/2)``."""
    if M is None:
        M = math.ceil(3 * N / 2)
    return Basis(dim, N, lengths, M)


def lp_norm(values, r, basis):
    """``(sum_j w_j |f_j|^r)^(1/r)`` with the grid quadrature weights of ``basis``."""
    if r < 1:
        raise ValueError(f"lp_norm: r must be >= 1, got {r}")
    values = np.asarray(values, dtype=float)
    w = basis._weights_for(values)
    if np.isinf(r):
        return float(np.max(np.abs(values))) if values.size else 0.0
    return float(np.sum(w * np.abs(values) ** r)) ** (1.0 / r)
