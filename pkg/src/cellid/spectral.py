"""Chebyshev collocation operators for radial diffusion in a sphere.

The particle is discretized on the non-negative half of a Chebyshev grid
spanning [-R, R]. The concentration is an even function of the radius, so
values on the mirrored half are folded back onto the stored nodes and the
1/r terms of the spherical Laplacian never see r = 0 (the centre row uses
the limit 3 * d2c/dr2 instead).

The surface flux condition is eliminated algebraically: the surface node is
not a state, it is reconstructed from the interior nodes and the current
flux. The remaining interior nodes obey a plain linear ODE

    dy/dt = A y + b j

which is discretized exactly under a zero-order hold.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import InvalidArgumentError

DEFAULT_NODES = 20


@dataclass(frozen=True)
class ChebGrid:
    order: int
    nodes: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


def cheb_grid(order):
    """Chebyshev-Gauss-Lobatto nodes cos(k*pi/order) and derivative matrices.

    Nodes are returned in descending order (x[0] = 1, x[-1] = -1). The
    diagonal of ``d1`` is set from the negative row sum, which keeps the
    derivative of a constant at zero to rounding.
    """
    if int(order) != order or order < 1:
        raise InvalidArgumentError(f"order must be a positive integer, got {order!r}")
    order = int(order)
    k = np.arange(order + 1)
    x = np.cos(np.pi * k / order)
    c = np.ones(order + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** k
    dx = x[:, None] - x[None, :]
    d1 = np.outer(c, 1.0 / c) / (dx + np.eye(order + 1))
    d1 -= np.diag(d1.sum(axis=1))
    return ChebGrid(order=order, nodes=x, d1=d1, d2=d1 @ d1)


def clenshaw_curtis_weights(order):
    """Clenshaw-Curtis quadrature weights on the nodes of ``cheb_grid(order)``."""
    n = int(order)
    if n < 1:
        raise InvalidArgumentError("order must be >= 1")
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    inner = np.arange(1, n)
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n * n - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(n * theta[inner]) / (n * n - 1)
    else:
        w[0] = w[n] = 1.0 / (n * n)
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / n
    return w


def _fold(mat, m):
    """Restrict an operator on the full grid to even functions on the half grid."""
    full = mat.shape[0] - 1
    half = mat[: m + 1, : m + 1].copy()
    for j in range(m):
        half[:, j] += mat[: m + 1, full - j]
    return half


@lru_cache(maxsize=16)
def _unit_sphere(n_nodes):
    # Operators for R = 1, D = 1; physical ones are rescaled copies.
    m = n_nodes - 1
    grid = cheb_grid(2 * m)
    x = grid.nodes[: m + 1]
    dh = _fold(grid.d1, m)
    d2h = _fold(grid.d2, m)

    lap = np.empty_like(dh)
    lap[:m] = d2h[:m] + (2.0 / x[:m, None]) * dh[:m]
    lap[m] = 3.0 * d2h[m]

    # Surface row of the flux condition: sum_j dh[0, j] c_j = -R j / D.
    s00 = dh[0, 0]
    c_row = -dh[0, 1:] / s00
    a_mat = lap[1:, 1:] + np.outer(lap[1:, 0], c_row)
    b_vec = -lap[1:, 0] / s00
    d_surf = -1.0 / s00

    w = clenshaw_curtis_weights(2 * m)[: m + 1].copy()
    w[:m] *= 2.0
    # (3/R^3) int_0^R c r^2 dr = (3/2) int_{-1}^{1} c x^2 dx for even c.
    avg_weights = 1.5 * w * x**2

    for arr in (x, dh, lap, a_mat, b_vec, c_row, avg_weights):
        arr.setflags(write=False)
    return x, dh, a_mat, b_vec, c_row, d_surf, avg_weights


@dataclass(frozen=True)
class DiffusionOperator:
    """Spherical diffusion in one particle, reduced to interior-node ODEs.

    Full profiles are ordered surface first (``surface_index`` = 0) and
    centre last; the state vector is ``profile[1:]``.
    """

    n_nodes: int
    radius: float
    diffusivity: float
    r_nodes: np.ndarray
    a_mat: np.ndarray
    b_vec: np.ndarray
    c_row: np.ndarray
    d_surf: float
    avg_weights: np.ndarray
    d1_half: np.ndarray
    surface_index: int = 0
    _zoh_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_states(self):
        return self.n_nodes - 1

    def surface(self, interior, flux):
        """Surface concentration implied by interior nodes and surface flux.

        Works on a single state (shape (n-1,)) or a trajectory (shape (K, n-1)
        with ``flux`` of shape (K,)).
        """
        return interior @ self.c_row + self.d_surf * np.asarray(flux)

    def profile(self, interior, flux):
        surf = self.surface(interior, flux)
        interior = np.asarray(interior)
        if interior.ndim == 1:
            return np.concatenate(([surf], interior))
        return np.column_stack((surf, interior))

    def uniform_state(self, conc):
        return np.full(self.n_states, float(conc))

    def discretize(self, dt):
        """Exact zero-order-hold pair (Ad, Bd) for step ``dt``; cached per dt."""
        if not dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {dt!r}")
        key = float(dt)
        hit = self._zoh_cache.get(key)
        if hit is None:
            hit = zoh_discretize(self.a_mat, self.b_vec[:, None], key)
            self._zoh_cache[key] = hit
        return hit


def zoh_discretize(a_mat, b_mat, dt):
    """Zero-order-hold discretization via the augmented matrix exponential."""
    n = a_mat.shape[0]
    p = b_mat.shape[1]
    block = np.zeros((n + p, n + p))
    block[:n, :n] = a_mat * dt
    block[:n, n:] = b_mat * dt
    phi = expm(block)
    return phi[:n, :n], phi[:n, n:]


def build_diffusion_operator(n_nodes=DEFAULT_NODES, radius=1.0, diffusivity=1.0):
    if int(n_nodes) != n_nodes or n_nodes < 3:
        raise InvalidArgumentError(f"n_nodes must be an integer >= 3, got {n_nodes!r}")
    if not (np.isfinite(radius) and radius > 0):
        raise InvalidArgumentError(f"radius must be positive, got {radius!r}")
    if not (np.isfinite(diffusivity) and diffusivity > 0):
        raise InvalidArgumentError(f"diffusivity must be positive, got {diffusivity!r}")
    n_nodes = int(n_nodes)
    x, dh, a_hat, b_hat, c_row, d_hat, avg_w = _unit_sphere(n_nodes)
    rate = diffusivity / radius**2
    return DiffusionOperator(
        n_nodes=n_nodes,
        radius=float(radius),
        diffusivity=float(diffusivity),
        r_nodes=radius * x,
        a_mat=rate * a_hat,
        b_vec=b_hat / radius,
        c_row=c_row,
        d_surf=d_hat * radius / diffusivity,
        avg_weights=avg_w,
        d1_half=dh / radius,
    )


def volume_average(op, conc):
    """(3/R^3) * integral of c(r) r^2 over the particle, for a full nodal profile."""
    conc = np.asarray(conc, dtype=float)
    if conc.shape[-1] != op.n_nodes:
        raise InvalidArgumentError(
            f"profile length {conc.shape[-1]} does not match n_nodes={op.n_nodes}"
        )
    return conc @ op.avg_weights


def center_slope(op, conc):
    """dc/dr at r = 0 from a full nodal profile."""
    return float(op.d1_half[-1] @ np.asarray(conc, dtype=float))
