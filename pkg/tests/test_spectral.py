import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellid.errors import InvalidArgumentError
from cellid.spectral import (build_diffusion_operator, center_slope, cheb_grid, clenshaw_curtis_weights,
                             volume_average, zoh_discretize)
from oracles import fv_sphere, rk4, sphere_flux_series


@pytest.mark.parametrize("order", [4, 9, 16, 38])
def test_derivative_matrices_exact_on_polynomials(order):
    g = cheb_grid(order)
    x = g.nodes
    for k in range(order + 1):
        p = x**k
        dp = k * x ** max(k - 1, 0) if k else np.zeros_like(x)
        d2p = k * (k - 1) * x ** max(k - 2, 0) if k > 1 else np.zeros_like(x)
        scale1 = max(1.0, np.max(np.abs(dp)))
        scale2 = max(1.0, np.max(np.abs(d2p)))
        assert np.max(np.abs(g.d1 @ p - dp)) / scale1 <= 1e-9
        assert np.max(np.abs(g.d2 @ p - d2p)) / scale2 <= 1e-9 * max(1, order**2 / 100)


def test_derivative_of_constant_is_zero():
    g = cheb_grid(30)
    assert np.max(np.abs(g.d1 @ np.ones(31))) < 1e-12


@pytest.mark.parametrize("order", [2, 5, 8, 21, 38])
def test_clenshaw_curtis_integrates_polynomials(order):
    x = cheb_grid(order).nodes
    w = clenshaw_curtis_weights(order)
    for k in range(order + 1):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert abs(w @ x**k - exact) < 1e-12


def test_bad_orders_rejected():
    with pytest.raises(InvalidArgumentError):
        cheb_grid(0)
    with pytest.raises(InvalidArgumentError):
        build_diffusion_operator(2)
    with pytest.raises(InvalidArgumentError):
        build_diffusion_operator(10, radius=-1.0)
    with pytest.raises(InvalidArgumentError):
        build_diffusion_operator(10, diffusivity=0.0)


def test_volume_average_of_even_polynomials():
    radius = 3.0
    op = build_diffusion_operator(12, radius, 1.0)
    r = op.r_nodes
    # (3/R^3) int_0^R r^k r^2 dr = 3 R^k / (k + 3)
    for k in (0, 2, 4, 10):
        assert volume_average(op, r**k) == pytest.approx(3 * radius**k / (k + 3), rel=1e-12)


def test_center_slope_vanishes_for_even_profiles():
    op = build_diffusion_operator(15, 2.0, 1.0)
    assert abs(center_slope(op, 1 + op.r_nodes**2)) < 1e-10


def test_surface_reconstruction_honours_flux_condition():
    op = build_diffusion_operator(20, 2e-6, 3e-14)
    rng = np.random.default_rng(1)
    interior = 1000 + rng.standard_normal(op.n_states)
    j = 4e-5
    prof = op.profile(interior, j)
    # D dc/dr at the surface equals -j
    assert op.diffusivity * (op.d1_half[0] @ prof) == pytest.approx(-j, rel=1e-10)


def test_step_flux_matches_finite_volume_and_series():
    radius, diff, j, c0 = 5e-6, 1e-14, 1e-5, 2.0e4
    op = build_diffusion_operator(20, radius, diff)
    ad, bd = op.discretize(1.0)
    n = 3000
    y = op.uniform_state(c0)
    surf = []
    for _ in range(n + 1):
        surf.append(op.surface(y, j))
        y = ad @ y + bd[:, 0] * j
    dev = np.array(surf[1:]) - c0
    times = np.arange(n + 1, dtype=float)
    fv_surf, _ = fv_sphere(500, radius, diff, c0, j, times)
    series = sphere_flux_series(radius, diff, j, times[1:])
    assert np.max(np.abs(dev - (fv_surf[1:] - c0)) / np.abs(fv_surf[1:] - c0)) < 5e-3
    assert np.max(np.abs(dev - series) / np.abs(series)) < 1e-3


def test_zoh_matches_fine_rk4():
    # rate D/R^2 = 0.1 keeps RK4 at dt = 0.01 inside its stability region
    op = build_diffusion_operator(10, 1.0, 0.1)
    dt, sub = 0.5, 50
    u = np.sin(np.arange(40) * 0.3)
    ad, bd = op.discretize(dt)
    y = np.linspace(1.0, 2.0, op.n_states)
    zoh = [y]
    for uk in u:
        y = ad @ y + bd[:, 0] * uk
        zoh.append(y)
    ref = rk4(lambda s, v: op.a_mat @ s + op.b_vec * v, zoh[0], dt / sub, len(u) * sub, np.repeat(u, sub))
    assert np.max(np.abs(np.array(zoh) - ref[::sub])) < 1e-7


def test_zoh_scalar_closed_form():
    a, b, dt = -2.0, 3.0, 0.4
    ad, bd = zoh_discretize(np.array([[a]]), np.array([[b]]), dt)
    assert ad[0, 0] == pytest.approx(np.exp(a * dt), rel=1e-14)
    assert bd[0, 0] == pytest.approx(b * (np.exp(a * dt) - 1) / a, rel=1e-12)


def test_discretization_is_cached():
    op = build_diffusion_operator(8, 1.0, 1.0)
    assert op.discretize(1.0)[0] is op.discretize(1.0)[0]


@settings(max_examples=40, deadline=None)
@given(n=st.integers(6, 30), radius=st.floats(1e-7, 1e-4), diff=st.floats(1e-16, 1e-12),
       j=st.floats(-1e-4, 1e-4), c0=st.floats(1e2, 5e4))
def test_quadratic_profile_drains_uniformly(n, radius, diff, j, c0):
    # c = c0 - j r^2 / (2 D R) satisfies the flux condition; under diffusion
    # every node then moves at the bulk rate -3 j / R.
    op = build_diffusion_operator(n, radius, diff)
    y = c0 - j * op.r_nodes[1:] ** 2 / (2 * diff * radius)
    surf = op.surface(y, j)
    assert surf == pytest.approx(c0 - j * radius / (2 * diff), rel=1e-9, abs=1e-9 * abs(j * radius / diff))
    dy = op.a_mat @ y + op.b_vec * j
    rate = -3 * j / radius
    rounding = 1e-13 * n * np.max(np.abs(op.a_mat)) * np.max(np.abs(y))
    assert np.max(np.abs(dy - rate)) <= rounding + 1e-9 * abs(rate)
    prof = op.profile(y, j)
    assert volume_average(op, prof) == pytest.approx(c0 - 3 * j * radius / (10 * diff), rel=1e-9,
                                                     abs=1e-9 * abs(j * radius / diff))


@settings(max_examples=20, deadline=None)
@given(c=st.floats(1.0, 5e4), n=st.integers(4, 25))
def test_uniform_profile_is_steady(c, n):
    op = build_diffusion_operator(n, 1e-6, 1e-14)
    y = op.uniform_state(c)
    assert np.max(np.abs(op.a_mat @ y)) <= 1e-9 * c * op.diffusivity / op.radius**2 * n**4
    assert op.surface(y, 0.0) == pytest.approx(c, rel=1e-12)
