import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stokespatch.fields import ScalarField, SpectralField, forward_transform, make_grid
from stokespatch.stokes import (
    solve_velocity,
    streamfunction_from_theta,
    velocity_from_levelset,
    velocity_gradient_spectral,
    velocity_hessian_spectral,
    vorticity_from_theta,
)

TWO_PI = 2 * np.pi


def _theta_hat(grid, values):
    return forward_transform(ScalarField(grid, values))


def test_cosine_x1_velocity():
    g = make_grid(32)
    x1, _ = g.coords
    sol = solve_velocity(_theta_hat(g, np.cos(TWO_PI * x1)))
    assert np.max(np.abs(sol.u.u1)) < 1e-15
    assert np.max(np.abs(sol.u.u2 - np.cos(TWO_PI * x1) / (4 * np.pi**2))) < 1e-15


def test_x2_only_and_constant_give_zero_velocity():
    g = make_grid(32)
    _, x2 = g.coords
    for theta in (np.cos(TWO_PI * x2) + np.sin(4 * np.pi * x2), np.full((32, 32), 7.0)):
        assert np.max(np.abs(solve_velocity(_theta_hat(g, theta)).u.values)) < 1e-15


def test_zero_mode_and_divergence(rng):
    g = make_grid(32)
    sol = solve_velocity(_theta_hat(g, rng.random((32, 32))))
    k1, k2 = g.wavenumbers
    u1h, u2h = (f.coefficients for f in sol.uhat)
    assert u1h[0, 0] == 0 and u2h[0, 0] == 0
    assert np.max(np.abs(1j * (k1 * u1h + k2 * u2h))) < 1e-12
    assert abs(sol.u.values.mean()) < 1e-15


@given(st.integers(-15, 15), st.integers(-15, 15))
def test_single_mode_exactness(m1, m2):
    if (m1, m2) == (0, 0):
        return
    g = make_grid(32)
    x1, x2 = g.coords
    k = TWO_PI * np.array([m1, m2], float)
    phase = k[0] * x1 + k[1] * x2
    u = solve_velocity(_theta_hat(g, np.cos(phase))).u.values
    k4 = (k @ k) ** 2
    exact = np.stack([-k[1] * k[0], k[0] ** 2])[:, None, None] / k4 * np.cos(phase)
    assert np.max(np.abs(u - exact)) <= 1e-12


def test_linearity(rng):
    g = make_grid(16)
    a, b = rng.random((16, 16)), rng.random((16, 16))
    lhs = solve_velocity(_theta_hat(g, 2 * a - 3 * b)).u.values
    rhs = 2 * solve_velocity(_theta_hat(g, a)).u.values - 3 * solve_velocity(_theta_hat(g, b)).u.values
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_vorticity_cosine_and_x2_only():
    g = make_grid(32)
    x1, x2 = g.coords
    w = vorticity_from_theta(_theta_hat(g, np.cos(TWO_PI * x1))).values
    assert np.max(np.abs(w + np.sin(TWO_PI * x1) / TWO_PI)) < 1e-14
    # -Lap w = d1 theta, by finite differences
    h = g.h
    lap = (np.roll(w, 1, 0) + np.roll(w, -1, 0) - 2 * w) / h**2
    assert np.max(np.abs(-lap - (-TWO_PI * np.sin(TWO_PI * x1)))) < 0.05
    assert np.max(np.abs(vorticity_from_theta(_theta_hat(g, np.sin(TWO_PI * x2))).values)) < 1e-15


def test_vorticity_is_curl_of_velocity(rng):
    g = make_grid(32)
    th = _theta_hat(g, rng.random((32, 32)))
    k1, k2 = g.wavenumbers
    u1h, u2h = (f.coefficients for f in solve_velocity(th).uhat)
    curl = 1j * (k1 * u2h - k2 * u1h)
    w = forward_transform(vorticity_from_theta(th)).coefficients
    # the Nyquist row and column carry the real-part truncation
    inner = (np.abs(g.modes[0]) < 16) & (np.abs(g.modes[1]) < 16)
    assert np.max(np.abs((curl - w)[inner])) < 1e-12


def test_streamfunction_cosine_sign():
    g = make_grid(32)
    x1, _ = g.coords
    th = _theta_hat(g, np.cos(TWO_PI * x1))
    psi = streamfunction_from_theta(th).values
    assert np.max(np.abs(psi - np.sin(TWO_PI * x1) / TWO_PI**3)) < 1e-15
    # u = grad_perp psi = (-d2 psi, d1 psi)
    u2 = np.cos(TWO_PI * x1) / TWO_PI**2
    assert np.max(np.abs(solve_velocity(th).u.u2 - u2)) < 1e-15


def test_streamfunction_chain(rng):
    g = make_grid(32)
    th = _theta_hat(g, rng.random((32, 32)))
    _, x2 = g.coords
    assert np.max(np.abs(streamfunction_from_theta(_theta_hat(g, np.cos(TWO_PI * x2))).values)) < 1e-15
    k1, k2 = g.wavenumbers
    psi = forward_transform(streamfunction_from_theta(th)).coefficients
    w = forward_transform(vorticity_from_theta(th)).coefficients
    inner = (np.abs(g.modes[0]) < 16) & (np.abs(g.modes[1]) < 16)
    assert np.max(np.abs((-g.k_squared * psi - w)[inner])) < 1e-10
    u1h, u2h = (f.coefficients for f in solve_velocity(th).uhat)
    assert np.max(np.abs((1j * -k2 * psi - u1h)[inner])) < 1e-12
    assert np.max(np.abs((1j * k1 * psi - u2h)[inner])) < 1e-12


def test_gradient_and_hessian_layout():
    g = make_grid(32)
    x1, x2 = g.coords
    th = _theta_hat(g, np.cos(TWO_PI * (x1 + x2)))
    u = solve_velocity(th).u.values
    G = velocity_gradient_spectral(th)
    T = velocity_hessian_spectral(th)
    # spectral derivative of a single mode is exact: compare with the analytic form
    k = TWO_PI * np.array([1.0, 1.0])
    amp = np.array([-k[1] * k[0], k[0] ** 2]) / (k @ k) ** 2
    s = np.sin(k[0] * x1 + k[1] * x2)
    c = np.cos(k[0] * x1 + k[1] * x2)
    for d in range(2):
        for comp in range(2):
            assert np.max(np.abs(G[d, comp] + k[d] * amp[comp] * s)) < 1e-13
            for a in range(2):
                assert np.max(np.abs(T[a, d, comp] + k[a] * k[d] * amp[comp] * c)) < 1e-12
    assert np.allclose(u[1], amp[1] * c)


def test_velocity_from_levelset_filter_reduces_speed():
    g = make_grid(64)
    x1, x2 = g.coords
    phi = ScalarField(g, 0.2 - np.hypot(x1, x2))
    u0 = velocity_from_levelset(phi)
    u1 = velocity_from_levelset(phi, epsilon=4 * g.h)
    assert np.max(np.abs(u1.values)) <= np.max(np.abs(u0.values))
    # the patch rises: mean of u2 over the patch is positive
    assert np.mean(u0.u2[phi.values > 0]) > 0
