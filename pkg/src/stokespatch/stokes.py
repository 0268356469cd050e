"""Spectral solution of the torus Stokes balance ``-Lap u + grad P = theta e2``.

With ``k_perp = (-k2, k1)`` the velocity symbol is

    u_hat(k) = k_perp * k1 / |k|^4 * theta_hat(k),     u_hat(0) = 0,

which is divergence free mode by mode.  The zero mode of ``theta`` never
enters, so callers may pass the raw indicator instead of its mean-free part.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import (
    GridSpec,
    ScalarField,
    SpectralField,
    VectorField,
    forward_transform,
    gaussian_filter,
    heaviside_indicator,
    inverse_transform,
)

__all__ = [
    "StokesSolution",
    "solve_velocity",
    "vorticity_from_theta",
    "streamfunction_from_theta",
    "velocity_gradient_spectral",
    "velocity_hessian_spectral",
    "velocity_from_levelset",
]


@dataclass(frozen=True, eq=False)
class StokesSolution:
    u: VectorField
    uhat: tuple[SpectralField, SpectralField]


def _inverse_k2(grid: GridSpec, power: int) -> np.ndarray:
    k2 = grid.k_squared
    out = np.zeros_like(k2)
    nz = k2 != 0
    out[nz] = 1.0 / k2[nz] ** power
    return out


def velocity_symbol(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    k1, k2 = grid.wavenumbers
    inv4 = _inverse_k2(grid, 2)
    return -k2 * k1 * inv4, k1 * k1 * inv4


def solve_velocity(theta_hat: SpectralField) -> StokesSolution:
    grid = theta_hat.grid
    s1, s2 = velocity_symbol(grid)
    c = theta_hat.coefficients
    u1_hat = SpectralField(grid, s1 * c)
    u2_hat = SpectralField(grid, s2 * c)
    # the Nyquist row/column breaks conjugate symmetry for the mixed symbol;
    # keeping the real part is the real-valued interpretation of that mode
    u1 = inverse_transform(u1_hat, strict=False).values
    u2 = inverse_transform(u2_hat, strict=False).values
    return StokesSolution(VectorField(grid, np.stack([u1, u2])), (u1_hat, u2_hat))


def vorticity_from_theta(theta_hat: SpectralField) -> ScalarField:
    """Vorticity ``omega = d1 u2 - d2 u1`` solving ``-Lap omega = d1 theta``."""
    grid = theta_hat.grid
    k1, _ = grid.wavenumbers
    w_hat = 1j * k1 * _inverse_k2(grid, 1) * theta_hat.coefficients
    return inverse_transform(SpectralField(grid, w_hat), strict=False)


def streamfunction_from_theta(theta_hat: SpectralField) -> ScalarField:
    """Streamfunction ``psi = -(Lap^2)^-1 d1 theta`` with ``u = grad_perp psi``."""
    grid = theta_hat.grid
    k1, _ = grid.wavenumbers
    psi_hat = -1j * k1 * _inverse_k2(grid, 2) * theta_hat.coefficients
    return inverse_transform(SpectralField(grid, psi_hat), strict=False)


def velocity_gradient_spectral(theta_hat: SpectralField) -> np.ndarray:
    """Nodal ``grad u`` as an array ``G[d, c] = d_d u_c`` of shape ``(2, 2, n, n)``."""
    grid = theta_hat.grid
    k = grid.wavenumbers
    s = velocity_symbol(grid)
    c = theta_hat.coefficients
    out = np.empty((2, 2, grid.n, grid.n))
    for d in range(2):
        for comp in range(2):
            coeff = SpectralField(grid, 1j * k[d] * s[comp] * c)
            out[d, comp] = inverse_transform(coeff, strict=False).values
    return out


def velocity_hessian_spectral(theta_hat: SpectralField) -> np.ndarray:
    """Nodal ``grad grad u`` as ``T[a, d, c] = d_a d_d u_c``, shape ``(2, 2, 2, n, n)``."""
    grid = theta_hat.grid
    k = grid.wavenumbers
    s = velocity_symbol(grid)
    c = theta_hat.coefficients
    out = np.empty((2, 2, 2, grid.n, grid.n))
    for a in range(2):
        for d in range(a, 2):
            for comp in range(2):
                coeff = SpectralField(grid, -k[a] * k[d] * s[comp] * c)
                out[a, d, comp] = inverse_transform(coeff, strict=False).values
                out[d, a, comp] = out[a, d, comp]
    return out


def velocity_from_levelset(phi: ScalarField, epsilon: float = 0.0) -> VectorField:
    """The coupled map ``phi -> H(phi) -> [Gaussian filter] -> Stokes velocity``."""
    theta_hat = forward_transform(heaviside_indicator(phi))
    if epsilon > 0:
        theta_hat = gaussian_filter(theta_hat, epsilon)
    return solve_velocity(theta_hat).u
