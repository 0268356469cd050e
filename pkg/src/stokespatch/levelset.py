"""First-order upwind transport of the level set with Heun (SSP-RK2) stepping."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import BlowUpError, ConfigError
from .fields import ScalarField, VectorField, require_same_grid

__all__ = [
    "SimState",
    "upwind_rhs",
    "cfl_timestep",
    "realized_cfl",
    "heun_step",
    "advect_fixed",
]

VelocityMap = Callable[[ScalarField], VectorField]


@dataclass(frozen=True, eq=False)
class SimState:
    phi: ScalarField
    t: float = 0.0
    step_count: int = 0


def upwind_rhs(phi: ScalarField, u: VectorField) -> ScalarField:
    """Monotone upwind approximation of ``-u . grad phi`` with periodic wrap."""
    grid = require_same_grid(phi, u)
    f = phi.values
    inv_h = 1.0 / grid.h
    out = np.zeros_like(f)
    for axis in (0, 1):
        v = u.values[axis]
        d_plus = (np.roll(f, -1, axis=axis) - f) * inv_h
        d_minus = (f - np.roll(f, 1, axis=axis)) * inv_h
        out += np.maximum(-v, 0.0) * d_plus - np.maximum(v, 0.0) * d_minus
    return ScalarField(grid, out)


def _max_speed(u: VectorField) -> float:
    return float(np.max(np.abs(u.values[0]) + np.abs(u.values[1])))


def cfl_timestep(u: VectorField, cfl: float, dt_max: float) -> float:
    """``min(dt_max, cfl * h / max(|u1| + |u2|))``."""
    if not 0 < cfl <= 0.5:
        raise ConfigError(f"cfl must lie in (0, 1/2], got {cfl!r}")
    if not dt_max > 0:
        raise ConfigError(f"dt_max must be positive, got {dt_max!r}")
    speed = _max_speed(u)
    if speed == 0:
        return float(dt_max)
    return float(min(dt_max, cfl * u.grid.h / speed))


def realized_cfl(u: VectorField, dt: float) -> float:
    return dt * _max_speed(u) / u.grid.h


def heun_step(
    state: SimState,
    dt: float,
    velocity_of: VelocityMap | VectorField,
    rhs: Callable[[ScalarField, VectorField], ScalarField] = upwind_rhs,
) -> SimState:
    """Advance one Heun step, recomputing the velocity at both stages.

    ``velocity_of`` is either the coupled map ``phi -> u`` or a fixed field.
    """
    if dt == 0:
        return state
    if isinstance(velocity_of, VectorField):
        fixed = velocity_of
        velocity_of = lambda _phi: fixed  # noqa: E731

    phi0 = state.phi
    f0 = phi0.values
    stage = f0 + dt * rhs(phi0, velocity_of(phi0)).values
    phi1 = phi0.with_values(stage)
    new = 0.5 * f0 + 0.5 * (stage + dt * rhs(phi1, velocity_of(phi1)).values)

    t = state.t + dt
    steps = state.step_count + 1
    if not np.all(np.isfinite(new)):
        raise BlowUpError(t, steps)
    return SimState(phi0.with_values(new), t, steps)


def advect_fixed(
    phi0: ScalarField,
    u: VectorField,
    T: float,
    cfl: float = 0.5,
    dt_max: float = math.inf,
) -> ScalarField:
    """Transport ``phi0`` by the frozen velocity ``u`` up to time ``T`` exactly."""
    if not T > 0:
        raise ConfigError(f"final time must be positive, got {T!r}")
    if not np.any(u.values):
        return phi0
    dt = cfl_timestep(u, cfl, dt_max if math.isfinite(dt_max) else max(T, 1.0))
    state = SimState(phi0)
    while state.t < T:
        step = min(dt, T - state.t)
        state = heun_step(state, step, u)
        if T - state.t < 1e-14 * max(1.0, T):
            state = replace(state, t=T)
    return state.phi
