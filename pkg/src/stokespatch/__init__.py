"""Density patches in the transport-Stokes system on the periodic unit square.

The level set of the patch is transported by upwind differences with Heun
stepping; the velocity comes from a spectral Stokes solve.  Free-space
kernels, contour dynamics and geometric diagnostics support verification.
"""

from .errors import (
    AreaAbortError,
    BlowUpError,
    ConfigError,
    DegenerateContourError,
    EmptyContourError,
    GridMismatchError,
    SingularPointError,
    StokesPatchError,
    SymmetryError,
)
from .fields import (
    GridSpec,
    ScalarField,
    SpectralField,
    VectorField,
    forward_transform,
    gaussian_filter,
    heaviside_indicator,
    inverse_transform,
    make_grid,
    read_snapshot,
    write_snapshot,
)
from .levelset import SimState, advect_fixed, cfl_timestep, heun_step, upwind_rhs
from .sim import (
    AnnulusCosineIC,
    CircleIC,
    CustomFileIC,
    RunSummary,
    SimConfig,
    parse_config,
    resume_simulation,
    run_simulation,
    serialize_config,
)
from .stokes import solve_velocity, velocity_from_levelset

__version__ = "0.1.0"
