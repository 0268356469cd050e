"""Uniform torus grid, nodal and spectral field containers.

The grid has ``n`` nodes per axis with spacing ``h = 1/n`` and coordinates
``x_ij = h * (i - n/2, j - n/2)``, so the fundamental cell is
``[-1/2, 1/2)^2`` and node ``(n/2, n/2)`` is the origin.  Arrays are indexed
``[i, j]``: axis 0 runs along ``x1`` and axis 1 along ``x2``.

The forward transform is scaled by ``h**2`` so that the zero mode equals the
mean of the field::

    F(m) = h^2 * sum_ij f_ij exp(-1j k . x_ij),    k = 2 pi m

Spectral coefficients are stored in FFT order (integer mode ``m`` mod ``n``);
:meth:`GridSpec.modes` gives the signed mode numbers in ``[-n/2, n/2)``.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigError, GridMismatchError, SymmetryError

__all__ = [
    "GridSpec",
    "ScalarField",
    "VectorField",
    "SpectralField",
    "make_grid",
    "forward_transform",
    "inverse_transform",
    "heaviside_indicator",
    "gaussian_filter",
    "gaussian_multiplier",
    "write_snapshot",
    "read_snapshot",
    "SNAPSHOT_MAGIC",
]

SNAPSHOT_MAGIC = b"PSTK0001"
_IMAG_TOL = 1e-10


@dataclass(frozen=True)
class GridSpec:
    n: int

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @cached_property
    def axis(self) -> np.ndarray:
        """1D node coordinates ``h * (i - n/2)``."""
        return self.h * (np.arange(self.n) - self.n // 2)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates ``(X1, X2)`` as two ``n x n`` arrays."""
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    @cached_property
    def modes(self) -> tuple[np.ndarray, np.ndarray]:
        """Signed integer modes ``(M1, M2)`` in FFT storage order."""
        m = np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(np.int64)
        return np.meshgrid(m, m, indexing="ij")

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical wavenumbers ``k = 2 pi m`` in FFT storage order."""
        m1, m2 = self.modes
        return 2 * np.pi * m1, 2 * np.pi * m2

    @cached_property
    def k_squared(self) -> np.ndarray:
        k1, k2 = self.wavenumbers
        return k1**2 + k2**2

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(-i k.x_00 ) with x_00 = (-1/2, -1/2) reduces to (-1)^(m1+m2)
        m1, m2 = self.modes
        return np.where((m1 + m2) % 2 == 0, 1.0, -1.0)


def make_grid(n: int) -> GridSpec:
    """Return the ``n x n`` torus grid; ``n`` must be a power of two, ``n >= 8``."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise ConfigError(f"grid size must be an integer, got {n!r}")
    n = int(n)
    if n < 8 or n & (n - 1):
        raise ConfigError(f"grid size must be a power of two >= 8, got {n}")
    return GridSpec(n)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"expected shape {(self.grid.n, self.grid.n)}, got {values.shape}"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Velocity-like data; ``values[c]`` is component ``c`` (0 -> u1, 1 -> u2)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (2, self.grid.n, self.grid.n):
            raise ValueError(
                f"expected shape {(2, self.grid.n, self.grid.n)}, got {values.shape}"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VectorField":
        return cls(grid, np.zeros((2, grid.n, grid.n)))

    @property
    def u1(self) -> np.ndarray:
        return self.values[0]

    @property
    def u2(self) -> np.ndarray:
        return self.values[1]


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: GridSpec
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"expected shape {(self.grid.n, self.grid.n)}, got {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    def coeff(self, m1: int, m2: int) -> complex:
        """Coefficient of signed mode ``(m1, m2)``."""
        n = self.grid.n
        return complex(self.coefficients[m1 % n, m2 % n])

    def symmetry_defect(self) -> float:
        """Max ``|F(-m) - conj(F(m))|`` over all modes (aliased partners included)."""
        c = self.coefficients
        flipped = np.roll(c[::-1, ::-1], 1, axis=(0, 1))
        return float(np.max(np.abs(flipped - np.conj(c))))


def forward_transform(f: ScalarField) -> SpectralField:
    g = f.grid
    coeffs = g.h**2 * np.fft.fft2(f.values) * g._phase
    return SpectralField(g, coeffs)


def inverse_transform(F: SpectralField, strict: bool = True) -> ScalarField:
    """Evaluate ``sum_k F(k) exp(1j k . x_ij)`` on the grid.

    With ``strict`` the imaginary residue must stay below ``1e-10`` (relative
    to the field magnitude when that exceeds one); otherwise only the real
    part is kept.
    """
    g = F.grid
    out = np.fft.ifft2(F.coefficients * g._phase) * (g.n * g.n)
    if strict:
        residue = float(np.max(np.abs(out.imag))) if out.size else 0.0
        scale = max(1.0, float(np.max(np.abs(out.real))))
        if residue > _IMAG_TOL * scale:
            raise SymmetryError(
                f"inverse transform has imaginary residue {residue:.3e}; "
                "input is not conjugate symmetric"
            )
    return ScalarField(g, out.real)


def heaviside_indicator(phi: ScalarField) -> ScalarField:
    """Nodal indicator ``H(phi)`` with the tie rule ``H(0) = 1/2``."""
    v = phi.values
    theta = np.where(v > 0, 1.0, np.where(v < 0, 0.0, 0.5))
    return ScalarField(phi.grid, theta)


def gaussian_multiplier(grid: GridSpec, eps: float) -> np.ndarray:
    return np.exp(-0.5 * eps**2 * grid.k_squared)


def gaussian_filter(F: SpectralField, eps: float) -> SpectralField:
    """Convolve with the isotropic Gaussian of standard deviation ``eps``."""
    if not eps >= 0:
        raise ConfigError(f"filter width must be nonnegative, got {eps!r}")
    if eps == 0:
        return F
    return SpectralField(F.grid, F.coefficients * gaussian_multiplier(F.grid, eps))


def require_same_grid(*fields) -> GridSpec:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grid n={f.grid.n} does not match n={grid.n}")
    return grid


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_snapshot(path, phi: ScalarField, t: float) -> None:
    """Write ``phi`` at time ``t`` in the ``PSTK0001`` binary format."""
    header = SNAPSHOT_MAGIC + struct.pack("<Id", phi.grid.n, float(t))
    body = np.ascontiguousarray(phi.values, dtype="<f8").tobytes(order="C")
    _atomic_write_bytes(Path(path), header + body)


def read_snapshot(path) -> tuple[ScalarField, float]:
    """Read a ``PSTK0001`` snapshot, returning ``(phi, t)``."""
    data = Path(path).read_bytes()
    if data[:8] != SNAPSHOT_MAGIC:
        raise ConfigError(f"{path}: not a PSTK0001 snapshot")
    n, t = struct.unpack_from("<Id", data, 8)
    expected = 8 + 12 + 8 * n * n
    if len(data) != expected:
        raise ConfigError(f"{path}: expected {expected} bytes, found {len(data)}")
    grid = make_grid(n)
    values = np.frombuffer(data, dtype="<f8", offset=20).reshape(n, n).astype(float)
    return ScalarField(grid, values), t
