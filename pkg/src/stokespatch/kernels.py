"""Free-space kernels of the transport-Stokes system and quadratures built on them.

Notation: ``K`` is the streamfunction kernel, ``G = grad_perp K`` the velocity
kernel, ``Q`` the vorticity kernel and ``H1, H2`` the degree-zero parts of the
second derivatives, ``d_i grad G(z) = H_i(z) / (4 pi |z|^2)``.

Matrix layout for ``grad G`` and ``H_i``: entry ``[d, c]`` is the derivative in
direction ``d`` of component ``c``.  Third-order quantities are indexed
``[a, d, c]`` with ``a`` the outer derivative direction.

Every kernel accepts a single point of shape ``(2,)`` or a stack of shape
``(..., 2)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Protocol

import numpy as np

from .errors import DegenerateContourError, SingularPointError

__all__ = [
    "eval_K",
    "eval_K_G",
    "eval_gradK_gradG",
    "eval_hess_parts",
    "eval_Q",
    "E",
    "PatchSampler",
    "DiscSpec",
    "EllipseSpec",
    "PatchContour",
    "signed_area",
    "velocity_area_quadrature",
    "velocity_gradient_quadrature",
    "velocity_contour_integral",
    "cde_rhs",
    "cde_integrate",
    "HessianEstimate",
    "hessu_pv_quadrature",
    "write_contour_csv",
    "read_contour_csv",
]

_INV_4PI = 1.0 / (4.0 * np.pi)
_INV_8PI = 1.0 / (8.0 * np.pi)


def _split(z):
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 2:
        raise ValueError(f"points must have trailing dimension 2, got {z.shape}")
    z1, z2 = z[..., 0], z[..., 1]
    r2 = z1 * z1 + z2 * z2
    if np.any(r2 == 0):
        raise SingularPointError("kernel evaluated at z = 0")
    return z1, z2, r2


def eval_K(z):
    z1, _, r2 = _split(z)
    return -z1 * _INV_4PI * (0.5 * np.log(r2) - 0.5)


def eval_K_G(z):
    """Return ``(K(z), G(z))``."""
    z1, z2, r2 = _split(z)
    log_r = 0.5 * np.log(r2)
    K = -z1 * _INV_4PI * (log_r - 0.5)
    G = np.stack(
        [2 * z1 * z2 / r2, 1 - 2 * log_r - 2 * z1 * z1 / r2], axis=-1
    ) * _INV_8PI
    return K, G


def eval_gradK_gradG(z):
    """Return ``(grad K(z), grad G(z))`` with ``gradG[..., d, c] = d_d G_c``."""
    z1, z2, r2 = _split(z)
    log_r = 0.5 * np.log(r2)
    gradK = np.stack(
        [-2 * log_r - (z1 * z1 - z2 * z2) / r2, -2 * z1 * z2 / r2], axis=-1
    ) * _INV_8PI
    pre = -_INV_4PI / (r2 * r2)
    d = z1 * z1 - z2 * z2
    gradG = np.empty(z1.shape + (2, 2))
    gradG[..., 0, 0] = z2 * d
    gradG[..., 0, 1] = z1**3 + 3 * z1 * z2 * z2
    gradG[..., 1, 0] = -z1 * d
    gradG[..., 1, 1] = -z2 * d
    gradG *= pre[..., None, None]
    return gradK, gradG


def eval_hess_parts(z):
    """Return ``(H1(z), H2(z))``, homogeneous of degree zero."""
    z1, z2, r2 = _split(z)
    inv = 1.0 / (r2 * r2)
    a, b = z1 * z1, z2 * z2
    quartic = a * a - 6 * a * b + b * b
    H1 = np.empty(z1.shape + (2, 2))
    H1[..., 0, 0] = 2 * z1 * z2 * (a - 3 * b)
    H1[..., 0, 1] = a * a + 6 * a * b - 3 * b * b
    # d1 d2 G1 = d2 d1 G1 forces H1[1, 0] = H2[0, 0]
    H1[..., 1, 0] = -quartic
    H1[..., 1, 1] = 2 * z1 * z2 * (3 * b - a)
    H2 = np.empty_like(H1)
    H2[..., 0, 0] = -quartic
    H2[..., 0, 1] = 2 * z2 * (3 * z1 * b - z1 * a)
    H2[..., 1, 0] = 2 * z1 * z2 * (b - 3 * a)
    H2[..., 1, 1] = quartic
    return H1 * inv[..., None, None], H2 * inv[..., None, None]


def E():
    """Delta-function part of ``grad grad u`` per unit density, shape ``(2, 2, 2)``."""
    return np.array(
        [
            [[0.0, -3.0], [1.0, 0.0]],
            [[1.0, 0.0], [0.0, -1.0]],
        ]
    ) / 8.0


def eval_Q(z):
    z1, _, r2 = _split(z)
    return -z1 / (2 * np.pi * r2)


# -- patches ---------------------------------------------------------------


class PatchSampler(Protocol):
    """Indicator of a bounded patch: ``bbox`` plus vectorized point evaluation."""

    bbox: tuple[float, float, float, float]

    def __call__(self, y1: np.ndarray, y2: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class DiscSpec:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius!r}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def bbox(self):
        c1, c2 = self.center
        r = self.radius
        return (c1 - r, c1 + r, c2 - r, c2 + r)

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    def __call__(self, y1, y2):
        c1, c2 = self.center
        return ((y1 - c1) ** 2 + (y2 - c2) ** 2 <= self.radius**2).astype(float)

    def contour(self, nodes: int, orientation: str = "ccw") -> "PatchContour":
        return EllipseSpec(self.center, self.radius, self.radius).contour(nodes, orientation)


@dataclass(frozen=True)
class EllipseSpec:
    center: tuple[float, float]
    a: float
    b: float

    @property
    def bbox(self):
        c1, c2 = self.center
        return (c1 - self.a, c1 + self.a, c2 - self.b, c2 + self.b)

    def __call__(self, y1, y2):
        c1, c2 = self.center
        return (((y1 - c1) / self.a) ** 2 + ((y2 - c2) / self.b) ** 2 <= 1).astype(float)

    def contour(self, nodes: int, orientation: str = "ccw") -> "PatchContour":
        alpha = 2 * np.pi * np.arange(nodes) / nodes
        if orientation == "cw":
            alpha = -alpha
        pts = np.column_stack(
            [self.center[0] + self.a * np.cos(alpha), self.center[1] + self.b * np.sin(alpha)]
        )
        return PatchContour(pts, orientation)


def signed_area(points) -> float:
    """Shoelace area, positive for counterclockwise polylines."""
    p = np.asarray(points, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True, eq=False)
class PatchContour:
    """Closed polyline; the last node connects back to the first."""

    points: np.ndarray
    orientation: str

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 8:
            raise ValueError("a contour needs at least 8 points of shape (m, 2)")
        if self.orientation not in ("cw", "ccw"):
            raise ValueError(f"orientation must be 'cw' or 'ccw', got {self.orientation!r}")
        steps = np.linalg.norm(pts - np.roll(pts, 1, axis=0), axis=1)
        if np.any(steps == 0):
            raise DegenerateContourError("contour has repeated consecutive points")
        area = signed_area(pts)
        if (area > 0) != (self.orientation == "ccw"):
            raise ValueError(
                f"orientation flag {self.orientation!r} contradicts signed area {area:.3e}"
            )
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_points(cls, points) -> "PatchContour":
        return cls(points, "ccw" if signed_area(points) > 0 else "cw")

    @property
    def sign(self) -> float:
        """+1 for counterclockwise, -1 for clockwise."""
        return 1.0 if self.orientation == "ccw" else -1.0

    def reversed(self) -> "PatchContour":
        flipped = "cw" if self.orientation == "ccw" else "ccw"
        return PatchContour(self.points[::-1], flipped)

    def translated(self, shift) -> "PatchContour":
        return PatchContour(self.points + np.asarray(shift, dtype=float), self.orientation)

    def __len__(self):
        return len(self.points)


# -- velocity by area quadrature -------------------------------------------


def _cell_grid(bbox, resolution):
    x0, x1, y0, y1 = bbox
    width = max(x1 - x0, y1 - y0)
    h = width / resolution
    n1 = max(1, int(math.ceil((x1 - x0) / h - 1e-9)))
    n2 = max(1, int(math.ceil((y1 - y0) / h - 1e-9)))
    c1 = x0 + h * (np.arange(n1) + 0.5)
    c2 = y0 + h * (np.arange(n2) + 0.5)
    Y1, Y2 = np.meshgrid(c1, c2, indexing="ij")
    return Y1, Y2, h


def _midpoint_with_singular_cell(patch, x, resolution, kernel):
    Y1, Y2, h = _cell_grid(patch.bbox, resolution)
    theta = patch(Y1, Y2)
    z = np.stack([x[0] - Y1, x[1] - Y2], axis=-1)
    hit = (np.abs(z[..., 0]) < 1e-12) & (np.abs(z[..., 1]) < 1e-12)
    weights = theta * h * h
    total = 0.0
    keep = (weights != 0) & ~hit
    total = np.tensordot(weights[keep], kernel(z[keep]), axes=(0, 0))
    for i, j in zip(*np.nonzero(hit & (theta != 0))):
        # one-level subdivision of the cell containing the field point
        q = 0.25 * h
        sub = np.array([[-q, -q], [q, -q], [-q, q], [q, q]])
        ys = np.array([Y1[i, j], Y2[i, j]]) + sub
        ts = patch(ys[:, 0], ys[:, 1])
        total = total + np.tensordot(ts * (0.25 * h * h), kernel(x - ys), axes=(0, 0))
    return np.asarray(total, dtype=float)


def velocity_area_quadrature(patch: PatchSampler, x, resolution: int = 1024) -> np.ndarray:
    """``u(x) = int G(x - y) theta(y) dy`` by the midpoint rule over ``patch.bbox``."""
    if resolution < 64:
        raise ValueError("resolution must be at least 64")
    x = np.asarray(x, dtype=float)
    return _midpoint_with_singular_cell(patch, x, resolution, lambda z: eval_K_G(z)[1])


def velocity_gradient_quadrature(
    patch: PatchSampler, x, resolution: int = 512
) -> np.ndarray:
    """``grad u(x) = int grad G(z) theta(x - z) dz`` in polar coordinates about ``x``.

    ``grad G`` is homogeneous of degree -1, so in polar coordinates the
    integrand is bounded and no exclusion is needed.
    """
    x = np.asarray(x, dtype=float)
    r_lo = 0.0 if _inside_bbox(patch.bbox, x) else _bbox_distance(patch.bbox, x)
    nodes = _polar_nodes(patch.bbox, x, resolution, r_lo, log_radial=False)
    y1, y2, e, weight = nodes
    theta = patch(y1, y2)
    _, gG = eval_gradK_gradG(-e)
    # r dr dphi * |grad G(r e)| = dr dphi * grad G(e)
    return np.tensordot(theta * weight, gG, axes=(0, 0))


# -- Green's theorem line integrals ---------------------------------------


def _tangents(points):
    return 0.5 * (np.roll(points, -1, axis=0) - np.roll(points, 1, axis=0))


def velocity_contour_integral(
    contour: PatchContour, x, _raw: bool = False
) -> np.ndarray:
    """Velocity at ``x`` from the boundary integral ``-oint K(x - z) dz``.

    The integral with the leading minus sign is taken along the
    counterclockwise traversal; clockwise input is negated accordingly.
    ``_raw`` returns the integral along the stored node order instead.
    """
    x = np.asarray(x, dtype=float)
    pts = contour.points
    dist = np.linalg.norm(pts - x, axis=1)
    if np.min(dist) < 1e-9:
        raise SingularPointError("field point lies on the contour")
    raw = -(eval_K(x - pts)[:, None] * _tangents(pts)).sum(axis=0)
    return raw if _raw else contour.sign * raw


def cde_rhs(contour: PatchContour) -> np.ndarray:
    """Node velocities ``dz/dt`` of the contour dynamics equation, shape ``(m, 2)``.

    Periodic trapezoid rule in the node index; the self term is dropped since
    ``K(z) -> 0`` as ``z -> 0``.
    """
    pts = contour.points
    if np.any(np.linalg.norm(pts - np.roll(pts, 1, axis=0), axis=1) == 0):
        raise DegenerateContourError("contour has repeated consecutive points")
    diff = pts[:, None, :] - pts[None, :, :]
    m = len(pts)
    idx = np.arange(m)
    diff[idx, idx] = 1.0  # placeholder, zeroed below
    Kmat = eval_K(diff)
    Kmat[idx, idx] = 0.0
    return -contour.sign * (Kmat @ _tangents(pts))


def _check_spacing(points):
    spacing = np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1)
    if np.min(spacing) < 1e-3 * np.mean(spacing):
        raise DegenerateContourError("adjacent contour nodes collided")


def cde_integrate(contour: PatchContour, dt: float, steps: int) -> PatchContour:
    """Heun integration of the contour dynamics equation, without regridding."""
    pts = contour.points
    orient = contour.orientation
    for _ in range(int(steps)):
        c0 = PatchContour(pts, orient)
        stage = pts + dt * cde_rhs(c0)
        _check_spacing(stage)
        pts = 0.5 * pts + 0.5 * (stage + dt * cde_rhs(PatchContour(stage, orient)))
        _check_spacing(pts)
    return PatchContour(pts, orient)


# -- principal-value second derivatives ----------------------------------


def _inside_bbox(bbox, x):
    x0, x1, y0, y1 = bbox
    return x0 <= x[0] <= x1 and y0 <= x[1] <= y1


def _bbox_distance(bbox, x):
    x0, x1, y0, y1 = bbox
    d1 = max(x0 - x[0], 0.0, x[0] - x1)
    d2 = max(y0 - x[1], 0.0, x[1] - y1)
    return math.hypot(d1, d2)


def _polar_nodes(bbox, x, resolution, r_lo, log_radial):
    """Midpoint nodes of a polar grid about ``x`` covering ``bbox``.

    Returns sample points, unit directions ``e`` (pointing from the sample
    back to ``x`` reversed, i.e. ``y = x + r e``) and weights for ``dr dphi``
    (or ``ds dphi`` with ``s = log r`` when ``log_radial``).
    """
    x0, x1, y0, y1 = bbox
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]) - x
    r_hi = float(np.max(np.linalg.norm(corners, axis=1)))
    if _inside_bbox(bbox, x):
        n_phi = 4 * resolution
        phi = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
        dphi = 2 * np.pi / n_phi
    else:
        ang = np.arctan2(corners[:, 1], corners[:, 0])
        ref = np.arctan2(-(x[1] - 0.5 * (y0 + y1)), -(x[0] - 0.5 * (x0 + x1)))
        rel = np.angle(np.exp(1j * (ang - ref)))
        lo, hi = ref + rel.min(), ref + rel.max()
        n_phi = max(2 * resolution, 16)
        dphi = (hi - lo) / n_phi
        phi = lo + dphi * (np.arange(n_phi) + 0.5)
    n_r = resolution
    if log_radial:
        s_lo, s_hi = math.log(r_lo), math.log(r_hi)
        ds = (s_hi - s_lo) / n_r
        r = np.exp(s_lo + ds * (np.arange(n_r) + 0.5))
        dr = ds
    else:
        dr = (r_hi - r_lo) / n_r
        r = r_lo + dr * (np.arange(n_r) + 0.5)
    R, P = np.meshgrid(r, phi, indexing="ij")
    e = np.stack([np.cos(P), np.sin(P)], axis=-1).reshape(-1, 2)
    y1_ = x[0] + (R * np.cos(P)).ravel()
    y2_ = x[1] + (R * np.sin(P)).ravel()
    weight = np.full(y1_.shape, dr * dphi)
    return y1_, y2_, e, weight


class HessianEstimate(NamedTuple):
    value: np.ndarray  # (2, 2, 2), indexed [a, d, c]
    exclusion: float


def hessu_pv_quadrature(
    patch: PatchSampler, x, exclusion: float, resolution: int = 256
) -> HessianEstimate:
    """``grad grad u(x) = theta(x) E + (1/4 pi) pv int H(z)/|z|^2 theta(x - z) dz``.

    The principal value excludes the disc ``|z| < exclusion``.  Quadrature is
    the midpoint rule in ``(log r, angle)`` about ``x``, where the kernel
    becomes ``H(angle)`` and the mean-zero cancellation is exact.
    """
    if not exclusion > 0:
        raise ValueError("exclusion radius must be positive")
    x = np.asarray(x, dtype=float)
    theta_x = float(patch(np.array([x[0]]), np.array([x[1]]))[0])
    r_lo = max(exclusion, _bbox_distance(patch.bbox, x))
    x0, x1, y0, y1 = patch.bbox
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]) - x
    if r_lo >= float(np.max(np.linalg.norm(corners, axis=1))):
        return HessianEstimate(theta_x * E(), exclusion)
    y1_, y2_, e, weight = _polar_nodes(patch.bbox, x, resolution, r_lo, log_radial=True)
    # theta(x - z) with z = -r e; H is even so H(-e) = H(e)
    theta = patch(y1_, y2_)
    H1, H2 = eval_hess_parts(e)
    w = theta * weight * _INV_4PI
    pv = np.stack([np.tensordot(w, H1, axes=(0, 0)), np.tensordot(w, H2, axes=(0, 0))])
    return HessianEstimate(theta_x * E() + pv, exclusion)


# -- CSV interchange ------------------------------------------------------


def write_contour_csv(path, contour: PatchContour, t: float, extra: dict | None = None) -> None:
    """Write ``x1,x2`` rows under a ``# key=value`` header; ``extra`` adds real-valued keys."""
    from .fields import _atomic_write_bytes

    head = f"# t={t:.17g} n={len(contour)} orientation={contour.orientation}"
    for key, value in (extra or {}).items():
        head += f" {key}={float(value):.17g}"
    lines = [head]
    lines += [f"{p[0]:.17g},{p[1]:.17g}" for p in contour.points]
    _atomic_write_bytes(Path(path), ("\n".join(lines) + "\n").encode())


def read_contour_csv(path) -> tuple[PatchContour, float]:
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing contour header")
        meta = dict(item.split("=", 1) for item in header[1:].split())
        rows = [(float(a), float(b)) for a, b in csv.reader(fh) if a]
    if int(meta["n"]) != len(rows):
        raise ValueError(f"{path}: header says {meta['n']} points, found {len(rows)}")
    return PatchContour(np.array(rows), meta["orientation"]), float(meta["t"])
