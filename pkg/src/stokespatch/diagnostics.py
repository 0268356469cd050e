"""Contours, geometry and regularity monitors for level-set snapshots.

Everything here works on the periodic grid.  Contours are returned in lifted
coordinates: consecutive nodes are never more than a cell apart, so a patch
straddling the seam of ``[-1/2, 1/2)^2`` comes back as one closed polyline
that may poke outside the fundamental cell.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, fields as dc_fields
from pathlib import Path

import numpy as np

from .errors import EmptyContourError
from .fields import ScalarField, heaviside_indicator
from .kernels import E, PatchContour, hessu_pv_quadrature, signed_area

log = logging.getLogger(__name__)

__all__ = [
    "DiagnosticsRecord",
    "DIAGNOSTICS_HEADER",
    "extract_contour",
    "patch_area",
    "polygon_area",
    "center_of_mass",
    "CenterTracker",
    "curvature_profile",
    "regularity_monitors",
    "GridIndicator",
    "hess_u_sup_estimate",
    "hausdorff_distance",
    "align_periodic",
    "DiagnosticsWriter",
    "read_diagnostics",
    "band_mask",
    "delta_cutoff",
    "levelset_hessian_band_sup",
    "lifted_axes",
    "E_max_norm",
]


def _wrap(d):
    return d - np.floor(d + 0.5)


# -- marching squares -------------------------------------------------------


def _contour_loops(phi: ScalarField) -> list[np.ndarray]:
    """All closed zero-level loops, each oriented with ``phi > 0`` on its left."""
    grid = phi.grid
    n, h = grid.n, grid.h
    v = phi.values
    pos = v >= 0
    c0 = pos
    c1 = np.roll(pos, -1, axis=0)
    c2 = np.roll(np.roll(pos, -1, axis=0), -1, axis=1)
    c3 = np.roll(pos, -1, axis=1)
    code = c0.astype(int) | (c1 << 1) | (c2 << 2) | (c3 << 3)
    cells = np.argwhere((code != 0) & (code != 15))
    if len(cells) == 0:
        return []

    # edge keys: ("h", i, j) joins node (i,j)-(i+1,j); ("v", i, j) joins (i,j)-(i,j+1)
    def edge_point(key):
        kind, i, j = key
        a = v[i, j]
        if kind == "h":
            b = v[(i + 1) % n, j]
            s = a / (a - b)
            return (grid.axis[i] + s * h, grid.axis[j])
        b = v[i, (j + 1) % n]
        s = a / (a - b)
        return (grid.axis[i], grid.axis[j] + s * h)

    nxt: dict[tuple, tuple] = {}
    for i, j in cells:
        ip, jp = (i + 1) % n, (j + 1) % n
        corners = (pos[i, j], pos[ip, j], pos[ip, jp], pos[i, jp])
        edges = (("h", i, j), ("v", ip, j), ("h", i, jp), ("v", i, j))
        starts = [k for k in range(4) if corners[k] and not corners[(k + 1) % 4]]
        ends = [k for k in range(4) if not corners[k] and corners[(k + 1) % 4]]
        center_pos = (v[i, j] + v[ip, j] + v[ip, jp] + v[i, jp]) >= 0
        for k in starts:
            if center_pos:
                e = min(ends, key=lambda m: (m - k) % 4)
            else:
                e = min(ends, key=lambda m: (k - m) % 4)
            nxt[edges[k]] = edges[e]

    loops = []
    seen = set()
    for start in nxt:
        if start in seen:
            continue
        keys = []
        key = start
        while key not in seen:
            seen.add(key)
            keys.append(key)
            key = nxt[key]
        raw = np.array([edge_point(k) for k in keys])
        steps = _wrap(np.diff(raw, axis=0, append=raw[:1]))
        if np.any(np.abs(steps.sum(axis=0)) > 0.5):
            continue  # winds around the torus; not the boundary of a patch
        lifted = raw[0] + np.vstack([[0.0, 0.0], np.cumsum(steps[:-1], axis=0)])
        keep = np.linalg.norm(lifted - np.roll(lifted, 1, axis=0), axis=1) > 1e-14
        loops.append(lifted[keep])
    return loops


def extract_contour(phi: ScalarField) -> PatchContour:
    """Largest closed component of ``{phi = 0}``; positive side on the left.

    A patch ``{phi > 0}`` therefore comes back counterclockwise, and the
    sign-flipped field gives the same points clockwise.
    """
    loops = [lp for lp in _contour_loops(phi) if len(lp) >= 3]
    if not loops:
        raise EmptyContourError("level set has no closed zero crossing")
    areas = [abs(signed_area(lp)) for lp in loops]
    best = int(np.argmax(areas))
    for k, lp in enumerate(loops):
        if k != best:
            log.debug("discarding contour component with %d nodes, area %.3e", len(lp), areas[k])
    pts = loops[best]
    if len(pts) < 8:
        pts = _refine_polyline(pts, 8)
    return PatchContour.from_points(pts)


def _refine_polyline(pts, count):
    closed = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    target = np.linspace(0, s[-1], count, endpoint=False)
    return np.column_stack([np.interp(target, s, closed[:, c]) for c in range(2)])


# -- areas and center of mass ----------------------------------------------


def patch_area(phi: ScalarField) -> float:
    """``h^2 * sum H(phi)``."""
    return phi.grid.h**2 * float(np.sum(heaviside_indicator(phi).values))


def polygon_area(contour: PatchContour) -> float:
    return abs(signed_area(contour.points))


def _unwrapped_axis(grid, occupancy):
    """Lift the 1D node coordinates so the occupied set is contiguous.

    The cut is placed in the middle of the longest periodic run of empty
    nodes; coordinates then run over ``[cut, cut + 1)``.
    """
    n = grid.n
    x = grid.axis
    empty = occupancy == 0
    if not np.any(empty):
        return x.copy()
    # longest run of empty entries on the circle
    doubled = np.concatenate([empty, empty])
    best_len, best_end, run = 0, 0, 0
    for k, e in enumerate(doubled):
        run = run + 1 if e else 0
        if run > best_len:
            best_len, best_end = min(run, n), k
    mid = (best_end - (best_len - 1) / 2.0) % n
    cut = grid.h * (mid - n // 2)
    return cut + np.mod(x - cut, 1.0)


def lifted_axes(phi: ScalarField):
    """Per-axis lifted node coordinates that keep the patch contiguous."""
    theta = heaviside_indicator(phi).values
    a1 = _unwrapped_axis(phi.grid, theta.sum(axis=1))
    a2 = _unwrapped_axis(phi.grid, theta.sum(axis=0))
    return a1, a2


def center_of_mass(phi: ScalarField) -> np.ndarray:
    """Indicator-weighted mean position, computed in a seam-free lift."""
    theta = heaviside_indicator(phi).values
    mass = theta.sum()
    if mass == 0:
        raise EmptyContourError("center of mass of an empty patch")
    a1, a2 = lifted_axes(phi)
    q1 = float(np.sum(theta.sum(axis=1) * a1) / mass)
    q2 = float(np.sum(theta.sum(axis=0) * a2) / mass)
    return np.array([q1, q2])


class CenterTracker:
    """Continues the center of mass across snapshots by adding whole periods."""

    def __init__(self):
        self.previous = None

    def update(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.previous is not None:
            q = q - np.round(q - self.previous)
        self.previous = q
        return q


def align_periodic(points, reference) -> np.ndarray:
    """Shift ``points`` by whole periods so their centroid is nearest ``reference``'s."""
    points = np.asarray(points, dtype=float)
    shift = np.round(points.mean(axis=0) - np.asarray(reference, dtype=float).mean(axis=0))
    return points - shift


def _densify(points, spacing):
    closed = np.vstack([points, points[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    reps = np.maximum(1, np.ceil(seg / spacing).astype(int))
    out = [closed[i] + np.outer(np.arange(r) / r, closed[i + 1] - closed[i])
           for i, r in enumerate(reps)]
    return np.vstack(out)


def hausdorff_distance(a, b, spacing: float | None = None) -> float:
    """Symmetric Hausdorff distance between two closed polylines."""
    from scipy.spatial import cKDTree

    a = np.asarray(getattr(a, "points", a), dtype=float)
    b = np.asarray(getattr(b, "points", b), dtype=float)
    if spacing is None:
        seg = np.linalg.norm(np.diff(a, axis=0), axis=1)
        spacing = 0.25 * float(np.median(seg))
    da, db = _densify(a, spacing), _densify(b, spacing)
    return float(max(cKDTree(db).query(da)[0].max(), cKDTree(da).query(db)[0].max()))


# -- curvature --------------------------------------------------------------


def curvature_profile(contour: PatchContour, stride: int = 16):
    """Circumcircle curvature along the contour.

    The polyline is resampled to four times its node count at uniform arc
    length; curvature at each resampled node comes from the circle through it
    and the nodes ``stride`` positions before and after.  Returns
    ``(curvatures, max_curvature)``.
    """
    pts = np.asarray(contour.points)
    m = len(pts)
    if m < 8:
        raise ValueError("curvature needs at least 8 nodes")
    res = _refine_polyline(pts, 4 * m)
    a = np.roll(res, stride, axis=0)
    c = np.roll(res, -stride, axis=0)
    ab = np.linalg.norm(res - a, axis=1)
    bc = np.linalg.norm(c - res, axis=1)
    ca = np.linalg.norm(a - c, axis=1)
    cross = (res[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (res[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    denom = ab * bc * ca
    kappa = np.where(denom > 0, 2.0 * np.abs(cross) / np.where(denom > 0, denom, 1.0), 0.0)
    return kappa, float(kappa.max())


# -- regularity monitors ----------------------------------------------------


def _centered_gradient(phi: ScalarField):
    f = phi.values
    inv2h = 0.5 / phi.grid.h
    g1 = (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) * inv2h
    g2 = (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) * inv2h
    return g1, g2


def band_mask(phi: ScalarField) -> np.ndarray:
    """Nodes belonging to a grid cell crossed by the zero level set."""
    pos = phi.values >= 0
    cell_pos = pos.astype(int)
    total = (
        cell_pos
        + np.roll(cell_pos, -1, axis=0)
        + np.roll(cell_pos, -1, axis=1)
        + np.roll(np.roll(cell_pos, -1, axis=0), -1, axis=1)
    )
    crossed = (total > 0) & (total < 4)
    mask = crossed.copy()
    mask |= np.roll(crossed, 1, axis=0)
    mask |= np.roll(crossed, 1, axis=1)
    mask |= np.roll(np.roll(crossed, 1, axis=0), 1, axis=1)
    return mask


def regularity_monitors(
    phi: ScalarField, mu: float = 0.5, sample_pairs: int = 2000, seed: int = 0
):
    """``(|grad phi|_inf on the band, sampled mu-Holder seminorm, delta cutoff)``.

    Pairs start at random band nodes and end at a node displaced by a
    log-uniform distance in ``[2h, 1/4]`` in a random direction.  The cutoff is
    ``(inf / seminorm)^(1/mu)``, reported as 1 when the seminorm vanishes.
    """
    if not 0 < mu < 1:
        raise ValueError(f"Holder exponent must lie in (0, 1), got {mu!r}")
    grid = phi.grid
    n, h = grid.n, grid.h
    mask = band_mask(phi)
    if not np.any(mask):
        raise EmptyContourError("no grid cell is crossed by the zero level set")
    g1, g2 = _centered_gradient(phi)
    gnorm = np.hypot(g1, g2)
    inf_band = float(gnorm[mask].min())

    rng = np.random.default_rng(seed)
    band = np.argwhere(mask)
    start = band[rng.integers(len(band), size=sample_pairs)]
    dist = np.exp(rng.uniform(math.log(2 * h), math.log(0.25), size=sample_pairs))
    ang = rng.uniform(0, 2 * np.pi, size=sample_pairs)
    offset = np.rint(np.column_stack([dist * np.cos(ang), dist * np.sin(ang)]) / h).astype(int)
    offset[np.all(offset == 0, axis=1)] = (2, 0)
    i0, j0 = start[:, 0], start[:, 1]
    i1, j1 = (i0 + offset[:, 0]) % n, (j0 + offset[:, 1]) % n
    sep = h * np.hypot(offset[:, 0], offset[:, 1])
    jump = np.hypot(g1[i0, j0] - g1[i1, j1], g2[i0, j0] - g2[i1, j1])
    seminorm = float(np.max(jump / sep**mu))
    return inf_band, seminorm, delta_cutoff(inf_band, seminorm, mu)


def delta_cutoff(inf_band: float, seminorm: float, mu: float) -> float:
    """``(inf / seminorm)^(1/mu)``, capped at 1 when the seminorm vanishes."""
    if seminorm == 0:
        return 1.0
    return float((inf_band / seminorm) ** (1.0 / mu))


@dataclass(frozen=True)
class GridIndicator:
    """The nodal indicator of ``phi`` as a free-space patch sampler.

    One period of the patch is kept, lifted so that it does not straddle the
    seam; points outside that window sample zero.
    """

    phi: ScalarField

    def __post_init__(self):
        theta = heaviside_indicator(self.phi).values
        a1, a2 = lifted_axes(self.phi)
        h = self.phi.grid.h
        object.__setattr__(self, "_theta", theta)
        object.__setattr__(self, "_lo", (a1.min() - 0.5 * h, a2.min() - 0.5 * h))
        rows, cols = np.nonzero(theta)
        if len(rows) == 0:
            raise EmptyContourError("empty patch")
        box = (a1[rows].min() - h, a1[rows].max() + h, a2[cols].min() - h, a2[cols].max() + h)
        object.__setattr__(self, "bbox", box)

    def __call__(self, y1, y2):
        grid = self.phi.grid
        n, h = grid.n, grid.h
        lo1, lo2 = self._lo
        inside = (y1 >= lo1) & (y1 < lo1 + 1) & (y2 >= lo2) & (y2 < lo2 + 1)
        i = np.rint(np.asarray(y1) / h + n // 2).astype(int) % n
        j = np.rint(np.asarray(y2) / h + n // 2).astype(int) % n
        return np.where(inside, self._theta[i, j], 0.0)


def hess_u_sup_estimate(
    phi: ScalarField,
    probes: int = 16,
    offset_cells: float = 4.0,
    exclusion_cells: float = 1.0,
    resolution: int = 128,
    points=None,
) -> float:
    """Max entry of ``|grad grad u|`` over probe points.

    By default the probes sit ``offset_cells`` inside the extracted contour,
    evenly spaced in node index; ``points`` overrides them.
    """
    if probes < 8 and points is None:
        raise ValueError("at least 8 probes are required")
    h = phi.grid.h
    sampler = GridIndicator(phi)
    if points is None:
        c = extract_contour(phi)
        pts = c.points
        idx = np.linspace(0, len(pts), probes, endpoint=False).astype(int)
        tang = np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)
        tang /= np.linalg.norm(tang, axis=1, keepdims=True)
        # positive side is on the left of the traversal
        inward = np.column_stack([-tang[:, 1], tang[:, 0]])
        points = pts[idx] + offset_cells * h * inward[idx]
        points = _into_window(points, sampler)
    best = 0.0
    for x in np.atleast_2d(points):
        est = hessu_pv_quadrature(sampler, x, exclusion_cells * h, resolution).value
        best = max(best, float(np.max(np.abs(est))))
    return best


def _into_window(points, sampler):
    lo1, lo2 = sampler._lo
    p = np.array(points, dtype=float)
    p[:, 0] = lo1 + np.mod(p[:, 0] - lo1, 1.0)
    p[:, 1] = lo2 + np.mod(p[:, 1] - lo2, 1.0)
    return p


def levelset_hessian_band_sup(phi: ScalarField, width: int = 2) -> float:
    """Max entry of the centered-difference Hessian of ``phi`` near the interface."""
    f = phi.values
    h2 = phi.grid.h ** 2
    d11 = (np.roll(f, -1, 0) - 2 * f + np.roll(f, 1, 0)) / h2
    d22 = (np.roll(f, -1, 1) - 2 * f + np.roll(f, 1, 1)) / h2
    d12 = (
        np.roll(np.roll(f, -1, 0), -1, 1)
        - np.roll(np.roll(f, -1, 0), 1, 1)
        - np.roll(np.roll(f, 1, 0), -1, 1)
        + np.roll(np.roll(f, 1, 0), 1, 1)
    ) / (4 * h2)
    mask = band_mask(phi)
    for _ in range(width):
        mask = mask | np.roll(mask, 1, 0) | np.roll(mask, -1, 0) | np.roll(mask, 1, 1) | np.roll(mask, -1, 1)
    stack = np.abs(np.stack([d11, d22, d12]))
    return float(stack[:, mask].max())


# -- records and CSV --------------------------------------------------------


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    area: float
    q1: float
    q2: float
    max_speed: float
    realized_cfl: float
    max_curvature: float
    gradphi_inf: float
    gradphi_holder: float
    delta: float
    hess_sup: float

    @property
    def q(self):
        return np.array([self.q1, self.q2])

    def is_finite(self) -> bool:
        return all(math.isfinite(getattr(self, f.name)) for f in dc_fields(self))


DIAGNOSTICS_HEADER = [f.name for f in dc_fields(DiagnosticsRecord)]


class DiagnosticsWriter:
    """Appends one row per snapshot, flushing after each so partial runs are readable."""

    def __init__(self, path, append: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fresh = not (append and self.path.exists())
        self._fh = open(self.path, "w" if fresh else "a", newline="")
        if fresh:
            self._fh.write(",".join(DIAGNOSTICS_HEADER) + "\n")
            self._fh.flush()

    def write(self, rec: DiagnosticsRecord) -> None:
        row = asdict(rec)
        self._fh.write(",".join(f"{row[k]:.17g}" for k in DIAGNOSTICS_HEADER) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_diagnostics(path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [DiagnosticsRecord(**{k: float(v) for k, v in row.items()}) for row in reader]


def E_max_norm() -> float:
    return float(np.max(np.abs(E())))
