"""Compare the Eulerian and Lagrangian pictures of one small disc.

The level-set run lives on the periodic torus; the contour dynamics run
uses the free-space kernel.  For a patch well inside the cell the two agree
once the uniform drift is removed (the torus velocity has zero mean).
Usage: ``python demos/cde_vs_levelset.py [n]``.
"""

import sys

from stokespatch.diagnostics import hausdorff_distance
from stokespatch.kernels import DiscSpec, cde_integrate
from stokespatch.sim import CircleIC
from stokespatch.verify import polygon_centroid, simulate

n = int(sys.argv[1]) if len(sys.argv) > 1 else 256
radius, T = 0.25, 1.0
h = 1.0 / n

torus = simulate(n, T, T, 0.0, CircleIC((0.0, 0.0), radius)).contours[T].points
cde = cde_integrate(DiscSpec((0.0, 0.0), radius).contour(512), T / 50, 50).points

ct, cc = polygon_centroid(torus), polygon_centroid(cde)
print(f"torus centroid   {ct[0]: .5f} {ct[1]: .5f}")
print(f"contour centroid {cc[0]: .5f} {cc[1]: .5f}")
print(f"raw Hausdorff     {hausdorff_distance(torus, cde) / h:6.2f} h")
print(f"aligned Hausdorff {hausdorff_distance(torus + (cc - ct), cde) / h:6.2f} h")
