"""Degenerate path metric, inter-well geodesics, and boundary layers.

The metric weights Euclidean length by sqrt(W); distances to the two
wells give the potentials phi_1, phi_2 that price partitions, and the
1D layer profile realizes 2*phi_1(g) as an energy.
"""

import numpy as np

from nematicfilm import metric
from nematicfilm import potential as pot
from nematicfilm import qtensor as qt

p = pot.PotentialParams(a=-1.0, b=-4.0, c=4.0, beta=-0.1, gamma_s=4.0, variant="reduced")
pot.calibrate_wmin(p, seed=0)
wells = p.wells.components

path, d12 = metric.geodesic(wells[0], wells[1], p)
print("d(P1, P2) =", d12, " (converged:", path.converged, ")")

g = qt.uniaxial(0.3, np.array([1.0, 0.0, 0.0]))  # boundary tensor
phi1 = metric.phi(1, g, p)
phi2 = metric.phi(2, g, p)
print("phi_1(g) =", phi1)
print("phi_2(g) =", phi2)
print("triangle check phi_2 <= phi_1 + d:", phi2 <= phi1 + d12 + 1e-9)

# the boundary-layer profile transitions from g to the nearest well
gpath, _ = metric.geodesic(g, wells[0], p)
sol = metric.profile_ode(gpath, p)
print("\nprofile monotone:", bool(np.all(np.diff(sol.h_values) >= -1e-15)))
for eps in (0.2, 0.1, 0.05):
    e = metric.layer_energy_1d(gpath, p, eps)
    print(f"layer energy at eps={eps}: {e:.5f}  (target 2 phi_1 = {2 * phi1:.5f})")
