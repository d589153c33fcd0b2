"""The bulk + surface potential and its zero set.

With the desk parameters the combined density W has two well
components: a circle of in-plane uniaxial states of strength s* and an
isolated z-axis point.
"""

import numpy as np

from nematicfilm import potential as pot
from nematicfilm import qtensor as qt

p = pot.PotentialParams(a=-1.0, b=-4.0, c=4.0, beta=-0.1, gamma_s=4.0, variant="reduced")
pot.calibrate_wmin(p, seed=0)

ss = pot.s_star(p)
print("s* =", ss.value)
print("w_min =", p.w_min)
print("well components:", p.wells.count)
for k, well in enumerate(p.wells.components, start=1):
    print(f"  P{k}: kind={well.kind}, representative:", np.round(well.representative, 4))

# W vanishes on the wells and is positive elsewhere
for well in p.wells.components:
    print("W at representative:", pot.w(well.representative, p))
probe = qt.uniaxial(0.5, np.array([1.0, 0.0, 0.0]))
print("W at an off-well state:", pot.w(probe, p))

# the stationarity quadratic for the uniaxial strength
print("\nbulk stationary strengths:", pot.bulk_stationary_strengths(p))
