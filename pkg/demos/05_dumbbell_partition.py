"""Weighted-perimeter partitions on a dumbbell.

The metric prices boundary contact with either well (c1, c2) and
interfaces between them (c3).  On a convex-neck dumbbell the optimal
two-label partition cuts the neck at the contact abscissa x0, and
structured perturbations all raise the cost.
"""

import numpy as np

from nematicfilm import domain as dm
from nematicfilm import gamma as gm
from nematicfilm import potential as pot

p = pot.PotentialParams(a=-1.0, b=-4.0, c=4.0, beta=-0.1, gamma_s=4.0, variant="reduced")
pot.calibrate_wmin(p, seed=0)

costs = gm.costs_from_metric(p)
print(f"c1={costs.c1:.5f}  c2={costs.c2:.5f}  c3={costs.c3:.5f}")
print("strict triangle inequality:", costs.strict_triangle)

spec = gm.default_dumbbell_spec(costs)
print("contact abscissa x0 =", spec.x0)

dom, P, Q, _ = dm.make_dumbbell(spec, 0.04)
candidate = gm.dumbbell_candidate(dom, spec, P, Q)
print("candidate F0 =", gm.f0(candidate, costs))
print("calibration gap:", gm.calibration_gap(candidate, costs, np.array([1.0, 0.0])))

_, delta = gm.admissible_delta_range(costs, spec.neck_convexity, 2 * spec.junction())
print("admissible L1 radius delta =", delta)

report = gm.perturbation_test(candidate, costs, spec, delta, trials=40, seed=0)
print("\nperturbation battery (40 trials):", "PASS" if report.passed else "FAIL")
worst = min(t.delta_f0 for t in report.trials)
print("smallest cost increase:", worst)
