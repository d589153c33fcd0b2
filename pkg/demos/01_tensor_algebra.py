"""Tour of the 5-coordinate tensor algebra.

Symmetric traceless 3x3 tensors are stored as coefficients against an
orthonormal basis, so Euclidean operations on coordinates match
Frobenius operations on matrices.
"""

import numpy as np

from nematicfilm import qtensor as qt

rng = np.random.default_rng(7)

q = rng.standard_normal(5)
m = qt.to_matrix(q)
print("coordinates:", np.round(q, 4))
print("matrix trace:", np.trace(m))
print("|q|^2 vs |M|_F^2:", np.sum(q * q), np.sum(m * m))
print("round trip error:", np.max(np.abs(qt.from_matrix(m) - q)))

# uniaxial states and their classification
n = np.array([1.0, 0.0, 0.0])
u = qt.uniaxial(0.9, n)
print("\nuniaxial s=0.9 along x ->", qt.classify(u, 1e-9))
print("eigenvalues:", np.round(qt.eigs(u).lam, 4))

# in-plane rotations act on blocks: (q2,q3) turn at twice the rate of (q4,q5)
theta = 0.3
r = qt.rotate_z(q, theta)
print("\nrotation preserves q1:", q[0], "->", r[0])
print("|(q2,q3)| preserved:", np.hypot(*q[1:3]), np.hypot(*r[1:3]))

# winding of a director loop read off the (q2,q3) block
angles = np.linspace(0.0, np.pi, 64, endpoint=False)  # director turns by pi
loop = np.array([qt.uniaxial(1.0, [np.cos(a), np.sin(a), 0.0]) for a in angles])
print("\nhalf-turn director loop degree:", qt.loop_degree(qt.LoopSample(loop)))
