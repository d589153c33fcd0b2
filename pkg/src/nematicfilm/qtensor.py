"""Algebra of symmetric traceless 3x3 tensors stored as 5 coordinates.

The fixed orthonormal basis (tr(B_j B_k) = delta_jk) is

    B1 = diag(-1,-1,2)/sqrt(6)
    B2 = diag(1,-1,0)/sqrt(2)
    B3 = (e1 e2 + e2 e1)/sqrt(2)
    B4 = (e1 e3 + e3 e1)/sqrt(2)
    B5 = (e2 e3 + e3 e2)/sqrt(2)

so the Euclidean norm of the coordinate vector equals the Frobenius
norm of the matrix, and path lengths in coordinates equal ambient
matrix lengths.

All functions accept arrays of shape (..., 5) and broadcast over the
leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, InputError

_S6 = np.sqrt(6.0)
_S2 = np.sqrt(2.0)

#: The basis matrices, shape (5, 3, 3).
BASIS = np.array(
    [
        [[-1 / _S6, 0, 0], [0, -1 / _S6, 0], [0, 0, 2 / _S6]],
        [[1 / _S2, 0, 0], [0, -1 / _S2, 0], [0, 0, 0]],
        [[0, 1 / _S2, 0], [1 / _S2, 0, 0], [0, 0, 0]],
        [[0, 0, 1 / _S2], [0, 0, 0], [1 / _S2, 0, 0]],
        [[0, 0, 0], [0, 0, 1 / _S2], [0, 1 / _S2, 0]],
    ]
)

ZHAT = np.array([0.0, 0.0, 1.0])


def to_matrix(q):
    """Reconstruct the symmetric traceless matrix, shape (..., 3, 3)."""
    q = np.asarray(q, dtype=float)
    return np.tensordot(q, BASIS, axes=([-1], [0]))


def from_matrix(m):
    """Coordinates of a symmetric traceless matrix: q_j = tr(M B_j)."""
    m = np.asarray(m, dtype=float)
    return np.tensordot(m, BASIS, axes=([-2, -1], [1, 2]))


def uniaxial(s, m):
    """Uniaxial tensor s*(m x m - I/3) with director m.

    Args:
        s: scalar order parameter (may be an array, broadcast).
        m: unit 3-vector (or array of them, shape (..., 3)).

    Returns:
        Coordinates, shape (..., 5); eigenvalues are {2s/3, -s/3, -s/3}.
    """
    m = np.asarray(m, dtype=float)
    nrm = np.linalg.norm(m, axis=-1)
    if not np.all(np.abs(nrm - 1.0) < 1e-10):
        raise InputError("director must be a unit vector")
    s = np.asarray(s, dtype=float)
    outer = m[..., :, None] * m[..., None, :]
    mat = s[..., None, None] * (outer - np.eye(3) / 3.0)
    return from_matrix(mat)


def rotate_z(q, theta):
    """Conjugate by the rotation about the z-axis: r_theta Q r_theta^T.

    In coordinates q1 is invariant, (q2, q3) rotates by 2*theta and
    (q4, q5) by theta.
    """
    q = np.asarray(q, dtype=float)
    theta = np.asarray(theta, dtype=float)
    out = np.array(q, copy=True)
    c2, s2 = np.cos(2 * theta), np.sin(2 * theta)
    c1, s1 = np.cos(theta), np.sin(theta)
    out[..., 1] = c2 * q[..., 1] - s2 * q[..., 2]
    out[..., 2] = s2 * q[..., 1] + c2 * q[..., 2]
    out[..., 3] = c1 * q[..., 3] - s1 * q[..., 4]
    out[..., 4] = s1 * q[..., 3] + c1 * q[..., 4]
    return out


def inplane_component(q):
    """The vector u = (Q11 - Q22, 2*Q12) = sqrt(2)*(q2, q3).

    Its winding around zero defines the degree of a loop; it vanishes
    exactly when the in-plane deviatoric part of Q does.
    """
    q = np.asarray(q, dtype=float)
    return _S2 * q[..., 1:3]


@dataclass
class EigenData:
    """Sorted eigenvalues and an orthonormal eigenframe."""

    lam: np.ndarray  # (3,), ascending
    frame: np.ndarray  # (3, 3), columns are eigenvectors


def eigs(q):
    """Eigen-decomposition with a reproducible frame.

    Returns:
        EigenData with lam sorted ascending and frame columns v_i such
        that M v_i = lam_i v_i.  For reproducibility each eigenvector's
        sign is fixed so its largest-magnitude component is positive.
    """
    m = to_matrix(np.asarray(q, dtype=float))
    lam, vec = np.linalg.eigh(m)
    for i in range(3):
        j = np.argmax(np.abs(vec[:, i]))
        if vec[j, i] < 0:
            vec[:, i] = -vec[:, i]
    return EigenData(lam=lam, frame=vec)


def classify(q, tol):
    """Spectral class of Q: 'isotropic', 'uniaxial' or 'biaxial'.

    Isotropic: all eigenvalues below tol in magnitude.  Uniaxial:
    exactly one eigenvalue pair within tol of each other.  Otherwise
    biaxial.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    lam = eigs(q).lam
    if np.all(np.abs(lam) < tol):
        return "isotropic"
    gaps = np.array([lam[1] - lam[0], lam[2] - lam[1], lam[2] - lam[0]])
    n_close = int(np.sum(gaps < tol))
    if n_close == 1:
        return "uniaxial"
    return "biaxial"


@dataclass
class LoopSample:
    """Ordered tensor samples around a closed curve."""

    samples: np.ndarray  # (N, 5)
    closed: bool = True

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.closed and not np.allclose(self.samples[0], self.samples[-1]):
            self.samples = np.vstack([self.samples, self.samples[0]])


def loop_degree(loop):
    """Winding of the in-plane component around the loop, halved.

    The degree is winding(u)/2 with u = (Q11 - Q22, 2*Q12); an in-plane
    director winding once gives degree 1, and half-integer values mark
    disclinations.

    Raises:
        DegeneracyError: if |u| <= 1e-8 anywhere on the loop.
    """
    u = inplane_component(loop.samples)
    r = np.linalg.norm(u, axis=-1)
    if np.any(r <= 1e-8):
        raise DegeneracyError("in-plane component vanishes; degree undefined")
    ang = np.arctan2(u[:, 1], u[:, 0])
    d = np.diff(ang)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    winding = d.sum() / (2 * np.pi)
    return round(winding) / 2.0
