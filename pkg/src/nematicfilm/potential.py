"""Bulk and surface energy densities and the combined potential W.

The bulk density is the quartic

    f_ldg(Q) = a tr(M^2) + (2b/3) tr(M^3) + (c/2) tr(M^2)^2

and the surface density comes in two variants:

    full:    f_s(Q) = gamma_s (M13^2 + M23^2) + alpha (M33 - beta)^2
    reduced: f_s(Q) = gamma_s (M13^2 + M23^2)

The combined potential is W = f_ldg + 2 f_s - w_min, shifted so its
minimum over tensor space is zero.  The zero set of W decomposes into
connected components ("wells"); at low temperature with the reduced
surface term these are a circle of in-plane uniaxial states and the
single z-axis uniaxial state.

All densities accept coordinate arrays of shape (..., 5).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.optimize

from . import qtensor
from .errors import NumericalError, StateError

_S6 = np.sqrt(6.0)


@dataclass
class PotentialParams:
    """Coefficients of the bulk/surface densities plus derived data.

    ``w_min`` and ``wells`` are populated by :func:`calibrate_wmin`.
    """

    a: float
    b: float
    c: float
    alpha: float = 0.0
    beta: float = 0.0
    gamma_s: float = 1.0
    variant: str = "reduced"  # 'full' | 'reduced'
    w_min: Optional[float] = None
    wells: Optional["WellSet"] = None

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.variant not in ("full", "reduced"):
            raise ValueError("variant must be 'full' or 'reduced'")
        if self.variant == "reduced":
            self.alpha = 0.0

    @property
    def calibrated(self):
        return self.w_min is not None


@dataclass
class Well:
    """One connected component of the zero set of W."""

    kind: str  # 'point' | 'circle' | 'sampled'
    representative: np.ndarray  # (5,)
    samples: np.ndarray  # (n, 5)


@dataclass
class WellSet:
    components: list = field(default_factory=list)

    @property
    def count(self):
        return len(self.components)


def f_ldg(q, p):
    """Bulk density; depends only on the eigenvalues of M(q)."""
    q = np.asarray(q, dtype=float)
    t2 = np.sum(q * q, axis=-1)
    m = qtensor.to_matrix(q)
    m2 = m @ m
    t3 = np.trace(m @ m2, axis1=-2, axis2=-1)
    return p.a * t2 + (2.0 * p.b / 3.0) * t3 + (p.c / 2.0) * t2 * t2


def _grad_f_ldg(q, p):
    q = np.asarray(q, dtype=float)
    t2 = np.sum(q * q, axis=-1)
    m = qtensor.to_matrix(q)
    m2 = m @ m
    # d tr(M^3) / dq_j = 3 tr(M^2 B_j); projecting M^2 back on the basis
    # also removes its trace part, which is annihilated by the traceless B_j.
    proj = qtensor.from_matrix(m2)
    return (2.0 * p.a + 2.0 * p.c * t2)[..., None] * q + 2.0 * p.b * proj


def f_s(q, p):
    """Surface density (per the chosen variant)."""
    q = np.asarray(q, dtype=float)
    # M13 = q4/sqrt(2), M23 = q5/sqrt(2), M33 = 2 q1/sqrt(6)
    tilt = 0.5 * (q[..., 3] ** 2 + q[..., 4] ** 2)
    out = p.gamma_s * tilt
    if p.variant == "full":
        out = out + p.alpha * (2.0 * q[..., 0] / _S6 - p.beta) ** 2
    return out


def _grad_f_s(q, p):
    q = np.asarray(q, dtype=float)
    g = np.zeros_like(q)
    g[..., 3] = p.gamma_s * q[..., 3]
    g[..., 4] = p.gamma_s * q[..., 4]
    if p.variant == "full":
        g[..., 0] = p.alpha * 2.0 * (2.0 * q[..., 0] / _S6 - p.beta) * 2.0 / _S6
    return g


def potential_raw(q, p):
    """Unshifted combined potential f_ldg + 2 f_s."""
    return f_ldg(q, p) + 2.0 * f_s(q, p)


def grad_potential_raw(q, p):
    return _grad_f_ldg(q, p) + 2.0 * _grad_f_s(q, p)


def w(q, p):
    """Normalized potential W = f_ldg + 2 f_s - w_min (min is 0)."""
    if not p.calibrated:
        raise StateError("potential not calibrated; call calibrate_wmin first")
    return potential_raw(q, p) - p.w_min


def grad_w(q, p):
    if not p.calibrated:
        raise StateError("potential not calibrated; call calibrate_wmin first")
    return grad_potential_raw(q, p)


class SStar(NamedTuple):
    value: float
    isotropic: bool


def f_uniaxial(s, p):
    """Bulk density restricted to uniaxial tensors of strength s."""
    s = np.asarray(s, dtype=float)
    return (
        (2.0 * p.a / 3.0) * s**2
        + (4.0 * p.b / 27.0) * s**3
        + (2.0 * p.c / 9.0) * s**4
    )


def s_star(p):
    """Global minimizer of the uniaxial bulk restriction.

    Stationary nonzero strengths solve 3a + b s + 2c s^2 = 0; the
    returned value is the candidate (including s=0) with least bulk
    energy.  ``isotropic`` flags the regime where s=0 wins.
    """
    cand = [0.0]
    disc = p.b * p.b - 24.0 * p.a * p.c
    if disc >= 0:
        r = np.sqrt(disc)
        cand += [(-p.b + r) / (4.0 * p.c), (-p.b - r) / (4.0 * p.c)]
    vals = [float(f_uniaxial(s, p)) for s in cand]
    i = int(np.argmin(vals))
    best = cand[i]
    if vals[i] >= -1e-14:
        return SStar(0.0, True)
    return SStar(float(best), False)


def bulk_stationary_strengths(p):
    """All stationary strengths of the uniaxial bulk restriction."""
    out = [0.0]
    disc = p.b * p.b - 24.0 * p.a * p.c
    if disc >= 0:
        r = np.sqrt(disc)
        out += [(-p.b + r) / (4.0 * p.c), (-p.b - r) / (4.0 * p.c)]
    return sorted(set(out))


def _polish_minimum(x, p):
    """Trust-region Newton polish of a local minimum of the raw potential.

    Degenerate (flatter-than-quadratic) valleys leave first-order
    methods with O(1e-4) coordinate error; Newton steps still contract
    linearly there and push well representatives to ~1e-10.
    """

    def hess(x):
        h = 1e-6
        out = np.empty((5, 5))
        for j in range(5):
            e = np.zeros(5)
            e[j] = h
            out[:, j] = (
                grad_potential_raw(x + e, p) - grad_potential_raw(x - e, p)
            ) / (2 * h)
        return 0.5 * (out + out.T)

    res = scipy.optimize.minimize(
        lambda x: potential_raw(x, p),
        x,
        jac=lambda x: grad_potential_raw(x, p),
        hess=hess,
        method="trust-exact",
        options={"gtol": 1e-14, "maxiter": 300},
    )
    if res.fun <= potential_raw(x, p):
        x = res.x
    return _snap_zhat_frame(x, p)


def _snap_zhat_frame(x, p):
    """Align the eigenvector nearest zhat exactly with zhat when free.

    Quartically flat frame directions leave a residual tilt that no
    descent method can remove (the potential carries no signal there).
    If rigidly rotating the eigenframe so its closest eigenvector
    becomes zhat does not increase the potential, the snapped tensor is
    an equally good minimizer with the tilt noise removed; otherwise (a
    genuinely tilted minimizer) the snap is rejected.
    """
    from . import qtensor as qt

    ed = qt.eigs(x)
    j = int(np.argmax(np.abs(ed.frame.T @ qt.ZHAT)))
    v = ed.frame[:, j]
    if v @ qt.ZHAT < 0:
        v = -v
    axis = np.cross(v, qt.ZHAT)
    sin_t = np.linalg.norm(axis)
    f0 = float(potential_raw(x, p))
    if sin_t < 1e-15:
        return x, f0
    axis = axis / sin_t
    cos_t = float(np.clip(v @ qt.ZHAT, -1.0, 1.0))
    kmat = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    rot = np.eye(3) + sin_t * kmat + (1.0 - cos_t) * (kmat @ kmat)
    m = rot @ qt.to_matrix(x) @ rot.T
    snapped = qt.from_matrix(0.5 * (m + m.T))
    f1 = float(potential_raw(snapped, p))
    if f1 <= f0 + 1e-12:
        return snapped, f1
    return x, f0


def calibrate_wmin(p, starts=200, seed=0, r_merge=None):
    """Locate min(f_ldg + 2 f_s) and the connected components of its argmin.

    Multi-start local minimization from ``starts`` points sampled
    uniformly in the ball |q| <= 3 max(1, |s*|).  Converged minima at
    the least value are clustered by greedy linking at radius
    ``r_merge``; each cluster's kind is decided by probing the
    rotate_z orbit of its representative (orbits of zero-set points
    stay in the zero set, so extended orbits mark circle wells).

    Side effect: stores ``w_min`` and ``wells`` on ``p``.

    Returns:
        (w_min, WellSet)
    """
    ss = s_star(p).value
    scale = max(1.0, abs(ss))
    if r_merge is None:
        r_merge = 0.05 * scale
    rng = np.random.default_rng(seed)
    radius = 3.0 * scale
    d = rng.standard_normal((starts, 5))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    x0s = d * radius * rng.random(starts)[:, None] ** 0.2

    pts, vals = [], []
    for x0 in x0s:
        res = scipy.optimize.minimize(
            lambda x: potential_raw(x, p),
            x0,
            jac=lambda x: grad_potential_raw(x, p),
            method="L-BFGS-B",
            options={"gtol": 1e-12, "ftol": 1e-16, "maxiter": 500},
        )
        if np.all(np.isfinite(res.x)) and np.linalg.norm(res.jac) < 1e-6:
            pts.append(res.x)
            vals.append(res.fun)
    if not pts:
        raise NumericalError("no start converged during potential calibration")
    pts = np.array(pts)
    vals = np.array(vals)
    vmin = float(vals.min())

    keep = vals <= vmin + 1e-8
    minima = pts[keep]

    # Greedy linking into clusters at radius r_merge.
    n = len(minima)
    labels = -np.ones(n, dtype=int)
    nlab = 0
    for i in range(n):
        if labels[i] >= 0:
            continue
        stack = [i]
        labels[i] = nlab
        while stack:
            j = stack.pop()
            near = np.linalg.norm(minima - minima[j], axis=1) < r_merge
            for k in np.flatnonzero(near):
                if labels[k] < 0:
                    labels[k] = nlab
                    stack.append(k)
        nlab += 1

    thetas = np.linspace(0.0, 2.0 * np.pi, 256, endpoint=False)
    comps = []
    for lab in range(nlab):
        members = minima[labels == lab]
        mvals = potential_raw(members, p)
        rep, _ = _polish_minimum(members[np.argmin(mvals)], p)
        orbit = qtensor.rotate_z(np.broadcast_to(rep, (len(thetas), 5)).copy(), thetas)
        orbit_flat = potential_raw(orbit, p) - vmin
        diam = np.max(np.linalg.norm(orbit - rep, axis=1))
        if np.max(orbit_flat) < 1e-8 and diam > r_merge:
            comps.append(Well("circle", rep, orbit))
        elif np.max(np.linalg.norm(members - rep, axis=1)) > r_merge:
            comps.append(Well("sampled", rep, members))
        else:
            comps.append(Well("point", rep, rep[None, :]))

    # Merge clusters that in fact lie on another cluster's orbit/samples.
    merged = []
    for comp in comps:
        hit = None
        for other in merged:
            dmin = np.min(np.linalg.norm(other.samples - comp.representative, axis=1))
            if dmin < r_merge:
                hit = other
                break
        if hit is None:
            merged.append(comp)
        elif comp.kind == "circle" and hit.kind != "circle":
            merged[merged.index(hit)] = comp

    # Stable ordering: extended wells first, then by representative coords.
    order = {"circle": 0, "sampled": 1, "point": 2}
    merged.sort(key=lambda c: (order[c.kind],) + tuple(np.round(c.representative, 9)))
    ws = WellSet(components=merged)
    p.w_min = vmin
    p.wells = ws
    return vmin, ws


# ---------------------------------------------------------------------------
# Constrained stationarity analysis of the gamma_s = 0 surface coupling:
# minimize F(lam, y) = f_ldg(lam) + 2 alpha (lam . y - beta)^2 over
# eigenvalues lam (sum 0) and squared z-components y of the eigenframe
# (simplex).  Stationary points classify when zhat is an eigenvector of
# the minimizers of the combined potential.
# ---------------------------------------------------------------------------


@dataclass
class StationaryPoint:
    lam: np.ndarray  # (3,), sum 0
    y: np.ndarray  # (3,), simplex
    h_lambda: float
    residual: float
    case: str = ""


def _f_ldg_eig(lam, p):
    t2 = np.sum(lam * lam)
    t3 = np.sum(lam**3)
    return p.a * t2 + (2.0 * p.b / 3.0) * t3 + (p.c / 2.0) * t2 * t2


def _f_ldg_eig_grad(lam, p):
    t2 = np.sum(lam * lam)
    return 2.0 * p.a * lam + 2.0 * p.b * lam * lam + 2.0 * p.c * t2 * lam


def appendix_residual(sp, p):
    """Max-norm residual of the Lagrange stationarity system.

    The lam-equations must hold with the multiplier h_lambda chosen
    optimally; the y-equations are enforced only on components strictly
    inside (0,1) (at the simplex boundary they are inactive).
    """
    lam = np.asarray(sp.lam, dtype=float)
    y = np.asarray(sp.y, dtype=float)
    d = float(lam @ y - p.beta)
    glam = _f_ldg_eig_grad(lam, p) + 4.0 * p.alpha * d * y
    h_lam = -np.mean(glam)
    r_lam = np.max(np.abs(glam + h_lam))
    gy = 4.0 * p.alpha * d * lam
    interior = (y > 1e-10) & (y < 1.0 - 1e-10)
    if np.any(interior):
        h_y = -np.mean(gy[interior])
        r_y = np.max(np.abs(gy[interior] + h_y))
    else:
        r_y = 0.0
    sp.h_lambda = float(h_lam)
    sp.residual = float(max(r_lam, r_y))
    return sp.residual


def _classify_stationary(lam, y, p):
    d = abs(float(lam @ y - p.beta))
    if d < 1e-7:
        if np.max(y) > 1.0 - 1e-7:
            return "beta-eigenvalue"
        return "beta-convex-combination"
    if np.any(y < 1e-7) or np.any(y > 1.0 - 1e-7):
        return "boundary"
    return "interior"


def appendix_solve(p, seed=0, starts=40):
    """Stationary points of the constrained system, deduplicated.

    Combines analytic candidates (isotropic point; bulk-stationary
    eigenvalues with beta as eigenvalue or as a genuine convex
    combination) with Newton solves from random feasible starts for
    interior and single-face boundary configurations.
    """
    rng = np.random.default_rng(seed)
    found = []

    def push(lam, y):
        lam = np.asarray(lam, dtype=float)
        y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
        lam = lam - lam.mean()
        ssum = y.sum()
        if ssum <= 0:
            return
        y = y / ssum
        sp = StationaryPoint(lam=lam, y=y, h_lambda=0.0, residual=np.inf)
        if appendix_residual(sp, p) < 1e-8:
            sp.case = _classify_stationary(lam, y, p)
            found.append(sp)

    # Isotropic point: lam = 0 makes every equation vanish identically.
    push(np.zeros(3), np.full(3, 1.0 / 3.0))

    # Bulk-stationary eigenvalue triples.
    for s in bulk_stationary_strengths(p):
        lam = np.array([2.0 * s / 3.0, -s / 3.0, -s / 3.0])
        for perm in ([0, 1, 2], [1, 0, 2], [1, 2, 0]):
            lp = lam[perm]
            for i in range(3):
                if abs(lp[i] - p.beta) < 1e-9:
                    y = np.zeros(3)
                    y[i] = 1.0
                    push(lp, y)
            lo, hi = lp.min(), lp.max()
            if lo < p.beta < hi and hi - lo > 1e-12:
                t = (hi - p.beta) / (hi - lo)
                y = np.zeros(3)
                y[np.argmin(lp)] = t
                y[np.argmax(lp)] = 1.0 - t
                push(lp, y)

    # Interior Newton solves: unknowns (lam1, lam2, y1, y2).
    def interior_sys(x):
        lam = np.array([x[0], x[1], -x[0] - x[1]])
        y = np.array([x[2], x[3], 1.0 - x[2] - x[3]])
        d = lam @ y - p.beta
        glam = _f_ldg_eig_grad(lam, p) + 4.0 * p.alpha * d * y
        glam = glam - glam.mean()
        gy = 4.0 * p.alpha * d * lam
        gy = gy - gy.mean()
        return np.array([glam[0], glam[1], gy[0], gy[1]])

    for _ in range(starts):
        lam0 = rng.standard_normal(3)
        lam0 -= lam0.mean()
        y0 = rng.dirichlet(np.ones(3))
        sol = scipy.optimize.root(
            interior_sys, np.array([lam0[0], lam0[1], y0[0], y0[1]]), method="hybr"
        )
        if sol.success:
            lam = np.array([sol.x[0], sol.x[1], -sol.x[0] - sol.x[1]])
            y = np.array([sol.x[2], sol.x[3], 1.0 - sol.x[2] - sol.x[3]])
            if np.all(y > -1e-10) and np.all(y < 1.0 + 1e-10):
                push(lam, np.clip(y, 0.0, 1.0))

    # Vertex case y = e_i: two free eigenvalue components.
    for i in range(3):

        def vertex_sys(x, i=i):
            lam = np.array([x[0], x[1], -x[0] - x[1]])
            y = np.zeros(3)
            y[i] = 1.0
            d = lam @ y - p.beta
            glam = _f_ldg_eig_grad(lam, p) + 4.0 * p.alpha * d * y
            glam = glam - glam.mean()
            return glam[:2]

        for _ in range(starts):
            lam0 = rng.standard_normal(3)
            lam0 -= lam0.mean()
            sol = scipy.optimize.root(vertex_sys, lam0[:2], method="hybr")
            if sol.success:
                lam = np.array([sol.x[0], sol.x[1], -sol.x[0] - sol.x[1]])
                y = np.zeros(3)
                y[i] = 1.0
                push(lam, y)

    # Deduplicate on rounded (lam, y).
    uniq, seen = [], set()
    for sp in sorted(found, key=lambda s: tuple(np.round(np.r_[s.lam, s.y], 6))):
        key = tuple(np.round(np.r_[sp.lam, sp.y], 6))
        if key not in seen:
            seen.add(key)
            uniq.append(sp)
    return uniq


def zhat_eigenvector_test(ws, p):
    """Check whether zhat is an eigenvector of each well representative.

    Cross-checks the observation against the convex-combination
    criterion: with gamma_s = 0, minimizers keep zhat as an eigenvector
    except when beta lies strictly between two eigenvalues of the bulk
    minimizer (then the optimal frame tilts so the z-components
    interpolate beta).
    """
    ss = s_star(p).value
    lam_bulk = np.sort(np.array([2.0 * ss / 3.0, -ss / 3.0, -ss / 3.0]))
    if p.variant == "reduced" or p.gamma_s > 0:
        case = "tilt-penalized"
        expect_zhat = True
    else:
        tol = 1e-9 * max(1.0, abs(ss))
        if np.min(np.abs(lam_bulk - p.beta)) < tol:
            case = "2i"
            expect_zhat = True
        elif lam_bulk[0] < p.beta < lam_bulk[-1]:
            case = "2ii"
            expect_zhat = False
        else:
            case = "1"
            expect_zhat = True
    rows = []
    ok = True
    for well in ws.components:
        m = qtensor.to_matrix(well.representative)
        mz = m @ qtensor.ZHAT
        resid = float(np.linalg.norm(mz - (mz @ qtensor.ZHAT) * qtensor.ZHAT))
        is_eig = resid < 1e-8
        rows.append(
            {
                "kind": well.kind,
                "zhat_eigenvector": is_eig,
                "residual": resid,
            }
        )
        if is_eig != expect_zhat:
            ok = False
    return {"case": case, "expect_zhat": expect_zhat, "wells": rows, "consistent": ok}
