"""The degenerate path metric d_sqrtW and its derived quantities.

The distance between tensors (or from a tensor to a potential well) is
the infimum of int sqrt(W(gamma)) |gamma'| dt over Lipschitz curves.
Discrete curves are scored with midpoint sampling,

    L = sum_k sqrt(w(midpoint_k)) * |node_{k+1} - node_k|,

and relaxed by node-wise gradient descent with per-iteration uniform
arc-length reparametrization (string method).  Endpoints may be pinned
tensors or whole wells; well endpoints slide by re-projection.

Also here: the boundary-layer profile ODE h' = sqrt(W(gamma(h))), the
1D layer energy it generates, the rotated-path family used for
boundary data, and a Dijkstra shortest-path table on the 2D slice of
tensors diagonal in a fixed in-plane frame (the numerical oracle for
geodesic lengths and the fast phi lookup used by field-level
distances).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.optimize
import scipy.sparse
import scipy.sparse.csgraph

from . import potential as pot
from . import qtensor as qt
from .errors import InputError, NumericalError, StateError

_SQRT_FLOOR = 1e-300


@dataclass
class GeodesicConfig:
    n_nodes: int = 64
    max_iters: int = 20000
    tol: float = 1e-8
    step0: float = 0.02


@dataclass
class TensorPath:
    """Discretized curve in tensor space; nodes shape (N, 5)."""

    nodes: np.ndarray
    converged: bool = True

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes.ndim != 2 or self.nodes.shape[0] < 2 or self.nodes.shape[1] != 5:
            raise InputError("path must be an (N>=2, 5) node array")

    def reversed(self):
        return TensorPath(self.nodes[::-1].copy(), self.converged)


def _nodes_of(path):
    return path.nodes if isinstance(path, TensorPath) else np.asarray(path, dtype=float)


def _w_floor(p):
    # w is a difference of O(1) quantities, so points exactly on a well
    # evaluate to ~1e-16 rather than 0; sqrt would turn that noise into
    # spurious 1e-8-scale lengths.  Values below the floor are treated
    # as exact zeros.
    return 1e-12 * max(1.0, abs(p.w_min or 0.0))


def path_energy(path, p):
    """sqrt(w)-weighted length of a discrete path (midpoint rule)."""
    x = _nodes_of(path)
    mid = 0.5 * (x[1:] + x[:-1])
    seg = np.linalg.norm(x[1:] - x[:-1], axis=1)
    wm = np.maximum(pot.w(mid, p), 0.0)
    wm[wm < _w_floor(p)] = 0.0
    return float(np.sum(np.sqrt(wm) * seg))


def _length_grad(x, p):
    """Discrete length and its gradient with respect to every node."""
    mid = 0.5 * (x[1:] + x[:-1])
    d = x[1:] - x[:-1]
    ell = np.linalg.norm(d, axis=1)
    wm = np.maximum(pot.w(mid, p), 0.0)
    wm[wm < _w_floor(p)] = 0.0
    sq = np.sqrt(wm)
    L = float(np.sum(sq * ell))
    gw = pot.grad_w(mid, p)
    # d/dmid sqrt(w) = grad_w / (2 sqrt(w)); zero where w vanishes.
    dsq = np.where(wm[:, None] > 0.0, gw / (2.0 * np.maximum(sq, 1e-30)[:, None]), 0.0)
    unit = np.where(ell[:, None] > 1e-30, d / np.maximum(ell, 1e-30)[:, None], 0.0)
    g = np.zeros_like(x)
    g[:-1] += 0.5 * dsq * ell[:, None] - sq[:, None] * unit
    g[1:] += 0.5 * dsq * ell[:, None] + sq[:, None] * unit
    return L, g


def _resample_uniform(x, n=None):
    """Resample a polyline to n nodes uniformly spaced in arc length."""
    if n is None:
        n = len(x)
    seg = np.linalg.norm(np.diff(x, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 0:
        return np.repeat(x[:1], n, axis=0)
    t = np.linspace(0.0, total, n)
    out = np.empty((n, 5))
    for j in range(5):
        out[:, j] = np.interp(t, cum, x[:, j])
    out[0] = x[0]
    out[-1] = x[-1]
    return out


def well_project(well, y):
    """Closest point of a well to y (exact for circle wells)."""
    y = np.asarray(y, dtype=float)
    k = int(np.argmin(np.linalg.norm(well.samples - y, axis=1)))
    best = well.samples[k]
    if well.kind == "circle":
        rep = well.representative

        def dist2(th):
            return float(np.sum((qt.rotate_z(rep, th) - y) ** 2))

        th0 = 2.0 * np.pi * k / len(well.samples)
        res = scipy.optimize.minimize_scalar(
            dist2, bracket=(th0 - 0.1, th0, th0 + 0.1), method="brent"
        )
        cand = qt.rotate_z(rep, float(res.x))
        if np.sum((cand - y) ** 2) <= np.sum((best - y) ** 2):
            best = cand
    return best


def _endpoint(obj, toward):
    """Initial endpoint value for a fixed tensor or a well."""
    if isinstance(obj, pot.Well):
        return well_project(obj, toward), obj
    return np.asarray(obj, dtype=float), None


def geodesic(U, V, p, cfg=None):
    """Locally length-minimizing path between tensors and/or wells.

    Args:
        U, V: a 5-coordinate tensor or a :class:`~nematicfilm.potential.Well`.
        p: calibrated potential parameters.
        cfg: GeodesicConfig (defaults used when None).

    Returns:
        (TensorPath, length); ``path.converged`` is False when the
        iteration limit was reached before the node displacement
        dropped below tolerance.
    """
    if not p.calibrated:
        raise StateError("potential not calibrated")
    cfg = cfg or GeodesicConfig()
    u_hint = U.representative if isinstance(U, pot.Well) else np.asarray(U, float)
    v_hint = V.representative if isinstance(V, pot.Well) else np.asarray(V, float)
    a, wa = _endpoint(U, v_hint)
    b, wb = _endpoint(V, u_hint)
    # Pull sliding endpoints toward each other once more for a better seed.
    if wa is not None:
        a = well_project(wa, b)
    if wb is not None:
        b = well_project(wb, a)

    n = cfg.n_nodes
    x = np.linspace(0.0, 1.0, n)[:, None] * (b - a)[None, :] + a[None, :]
    L, _ = _length_grad(x, p)
    alpha = cfg.step0
    converged = False
    for _ in range(cfg.max_iters):
        L, g = _length_grad(x, p)
        if wa is None:
            g[0] = 0.0
        if wb is None:
            g[-1] = 0.0
        gmax = np.max(np.abs(g))
        if gmax == 0.0:
            converged = True
            break
        accepted = False
        for _try in range(40):
            xn = x - alpha * g
            if wa is not None:
                xn[0] = well_project(wa, xn[0])
            if wb is not None:
                xn[-1] = well_project(wb, xn[-1])
            xn = _resample_uniform(xn)
            Ln, _ = _length_grad(xn, p)
            if Ln <= L + 1e-14:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        disp = np.max(np.linalg.norm(xn - x, axis=1))
        x = xn
        L = Ln
        alpha = min(alpha * 1.1, 1.0)
        if disp < cfg.tol:
            converged = True
            break
    return TensorPath(x, converged=converged), path_energy(x, p)


def distance(U, V, p, cfg=None):
    """d_sqrtW between two tensors/wells."""
    return geodesic(U, V, p, cfg)[1]


def phi(i, q, p, cfg=None):
    """Distance from well i (1-based index into the calibrated set)."""
    if p.wells is None:
        raise StateError("wells not calibrated")
    well = p.wells.components[i - 1]
    return distance(well, q, p, cfg)


@dataclass
class ProfileSolution:
    """Solution of h'(s) = sqrt(W(gamma(h))), h(0) = 0."""

    s_grid: np.ndarray
    h_values: np.ndarray
    b: float  # total arc length of the underlying path


def _arclength_interpolant(x, resolution=4096):
    """Unit-speed piecewise-linear reparametrization of a polyline."""
    xs = _resample_uniform(x, resolution)
    seg = np.linalg.norm(np.diff(xs, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    b = float(cum[-1])

    def gamma(t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, b)
        out = np.empty(np.shape(t) + (5,))
        for j in range(5):
            out[..., j] = np.interp(t, cum, xs[:, j])
        return out

    return gamma, b


def profile_ode(path, p, s_max=None, steps=4000):
    """Integrate the layer profile ODE along an arc-length path.

    The path must end on the zero set of w and stay strictly above it
    before the endpoint; h then increases and approaches the total
    length b exponentially.

    Args:
        s_max: integration horizon (default 20 b / sqrt(median w)).
        steps: number of RK4 steps.
    """
    x = _nodes_of(path)
    gamma, b = _arclength_interpolant(x)
    if b <= 0:
        grid = np.linspace(0.0, 1.0 if s_max is None else s_max, steps + 1)
        return ProfileSolution(grid, np.zeros_like(grid), 0.0)
    t_probe = np.linspace(0.0, b, 256)
    w_probe = pot.w(gamma(t_probe), p)
    if float(w_probe[-1]) > 1e-6:
        raise InputError("profile path must terminate on a well (w = 0)")
    if np.any(w_probe[:-1] <= 1e-12 * max(1.0, np.max(w_probe))):
        bad = t_probe[np.argmin(w_probe[:-1])]
        raise InputError(f"path touches the well set before its endpoint (t={bad:.3g})")
    if s_max is None:
        w_typ = float(np.median(w_probe))
        s_max = 20.0 * b / np.sqrt(max(w_typ, 1e-12))

    # The interpolated endpoint sits off the well by a projection error
    # of ~1e-10; subtract its (tiny) w so the right-hand side vanishes
    # exactly at h = b and the solution stays strictly below b.
    w_end = max(float(pot.w(gamma(b), p)), _w_floor(p))

    def rhs(h):
        val = float(pot.w(gamma(min(h, b)), p)) - w_end
        return np.sqrt(max(val, 0.0))

    grid = np.linspace(0.0, s_max, steps + 1)
    ds = grid[1] - grid[0]
    h = np.empty(steps + 1)
    h[0] = 0.0
    for i in range(steps):
        k1 = rhs(h[i])
        k2 = rhs(h[i] + 0.5 * ds * k1)
        k3 = rhs(h[i] + 0.5 * ds * k2)
        k4 = rhs(h[i] + ds * k3)
        h[i + 1] = min(h[i] + ds * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0, b)
    return ProfileSolution(grid, h, b)


def layer_energy_1d(path, p, eps, sigma_step=None, sigma_max=None):
    """Energy of the 1D boundary layer R(s) = gamma(h(s / eps)).

    Evaluates int (eps |dR/ds|^2 + w(R)/eps) ds on a layer-resolving
    grid whose inner step defaults to eps/4 in arc-length units
    (mirroring the grid/eps ratio of the field solver), with the
    gradient term computed by central differences of the sampled
    profile.  By equipartition the value approaches twice the
    sqrt(w)-length of the path.
    """
    x = _nodes_of(path)
    gamma, b = _arclength_interpolant(x)
    if b <= 0:
        return 0.0
    if sigma_max is None:
        t_probe = np.linspace(0.0, b, 256)
        w_typ = float(np.median(pot.w(gamma(t_probe), p)))
        sigma_max = 20.0 * b / np.sqrt(max(w_typ, 1e-12))
    if sigma_step is None:
        sigma_step = 0.25 * eps  # inner-variable step, shrinks with eps
    steps = max(int(np.ceil(sigma_max / sigma_step)), 64)
    sol = profile_ode(path, p, s_max=sigma_max, steps=steps)
    sigma = sol.s_grid
    r = gamma(sol.h_values)
    # Central differences in the outer variable s = eps * sigma.
    dr = np.gradient(r, sigma * eps, axis=0)
    grad_half = eps * np.sum(dr * dr, axis=1)
    pot_half = pot.w(r, p) / eps
    integrand = grad_half + pot_half
    return float(np.trapezoid(integrand, sigma * eps))


def layer_parts(path, p, eps, steps=4000):
    """Pointwise halves of the layer integrand (equipartition check).

    Returns (s_grid, gradient_half, potential_half) evaluated with the
    exact profile derivative |gamma'(h)|^2 h'(sigma)^2; for the exact
    ODE the halves coincide.
    """
    x = _nodes_of(path)
    gamma, b = _arclength_interpolant(x)
    sol = profile_ode(path, p, steps=steps)
    h = sol.h_values
    wv = np.maximum(pot.w(gamma(h), p), 0.0)
    # |gamma'| along the arc-length interpolant (1 up to interpolation).
    dt = 1e-7 * max(b, 1.0)
    tang = (gamma(np.minimum(h + dt, b)) - gamma(np.maximum(h - dt, 0.0))) / (
        np.minimum(h + dt, b) - np.maximum(h - dt, 0.0)
    )[:, None]
    speed2 = np.sum(tang * tang, axis=1)
    grad_half = speed2 * wv / eps
    pot_half = wv / eps
    return sol.s_grid * eps, grad_half, pot_half


def boundary_family(base_path, theta, well, tail_nodes=None):
    """Rotate a boundary-to-well geodesic and close it inside the well.

    The conjugation by the z-rotation is an isometry of the metric, so
    the rotated path has the same sqrt(w)-length; the appended tail
    unwinds the rotated well endpoint back to the base endpoint while
    staying inside the well (zero extra length).
    """
    x = _nodes_of(base_path)
    if float(theta) == 0.0:
        return TensorPath(x.copy())
    if tail_nodes is None:
        # dense enough that chord sagging off the curved well keeps the
        # tail's sqrt(w)-length below 1e-8
        tail_nodes = int(np.ceil(abs(float(theta)) / 2e-5)) + 2
    rotated = qt.rotate_z(x, float(theta))
    end = x[-1]
    taus = np.linspace(1.0, 0.0, tail_nodes)[1:]
    tail = np.stack([qt.rotate_z(end, float(theta) * t) for t in taus])
    return TensorPath(np.vstack([rotated, tail]))


# ---------------------------------------------------------------------------
# Dijkstra table on the 2D diagonal slice.
# ---------------------------------------------------------------------------


@dataclass
class SliceTable:
    """Per-well distance maps over the slice of tensors diagonal in a
    fixed frame {e1, e2, zhat}: Q = diag(lam1, lam2, -lam1-lam2).

    Queries reduce a tensor to its in-plane eigenvalue pair, which is
    invariant under z-rotations, so the table provides a fast
    rotation-invariant phi lookup for whole fields.
    """

    axis: np.ndarray  # (n,) lambda values
    dist: np.ndarray  # (n_wells, n, n) distances, indexed [i, i1, i2]
    box: float

    def query(self, q, i):
        """Interpolated distance to well i (1-based) for tensors q (..., 5)."""
        q = np.asarray(q, dtype=float)
        m11 = -q[..., 0] / np.sqrt(6.0) + q[..., 1] / np.sqrt(2.0)
        m22 = -q[..., 0] / np.sqrt(6.0) - q[..., 1] / np.sqrt(2.0)
        m12 = q[..., 2] / np.sqrt(2.0)
        half = 0.5 * (m11 + m22)
        r = np.sqrt(0.25 * (m11 - m22) ** 2 + m12 * m12)
        lam1 = half + r
        lam2 = half - r
        return self._interp(lam1, lam2, i)

    def _interp(self, lam1, lam2, i):
        d = self.dist[i - 1]
        n = len(self.axis)
        lo, hi = self.axis[0], self.axis[-1]
        step = self.axis[1] - self.axis[0]
        f1 = np.clip((lam1 - lo) / step, 0.0, n - 1.000001)
        f2 = np.clip((lam2 - lo) / step, 0.0, n - 1.000001)
        i1 = f1.astype(int)
        i2 = f2.astype(int)
        t1 = f1 - i1
        t2 = f2 - i2
        return (
            d[i1, i2] * (1 - t1) * (1 - t2)
            + d[i1 + 1, i2] * t1 * (1 - t2)
            + d[i1, i2 + 1] * (1 - t1) * t2
            + d[i1 + 1, i2 + 1] * t1 * t2
        )


def _slice_embed(lam1, lam2):
    """Coordinates of diag(lam1, lam2, -lam1-lam2)."""
    lam1 = np.asarray(lam1, dtype=float)
    lam2 = np.asarray(lam2, dtype=float)
    m = np.zeros(np.broadcast(lam1, lam2).shape + (3, 3))
    m[..., 0, 0] = lam1
    m[..., 1, 1] = lam2
    m[..., 2, 2] = -lam1 - lam2
    return qt.from_matrix(m)


def _well_slice_points(well):
    """Intersections of a well with the diagonal slice.

    Well tensors with zhat as an eigenvector meet the slice exactly
    where their in-plane eigenframe aligns with the axes; for circle
    wells this happens at the directors +-e1 and +-e2.
    """
    pts = []
    for sample in [well.representative] if well.kind == "point" else well.samples:
        m = qt.to_matrix(sample)
        if abs(m[0, 2]) > 1e-8 or abs(m[1, 2]) > 1e-8:
            continue
        # rotate within the plane so the in-plane block is diagonal
        a11, a22, a12 = m[0, 0], m[1, 1], m[0, 1]
        half = 0.5 * (a11 + a22)
        r = np.sqrt(0.25 * (a11 - a22) ** 2 + a12 * a12)
        pts.append((half + r, half - r))
        pts.append((half - r, half + r))
    pts = np.array(sorted(set((round(a, 9), round(b, 9)) for a, b in pts)))
    return pts


def build_slice_table(p, n=400, box=None, connectivity=8):
    """Multi-source Dijkstra distance maps from each well over the slice.

    Grid edges are weighted by sqrt(w(midpoint)) times the ambient
    (Frobenius) length of the step; exact well intersection points are
    added as extra graph nodes tied to their surrounding grid cells so
    sources do not suffer grid snapping.

    Args:
        connectivity: 8 (axis + diagonal steps) or 16 (adds knight
            moves, reducing metrication error).
    """
    if p.wells is None:
        raise StateError("wells not calibrated")
    ss = pot.s_star(p).value
    if box is None:
        box = 1.2 * max(abs(ss), 3.0 * abs(p.beta), 0.5)
    axis = np.linspace(-box, box, n)
    step = axis[1] - axis[0]
    l1, l2 = np.meshgrid(axis, axis, indexing="ij")
    qgrid = _slice_embed(l1, l2)
    wgrid = np.maximum(pot.w(qgrid, p), 0.0)
    sqw = np.sqrt(wgrid)

    if connectivity == 8:
        offsets = [(1, 0), (0, 1), (1, 1), (1, -1)]
    elif connectivity == 16:
        offsets = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)]
    else:
        raise InputError("connectivity must be 8 or 16")

    def metric_len(d1, d2):
        # |dQ|_F^2 = 2 (d1^2 + d2^2 + d1 d2) for diagonal steps
        return np.sqrt(2.0 * (d1 * d1 + d2 * d2 + d1 * d2)) * step

    idx = np.arange(n * n).reshape(n, n)
    rows, cols, vals = [], [], []
    for o1, o2 in offsets:
        s1a = slice(max(o1, 0), n + min(o1, 0))
        s2a = slice(max(o2, 0), n + min(o2, 0))
        s1b = slice(max(-o1, 0), n + min(-o1, 0))
        s2b = slice(max(-o2, 0), n + min(-o2, 0))
        a = idx[s1b, s2b].ravel()
        b = idx[s1a, s2a].ravel()
        wmid = 0.5 * (sqw[s1b, s2b] + sqw[s1a, s2a]).ravel()
        rows.append(a)
        cols.append(b)
        vals.append(wmid * metric_len(o1, o2))

    wells = p.wells.components
    extra_nodes = []
    extra_edges = []
    base = n * n
    for wi, well in enumerate(wells):
        pts = _well_slice_points(well)
        if len(pts) == 0:
            raise NumericalError("well does not intersect the diagonal slice")
        src = base + len(extra_nodes)
        extra_nodes.append(("virtual", wi))
        for lam1w, lam2w in pts:
            node = base + len(extra_nodes)
            extra_nodes.append(("well", wi))
            extra_edges.append((src, node, 0.0))
            qw = _slice_embed(lam1w, lam2w)
            i1 = int(np.clip(np.searchsorted(axis, lam1w) - 1, 0, n - 2))
            i2 = int(np.clip(np.searchsorted(axis, lam2w) - 1, 0, n - 2))
            for di in (0, 1):
                for dj in (0, 1):
                    gi, gj = i1 + di, i2 + dj
                    qc = qgrid[gi, gj]
                    mid = 0.5 * (qw + qc)
                    wmid = np.sqrt(max(float(pot.w(mid, p)), 0.0))
                    dlen = float(np.linalg.norm(qc - qw))
                    extra_edges.append((node, int(idx[gi, gj]), wmid * dlen))

    ntot = base + len(extra_nodes)
    rows = np.concatenate(rows + [[e[0] for e in extra_edges]])
    cols = np.concatenate(cols + [[e[1] for e in extra_edges]])
    vals = np.concatenate(vals + [[e[2] for e in extra_edges]])
    graph = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(ntot, ntot))

    dist = np.empty((len(wells), n, n))
    for wi in range(len(wells)):
        src = base + next(
            k for k, tag in enumerate(extra_nodes) if tag == ("virtual", wi)
        )
        d = scipy.sparse.csgraph.dijkstra(graph, directed=False, indices=src)
        dist[wi] = d[:base].reshape(n, n)
    # Symmetrize over the lam1 <-> lam2 relabeling (an exact isometry).
    dist = 0.5 * (dist + np.swapaxes(dist, 1, 2))
    return SliceTable(axis=axis, dist=dist, box=box)
