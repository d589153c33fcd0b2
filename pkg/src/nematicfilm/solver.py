"""Discrete thin-film energies and their minimization.

Two functionals share one descent engine:

* ``energy_2d``: the reduced 2D functional
  sum over edges of eps |dQ|^2 plus (h^2/eps) sum of W(Q),
  i.e. the finite-difference form of int eps |grad Q|^2 + W(Q)/eps.
* ``energy_3d``: the thin 3D functional with lateral gradient, z-gradient,
  bulk and top/bottom surface terms at aspect ratio eps.

Fields are tensor grids over a Domain2D.  The discretization is
boundary-conforming: every cell outside the mask is pinned to Dirichlet
data pulled back through the boundary projection (only the exterior
ghost ring enters the energy), edges that cross the domain wall are
weighted by the reciprocal of their interior fraction so the Dirichlet
condition acts on the true boundary rather than on the staircase of
cell edges, and cell quadrature is weighted by each cell's inside-area
fraction.  Pinned cells are never modified by optimization.

The pseudo-metric Lambda between fields sums, per well, the cell-area
weighted L1 difference of the well distance function phi_i; phi_i is
evaluated through the precomputed diagonal-slice distance table of the
metric module (exact for tensors with the z-axis as an eigenvector,
which covers the fields produced here).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
import scipy.ndimage

from . import domain as dmn
from . import metric
from . import potential as pot
from . import qtensor as qt
from .errors import InputError

ZHAT = np.array([0.0, 0.0, 1.0])


@dataclass
class SolveConfig:
    eps: float = 0.1
    max_iters: int = 5000
    grad_tol: float = 1e-6
    step0: float = 1e-3
    seed: int = 0
    optimizer: str = "bb"  # 'bb' | 'lbfgs'

    def __post_init__(self):
        if self.eps <= 0:
            raise InputError("eps must be positive")
        if self.grad_tol <= 0:
            raise InputError("grad_tol must be positive")


@dataclass
class Field2D:
    dom: dmn.Domain2D
    values: np.ndarray  # (ny, nx, 5)
    pinned: np.ndarray  # (ny, nx); True outside the mask (ghost ring included)
    bd: Optional[dmn.BoundaryData] = None

    @property
    def free(self):
        return self.dom.mask & ~self.pinned

    def copy(self):
        return Field2D(self.dom, self.values.copy(), self.pinned, self.bd)


@dataclass
class Field3D:
    dom: dmn.Domain2D
    values: np.ndarray  # (nz, ny, nx, 5)
    pinned: np.ndarray  # (nz, ny, nx)
    eps: float
    bd: Optional[dmn.BoundaryData] = None

    @property
    def n_z(self):
        return self.values.shape[0]

    @property
    def free(self):
        return self.dom.mask[None, :, :] & ~self.pinned

    def copy(self):
        return Field3D(self.dom, self.values.copy(), self.pinned, self.eps, self.bd)


_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def ghost_ring(dom):
    """Exterior cells with a 4-neighbor inside the mask."""
    return scipy.ndimage.binary_dilation(dom.mask, structure=_CROSS) & ~dom.mask


@dataclass
class CutCellWeights:
    """Boundary-conforming quadrature weights for one Domain2D.

    alpha:  (ny, nx) inside-area fraction of each cell (0 outside,
            1 deep inside, intermediate on wall-cut cells);
    wx, wy: per-edge gradient weights (1 on interior edges, 1/theta on
            wall-crossing edges where theta is the interior fraction of
            the edge, 0 elsewhere);
    area:   h^2 * sum(alpha), the conforming domain area.
    """

    alpha: np.ndarray
    wx: np.ndarray
    wy: np.ndarray
    area: float


def _wall_weight(d_in, d_out):
    """1/theta for an edge from an inside cell (d_in > 0) to an outside
    cell (d_out <= 0); theta is clipped away from 0 to bound stiffness."""
    theta = d_in / np.maximum(d_in - d_out, 1e-300)
    return 1.0 / np.clip(theta, 0.1, 1.0)


def cut_cell_weights(dom):
    """Cut-cell weights for ``dom`` (cached on the domain object)."""
    geo = getattr(dom, "_cut_cell", None)
    if geo is not None:
        return geo
    mask = dom.mask
    sd = dom.signed_distance
    alpha = np.where(mask, np.clip(0.5 + sd / dom.h, 0.0, 1.0), 0.0)

    wx = np.zeros((mask.shape[0], mask.shape[1] - 1))
    a, b = mask[:, :-1], mask[:, 1:]
    da, db = sd[:, :-1], sd[:, 1:]
    wx[a & b] = 1.0
    cut = a & ~b
    wx[cut] = _wall_weight(da[cut], db[cut])
    cut = ~a & b
    wx[cut] = _wall_weight(db[cut], da[cut])

    wy = np.zeros((mask.shape[0] - 1, mask.shape[1]))
    a, b = mask[:-1, :], mask[1:, :]
    da, db = sd[:-1, :], sd[1:, :]
    wy[a & b] = 1.0
    cut = a & ~b
    wy[cut] = _wall_weight(da[cut], db[cut])
    cut = ~a & b
    wy[cut] = _wall_weight(db[cut], da[cut])

    geo = CutCellWeights(
        alpha=alpha, wx=wx[..., None], wy=wy[..., None],
        area=float(alpha.sum()) * dom.h**2,
    )
    dom._cut_cell = geo
    return geo


def _pull_back_boundary(dom, bd):
    """Boundary tensor for every grid cell via nearest-point projection."""
    xx, yy = dom.cell_centers
    pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    res = dmn.project_to_boundary(dom, pts)
    return bd.values[res.index].reshape(dom.mask.shape + (5,))


def make_field(dom, bd, p=None, init="boundary", seed=0):
    """Assemble a Field2D with the Dirichlet data pinned outside the mask
    (only the exterior ghost ring enters the energy).

    init:
        'boundary' — everywhere the pulled-back boundary value;
        'taper'    — in-plane uniaxial with director angle
                     winding * theta(x) and strength ramped from 0 at
                     the domain center to the boundary strength
                     (the natural seed for degree-k runs);
        'random'   — small random tensors (seeded);
        array      — explicit (ny, nx, 5) initial values.
    """
    pinned = ~dom.mask
    g_grid = _pull_back_boundary(dom, bd)
    values = g_grid.copy()
    if isinstance(init, np.ndarray):
        values = init.copy()
    elif init == "taper":
        xx, yy = dom.cell_centers
        cx = 0.5 * (dom.x[0] + dom.x[-1])
        cy = 0.5 * (dom.y[0] + dom.y[-1])
        r = np.hypot(xx - cx, yy - cy)
        r0 = 0.3 * max(dom.x[-1] - dom.x[0], dom.y[-1] - dom.y[0]) / 2
        amp = np.minimum(1.0, r / r0)
        ang = bd.winding * np.arctan2(yy - cy, xx - cx)
        n = np.stack([np.cos(ang), np.sin(ang), np.zeros_like(ang)], axis=-1)
        values = qt.uniaxial(amp * -3.0 * bd.beta, n)
    elif init == "random":
        rng = np.random.default_rng(seed)
        values = 0.1 * rng.standard_normal(g_grid.shape)
    elif init != "boundary":
        raise InputError("unknown init mode")
    values[pinned] = g_grid[pinned]
    return Field2D(dom=dom, values=values, pinned=pinned, bd=bd)


def make_field_3d(dom, bd, eps, n_z=4, init="boundary", seed=0):
    """Field3D with n_z z-layers (layer 0 at z=0, layer n_z-1 at z=1).

    The lateral ghost ring is pinned at every layer.
    """
    if n_z < 2:
        raise InputError("n_z must be at least 2")
    f2 = make_field(dom, bd, init=init, seed=seed)
    values = np.tile(f2.values, (n_z, 1, 1, 1))
    pinned = np.tile(f2.pinned, (n_z, 1, 1))
    return Field3D(dom=dom, values=values, pinned=pinned, eps=eps, bd=bd)


def _edge_sq_sum(v, geo):
    """Weighted sum of |dq|^2 over 4-neighbor edges (wall edges carry
    the 1/theta cut-cell weight)."""
    dx = v[:, 1:] - v[:, :-1]
    dy = v[1:, :] - v[:-1, :]
    return float(np.sum(geo.wx * dx**2) + np.sum(geo.wy * dy**2))


def _edge_grad(v, geo):
    """Gradient of _edge_sq_sum with respect to v."""
    g = np.zeros_like(v)
    dx = (v[:, 1:] - v[:, :-1]) * geo.wx
    dy = (v[1:, :] - v[:-1, :]) * geo.wy
    g[:, 1:] += 2 * dx
    g[:, :-1] -= 2 * dx
    g[1:, :] += 2 * dy
    g[:-1, :] -= 2 * dy
    return g


def energy_2d(f, p, eps):
    """Discrete G_eps = sum_edges eps |dQ|^2 + (h^2/eps) sum_cells alpha W."""
    geo = cut_cell_weights(f.dom)
    m = f.dom.mask
    wsum = float(np.sum(geo.alpha[m] * pot.w(f.values[m], p)))
    return eps * _edge_sq_sum(f.values, geo) + f.dom.h**2 / eps * wsum


def grad_energy_2d(f, p, eps):
    """Gradient of energy_2d; zero at pinned cells."""
    geo = cut_cell_weights(f.dom)
    g = eps * _edge_grad(f.values, geo)
    m = f.dom.mask
    g[m] += (
        f.dom.h**2 / eps * geo.alpha[m, None] * pot.grad_w(f.values[m], p)
    )
    g[f.pinned] = 0.0
    return g


@dataclass
class Energy3DParts:
    lateral: float
    z_gradient: float
    bulk: float
    surface: float

    @property
    def total(self):
        return self.lateral + self.z_gradient + self.bulk + self.surface


def _trapz_weights(n_z):
    w = np.full(n_z, 1.0 / (n_z - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def energy_3d(f, p, eps=None):
    """Thin-film energy over Omega x (0,1) at aspect ratio eps.

    Terms: eps |grad_x Q|^2 + |d_z Q|^2 / eps^3 + f_ldg / eps in the
    volume, plus (1/eps) f_s on the top and bottom faces.  The bulk
    term uses the raw Landau-de Gennes density (no well shift).

    Returns:
        (total, Energy3DParts)
    """
    if eps is None:
        eps = f.eps
    n_z = f.n_z
    dz = 1.0 / (n_z - 1)
    cz = _trapz_weights(n_z)
    m = f.dom.mask
    h2 = f.dom.h**2
    geo = cut_cell_weights(f.dom)
    am = geo.alpha[m]

    lateral = eps * sum(
        cz[k] * _edge_sq_sum(f.values[k], geo) for k in range(n_z)
    )
    dzq = np.diff(f.values, axis=0)
    zgrad = float(np.sum(am * np.sum(dzq[:, m, :] ** 2, axis=(0, -1))))
    zgrad *= h2 / dz / eps**3
    bulk = (
        h2
        / eps
        * float(
            sum(
                cz[k] * np.sum(am * pot.f_ldg(f.values[k][m], p))
                for k in range(n_z)
            )
        )
    )
    surface = (
        h2
        / eps
        * float(
            np.sum(am * pot.f_s(f.values[0][m], p))
            + np.sum(am * pot.f_s(f.values[-1][m], p))
        )
    )
    parts = Energy3DParts(lateral=lateral, z_gradient=zgrad, bulk=bulk, surface=surface)
    return parts.total, parts


def grad_energy_3d(f, p, eps=None):
    """Gradient of the total 3D energy; zero at pinned cells."""
    if eps is None:
        eps = f.eps
    n_z = f.n_z
    dz = 1.0 / (n_z - 1)
    cz = _trapz_weights(n_z)
    m = f.dom.mask
    h2 = f.dom.h**2
    geo = cut_cell_weights(f.dom)
    am = geo.alpha[m, None]
    g = np.zeros_like(f.values)
    for k in range(n_z):
        g[k] += eps * cz[k] * _edge_grad(f.values[k], geo)
        gk = np.zeros_like(g[k])
        gk[m] = h2 / eps * cz[k] * am * pot._grad_f_ldg(f.values[k][m], p)
        g[k] += gk
    dzq = np.diff(f.values, axis=0) * (
        2 * h2 / dz / eps**3 * geo.alpha[None, :, :, None]
    )
    g[1:] += dzq
    g[:-1] -= dzq
    for k in (0, n_z - 1):
        gs = np.zeros_like(g[k])
        gs[m] = h2 / eps * am * pot._grad_f_s(f.values[k][m], p)
        g[k] += gs
    g[f.pinned] = 0.0
    return g


def surface_bulk_gap(f, p, eps=None):
    """(1/eps) |volume integral of f_s - bottom-face integral of f_s|."""
    if eps is None:
        eps = f.eps
    cz = _trapz_weights(f.n_z)
    m = f.dom.mask
    h2 = f.dom.h**2
    am = cut_cell_weights(f.dom).alpha[m]
    vol = sum(
        cz[k] * np.sum(am * pot.f_s(f.values[k][m], p)) for k in range(f.n_z)
    )
    bot = np.sum(am * pot.f_s(f.values[0][m], p))
    return abs(float(vol) - float(bot)) * h2 / eps


@dataclass
class MinimizeResult:
    field: object
    trace: np.ndarray  # (n, 3): iteration, energy, grad max-norm
    converged: bool
    line_search_failed: bool = False


def _bb_descent(x0, fun, grad, max_iters, tol, step0):
    """Barzilai-Borwein gradient descent with a backtracking safeguard.

    Returns (x, trace, converged, ls_failed); the recorded energy trace
    is nonincreasing by construction.
    """
    x = x0.copy()
    e = fun(x)
    g = grad(x)
    trace = [(0, e, np.max(np.abs(g)) if g.size else 0.0)]
    if g.size == 0 or np.max(np.abs(g)) < tol:
        return x, np.array(trace), True, False
    step = step0
    x_prev = g_prev = None
    for it in range(1, max_iters + 1):
        if x_prev is not None:
            s = x - x_prev
            y = g - g_prev
            sy = float(s @ y)
            step = float(s @ s) / sy if sy > 1e-300 else step0
            step = min(max(step, 1e-14), 1e6)
        t = step
        for _ in range(40):
            x_new = x - t * g
            e_new = fun(x_new)
            if e_new <= e:
                break
            t *= 0.5
        else:
            return x, np.array(trace), False, True
        x_prev, g_prev = x, g
        x, e = x_new, e_new
        g = grad(x)
        gmax = np.max(np.abs(g))
        trace.append((it, e, gmax))
        if gmax < tol:
            return x, np.array(trace), True, False
    return x, np.array(trace), False, False


def _pack(f):
    return f.values[f.free].ravel()


def _unpack(f, x):
    f.values[f.free] = x.reshape(-1, 5)


def minimize(f0, p, cfg=None, penalty=None):
    """Minimize the field energy over the unpinned cells.

    Works for Field2D (reduced functional) and Field3D (thin-film
    functional).  ``penalty`` is an optional callable
    (field -> (value, gradient field)) added to the objective; it is
    how the Lambda-ball constraint is imposed.

    The convergence test is on the max-norm of the pointwise energy
    density gradient (the discrete gradient divided by the cell area).
    """
    if cfg is None:
        cfg = SolveConfig()
    f = f0.copy()
    h2 = f.dom.h**2
    is3d = isinstance(f, Field3D)

    def fun(x):
        _unpack(f, x)
        e = energy_3d(f, p, cfg.eps)[0] if is3d else energy_2d(f, p, cfg.eps)
        if penalty is not None:
            e += penalty(f)[0]
        return e

    def grad(x):
        _unpack(f, x)
        g = grad_energy_3d(f, p, cfg.eps) if is3d else grad_energy_2d(f, p, cfg.eps)
        if penalty is not None:
            g = g + penalty(f)[1]
            g[f.pinned] = 0.0
        return g[f.free].ravel() / h2

    x, trace, converged, ls_failed = _bb_descent(
        _pack(f), fun, grad, cfg.max_iters, cfg.grad_tol, cfg.step0
    )
    _unpack(f, x)
    return MinimizeResult(
        field=f, trace=trace, converged=converged, line_search_failed=ls_failed
    )


_TABLE_CACHE = {}


def phi_table(p, n=200, connectivity=16):
    """Cached diagonal-slice distance table for fast phi lookups."""
    key = (id(p), n, connectivity)
    if key not in _TABLE_CACHE:
        _TABLE_CACHE[key] = metric.build_slice_table(
            p, n=n, connectivity=connectivity
        )
    return _TABLE_CACHE[key]


def phi_fields(f, p, table=None):
    """phi_i over the grid for every well, shape (n_wells, ny, nx)."""
    if table is None:
        table = phi_table(p)
    n_wells = len(p.wells.components)
    out = np.zeros((n_wells,) + f.dom.mask.shape)
    m = f.dom.mask
    for i in range(1, n_wells + 1):
        out[i - 1][m] = table.query(f.values[m], i)
    return out


def lambda_distance(f1, f2, p, table=None):
    """Sum over wells of the cell-area weighted L1 phi differences."""
    if f1.dom is not f2.dom and f1.values.shape != f2.values.shape:
        raise InputError("fields must share a domain")
    ph1 = phi_fields(f1, p, table)
    ph2 = phi_fields(f2, p, table)
    return float(np.sum(np.abs(ph1 - ph2))) * f1.dom.h**2


@dataclass
class LambdaBall:
    center: Field2D
    delta: float
    mu: float = 1e3

    def __post_init__(self):
        if self.delta <= 0:
            raise InputError("delta must be positive")
        if self.mu < 0:
            raise InputError("mu must be nonnegative")


@dataclass
class BallResult:
    field: Field2D
    trace: np.ndarray
    converged: bool
    lambda_final: float
    interior: bool  # Lambda stayed strictly inside the ball


def _lambda_cellwise(f, center_phi, p, table):
    """Per-cell contribution a(q) to Lambda(f, center) and its gradient.

    The gradient is taken by central finite differences through the
    interpolation table (the table is piecewise bilinear, so the
    stencil is exact away from cell crossings).
    """
    m = f.dom.mask
    q = f.values[m]
    n_wells = len(p.wells.components)
    val = np.zeros(len(q))
    grad = np.zeros_like(q)
    eps_fd = 1e-6
    for i in range(1, n_wells + 1):
        phi = table.query(q, i)
        diff = phi - center_phi[i - 1][m]
        val += np.abs(diff)
        sign = np.sign(diff)
        for c in range(5):
            qp = q.copy()
            qp[:, c] += eps_fd
            qm = q.copy()
            qm[:, c] -= eps_fd
            dphi = (table.query(qp, i) - table.query(qm, i)) / (2 * eps_fd)
            grad[:, c] += sign * dphi
    return val, grad


def local_minimize_in_lambda_ball(ball, p, cfg=None, f0=None, table=None):
    """Minimize the energy under the soft constraint Lambda <= delta.

    Objective: energy + mu * max(0, Lambda(f, center) - delta)^2.
    Starts from ``f0`` (default: the center field).  The run is
    accepted as an interior local minimizer when the final Lambda is
    below delta minus a 5% margin.
    """
    if cfg is None:
        cfg = SolveConfig()
    if table is None:
        table = phi_table(p)
    center_phi = phi_fields(ball.center, p, table)
    h2 = ball.center.dom.h**2

    def penalty(f):
        if ball.mu == 0:
            return 0.0, np.zeros_like(f.values)
        val, grad_cells = _lambda_cellwise(f, center_phi, p, table)
        lam = float(val.sum()) * h2
        excess = lam - ball.delta
        if excess <= 0:
            return 0.0, np.zeros_like(f.values)
        g = np.zeros_like(f.values)
        g[f.dom.mask] = 2 * ball.mu * excess * grad_cells * h2
        return ball.mu * excess**2, g

    start = ball.center if f0 is None else f0
    res = minimize(start, p, cfg, penalty=penalty)
    lam_final = lambda_distance(res.field, ball.center, p, table)
    return BallResult(
        field=res.field,
        trace=res.trace,
        converged=res.converged,
        lambda_final=lam_final,
        interior=lam_final < 0.95 * ball.delta,
    )


@dataclass
class Defect:
    cell: tuple  # (i, j) of the cluster centroid
    size: int
    degree: Optional[float]
    touches_boundary: bool


def detect_defects(f, p, threshold, table=None):
    """Clusters of cells far from the first well, with local degrees.

    Cells with phi_1(Q) > threshold are grouped by 4-connectivity;
    each cluster's degree is the loop degree on a surrounding ring of
    cells two cells outside the cluster's bounding box.  Clusters whose
    ring leaves the grid interior are flagged and get no degree.
    """
    ph1 = phi_fields(f, p, table)[0]
    hot = f.dom.mask & (ph1 > threshold)
    labels, n = scipy.ndimage.label(hot)
    ring_ok = scipy.ndimage.binary_erosion(f.dom.mask, iterations=1)
    out = []
    for lab in range(1, n + 1):
        cells = np.argwhere(labels == lab)
        ci, cj = cells.mean(axis=0)
        i0, j0 = cells.min(axis=0) - 2
        i1, j1 = cells.max(axis=0) + 2
        ny, nx = f.dom.mask.shape
        inside = i0 >= 0 and j0 >= 0 and i1 < ny and j1 < nx
        if inside:
            ring = (
                [(i0, j) for j in range(j0, j1 + 1)]
                + [(i, j1) for i in range(i0 + 1, i1 + 1)]
                + [(i1, j) for j in range(j1 - 1, j0 - 1, -1)]
                + [(i, j0) for i in range(i1 - 1, i0, -1)]
            )
            inside = all(ring_ok[i, j] and labels[i, j] == 0 for i, j in ring)
        if not inside:
            out.append(
                Defect(
                    cell=(float(ci), float(cj)),
                    size=len(cells),
                    degree=None,
                    touches_boundary=True,
                )
            )
            continue
        samples = np.array([f.values[i, j] for i, j in ring])
        deg = qt.loop_degree(qt.LoopSample(samples))
        out.append(
            Defect(
                cell=(float(ci), float(cj)),
                size=len(cells),
                degree=deg,
                touches_boundary=False,
            )
        )
    return out


def dump_field_csv(f, p, path, table=None):
    """Write the field as CSV rows i, j, x, y, q1..q5, w, phi1, phi2."""
    ph = phi_fields(f, p, table)
    wv = np.zeros(f.dom.mask.shape)
    wv[f.dom.mask] = pot.w(f.values[f.dom.mask], p)
    xx, yy = f.dom.cell_centers
    with open(path, "w") as fp:
        cols = ["i", "j", "x", "y"] + [f"q{k}" for k in range(1, 6)]
        cols += ["w"] + [f"phi{i}" for i in range(1, len(ph) + 1)]
        fp.write(",".join(cols) + "\n")
        ny, nx = f.dom.mask.shape
        for i in range(ny):
            for j in range(nx):
                if not f.dom.mask[i, j]:
                    continue
                row = [str(i), str(j), f"{xx[i, j]:.17g}", f"{yy[i, j]:.17g}"]
                row += [f"{v:.17g}" for v in f.values[i, j]]
                row.append(f"{wv[i, j]:.17g}")
                row += [f"{ph[k][i, j]:.17g}" for k in range(len(ph))]
                fp.write(",".join(row) + "\n")


def dump_trace_csv(trace, path):
    """Write an energy trace as CSV rows iteration, energy, grad_norm."""
    with open(path, "w") as fp:
        fp.write("iteration,energy,grad_norm\n")
        for it, e, g in trace:
            fp.write(f"{int(it)},{e:.17g},{g:.17g}\n")
