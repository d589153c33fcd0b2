"""2D computational domains on masked uniform grids.

A domain couples a cell-centered boolean mask with an analytic closed
boundary polyline (points, outward normals, arc-length coordinates)
and a signed distance field (positive inside).  Supported shapes:
disk, axis-aligned strip (rectangle), and a dumbbell made of two
circular bulbs joined by a neck bounded by strictly convex graphs
y = +-(w0 + kappa x^2 / 2).

Dirichlet data lives on the boundary polyline and is pulled back onto
the first ring of interior cells through the nearest-point projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.optimize
from scipy.spatial import cKDTree

from . import qtensor as qt
from .errors import InputError

ZHAT = np.array([0.0, 0.0, 1.0])


@dataclass
class Domain2D:
    kind: str
    x: np.ndarray  # (nx,) cell-center abscissae
    y: np.ndarray  # (ny,) cell-center ordinates
    h: float
    mask: np.ndarray  # (ny, nx) inside flags
    signed_distance: np.ndarray  # (ny, nx), positive inside
    boundary: np.ndarray  # (M, 2) closed polyline (first point not repeated)
    normals: np.ndarray  # (M, 2) outward units
    arclength: np.ndarray  # (M,) cumulative arc-length coordinate
    kappa_max: float
    _tree: Optional[cKDTree] = field(default=None, repr=False, compare=False)

    @property
    def perimeter(self):
        closed = np.vstack([self.boundary, self.boundary[:1]])
        return float(np.sum(np.linalg.norm(np.diff(closed, axis=0), axis=1)))

    @property
    def cell_centers(self):
        xx, yy = np.meshgrid(self.x, self.y)
        return xx, yy

    def tree(self):
        if self._tree is None:
            self._tree = cKDTree(self.boundary)
        return self._tree


@dataclass
class ProjectionResult:
    sigma: np.ndarray  # (..., 2) nearest boundary points
    d: np.ndarray  # (...,) distances
    nu: np.ndarray  # (..., 2) outward normals at sigma
    index: np.ndarray  # (...,) nearest polyline vertex index
    s: np.ndarray  # (...,) arc-length coordinate of sigma
    out_of_tube: np.ndarray  # (...,) True where d >= 1/kappa_max


@dataclass
class BoundaryData:
    variant: str  # 'g1' | 'g2'
    beta: float
    winding: float  # loop degree of the data, a multiple of 1/2
    values: np.ndarray  # (M, 5) tensor per boundary polyline point


def _grid(xmin, xmax, ymin, ymax, h):
    nx = int(np.ceil((xmax - xmin) / h))
    ny = int(np.ceil((ymax - ymin) / h))
    x = xmin + (np.arange(nx) + 0.5) * h
    y = ymin + (np.arange(ny) + 0.5) * h
    return x, y


def make_disk(R, h):
    """Disk of radius R centered at the origin."""
    if R <= 4 * h:
        raise InputError("resolution too coarse: R must exceed 4h")
    m = 2 * h
    x, y = _grid(-R - m, R + m, -R - m, R + m, h)
    xx, yy = np.meshgrid(x, y)
    r = np.hypot(xx, yy)
    sd = R - r
    mask = sd > 0
    n_b = max(int(np.ceil(2 * np.pi * R / h)), 16)
    th = np.linspace(0.0, 2 * np.pi, n_b, endpoint=False)
    boundary = R * np.stack([np.cos(th), np.sin(th)], axis=-1)
    normals = np.stack([np.cos(th), np.sin(th)], axis=-1)
    arclength = R * th
    return Domain2D(
        kind="disk",
        x=x,
        y=y,
        h=h,
        mask=mask,
        signed_distance=sd,
        boundary=boundary,
        normals=normals,
        arclength=arclength,
        kappa_max=1.0 / R,
    )


def make_strip(L, H, h):
    """Axis-aligned rectangle [0, L] x [0, H] (the strip axis is x)."""
    if L <= 4 * h or H <= 4 * h:
        raise InputError("resolution too coarse: sides must exceed 4h")
    m = 2 * h
    x, y = _grid(-m, L + m, -m, H + m, h)
    xx, yy = np.meshgrid(x, y)
    sd = np.minimum.reduce([xx, L - xx, yy, H - yy])
    mask = sd > 0

    pts, nus = [], []
    edges = [
        ((0.0, 0.0), (L, 0.0), (0.0, -1.0)),
        ((L, 0.0), (L, H), (1.0, 0.0)),
        ((L, H), (0.0, H), (0.0, 1.0)),
        ((0.0, H), (0.0, 0.0), (-1.0, 0.0)),
    ]
    for (x0, y0), (x1, y1), nu in edges:
        length = np.hypot(x1 - x0, y1 - y0)
        n_e = max(int(np.ceil(length / h)), 2)
        t = np.linspace(0.0, 1.0, n_e, endpoint=False)
        pts.append(np.stack([x0 + t * (x1 - x0), y0 + t * (y1 - y0)], axis=-1))
        nus.append(np.tile(nu, (n_e, 1)))
    boundary = np.concatenate(pts)
    normals = np.concatenate(nus)
    closed = np.vstack([boundary, boundary[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    arclength = np.concatenate([[0.0], np.cumsum(seg[:-1])])
    return Domain2D(
        kind="strip",
        x=x,
        y=y,
        h=h,
        mask=mask,
        signed_distance=sd,
        boundary=boundary,
        normals=normals,
        arclength=arclength,
        kappa_max=0.0,
    )


@dataclass
class DumbbellSpec:
    """Two bulbs of radius ``bulb_radius`` centered at +-separation/2
    joined by a neck |y| <= w0 + kappa_neck x^2 / 2.

    ``costs`` are the two-well partition costs (c1, c2, c3) and must
    satisfy 0 < c1 < c2 and c2 < c1 + c3; the derived contact abscissa
    x0 solves w'(x0)/sqrt(1+w'(x0)^2) = (c2-c1)/c3.
    """

    neck_halfwidth: float = 0.25
    neck_convexity: float = 1.0
    bulb_radius: float = 0.8
    separation: float = 2.4
    costs: tuple = (1.0, 1.5, 2.0)
    x0: Optional[float] = None  # derived

    def __post_init__(self):
        c1, c2, c3 = self.costs
        if not (0 < c1 <= c2):
            raise InputError("costs must satisfy 0 < c1 <= c2")
        if not (c2 < c1 + c3):
            raise InputError("costs must satisfy c2 < c1 + c3 (strict triangle)")
        rho = (c2 - c1) / c3
        t = rho / np.sqrt(1.0 - rho * rho)
        self.x0 = t / self.neck_convexity

    def w(self, x):
        return self.neck_halfwidth + 0.5 * self.neck_convexity * np.asarray(x) ** 2

    def wprime(self, x):
        return self.neck_convexity * np.asarray(x)

    def junction(self):
        """Abscissa where the neck graph meets the right bulb circle."""
        xc = self.separation / 2.0
        R = self.bulb_radius

        def gap(x):
            return (x - xc) ** 2 + self.w(x) ** 2 - R * R

        xs = np.linspace(0.0, xc, 4097)
        vals = gap(xs)
        if vals[0] <= 0:
            raise InputError("neck is swallowed by the bulbs")
        neg = np.nonzero(vals < 0)[0]
        if len(neg) == 0:
            raise InputError("neck graph does not reach the bulb")
        k = neg[0]
        return float(scipy.optimize.brentq(gap, xs[k - 1], xs[k], xtol=1e-14))


def make_dumbbell(spec, h):
    """Build the dumbbell domain.

    Returns:
        (Domain2D, P, Q, segment): P=(x0, w(x0)) and Q=(x0, -w(x0)) are
        the contact points of the candidate interface, ``segment`` the
        (2, 2) array [P; Q].

    The contact abscissa satisfies the balance
    w'(x0)/sqrt(1+w'^2) = (c2-c1)/c3, so the straight vertical segment
    PQ meets the boundary at the angle that trades interface length
    against boundary cost at first order.
    """
    xj = spec.junction()
    if spec.x0 >= xj:
        raise InputError("contact abscissa falls outside the neck")
    R = spec.bulb_radius
    xc = spec.separation / 2.0
    xmax = xc + R
    ymax = max(R, spec.w(xj))
    m = 2 * h
    x, y = _grid(-xmax - m, xmax + m, -ymax - m, ymax + m, h)
    xx, yy = np.meshgrid(x, y)
    in_bulb = np.minimum(np.hypot(xx - xc, yy), np.hypot(xx + xc, yy)) < R
    in_neck = (np.abs(xx) <= xj) & (np.abs(yy) < spec.w(xx))
    mask = in_bulb | in_neck

    # Boundary polyline, counterclockwise.
    pj = np.array([xj, float(spec.w(xj))])
    phi_t = float(np.arctan2(pj[1], pj[0] - xc))  # in (pi/2, pi)
    pts, nus = [], []

    def arc(center, a0, a1):
        length = R * abs(a1 - a0)
        n_a = max(int(np.ceil(length / h)), 8)
        ang = np.linspace(a0, a1, n_a, endpoint=False)
        p = center + R * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        nu = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        return p, nu

    # Right bulb: from bottom junction, through the right apex, to top.
    p, nu = arc(np.array([xc, 0.0]), -phi_t, phi_t)
    pts.append(p)
    nus.append(nu)
    # the contact abscissae become polyline vertices so that the
    # polygonal domain's contact kinks sit exactly at +-x0
    n_neck = max(int(np.ceil(2 * xj / h)), 8)
    interior = np.unique(
        np.concatenate(
            [np.linspace(-xj, xj, n_neck, endpoint=False)[1:], [spec.x0, -spec.x0]]
        )
    )

    def neck_xs(descending):
        if descending:  # from the top-right junction, exclude -xj
            return np.concatenate([[xj], interior[::-1]])
        return np.concatenate([[-xj], interior])  # exclude xj

    # Top neck, right to left.
    xs = neck_xs(descending=True)
    wp = spec.wprime(xs)
    norm = np.sqrt(1 + wp * wp)
    pts.append(np.stack([xs, spec.w(xs)], axis=-1))
    nus.append(np.stack([-wp / norm, np.ones_like(wp) / norm], axis=-1))
    # Left bulb: from top-left junction around the left apex to bottom-left.
    psi_t = float(np.arctan2(spec.w(xj), xc - xj))  # angle of (-xj, w) about left center
    p, nu = arc(np.array([-xc, 0.0]), psi_t, 2 * np.pi - psi_t)
    pts.append(p)
    nus.append(nu)
    # Bottom neck, left to right.
    xs = neck_xs(descending=False)
    wp = spec.wprime(xs)
    norm = np.sqrt(1 + wp * wp)
    pts.append(np.stack([xs, -spec.w(xs)], axis=-1))
    nus.append(np.stack([-wp / norm, -np.ones_like(wp) / norm], axis=-1))

    boundary = np.concatenate(pts)
    normals = np.concatenate(nus)
    closed = np.vstack([boundary, boundary[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    arclength = np.concatenate([[0.0], np.cumsum(seg[:-1])])

    kappa_max = max(1.0 / R, spec.neck_convexity)
    dom = Domain2D(
        kind="dumbbell",
        x=x,
        y=y,
        h=h,
        mask=mask,
        signed_distance=np.zeros_like(xx),
        boundary=boundary,
        normals=normals,
        arclength=arclength,
        kappa_max=kappa_max,
    )
    # Signed distance from the polyline (sign from the mask).
    pts_all = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    d, _ = dom.tree().query(pts_all)
    sd = np.where(mask.ravel(), d, -d).reshape(mask.shape)
    dom.signed_distance = sd

    x0 = spec.x0
    P = np.array([x0, float(spec.w(x0))])
    Q = np.array([x0, -float(spec.w(x0))])
    return dom, P, Q, np.stack([P, Q])


def project_to_boundary(dom, x):
    """Nearest boundary point, distance, and outward normal.

    Works for single points (shape (2,)) or arrays (..., 2).  Points
    with d >= 1/kappa_max (outside the tubular regime) are flagged.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    d, idx = dom.tree().query(pts)
    # refine: project onto the two polyline segments adjacent to the hit
    M = len(dom.boundary)
    perim = dom.perimeter
    seg_len = np.concatenate(
        [np.diff(dom.arclength), [perim - dom.arclength[-1]]]
    )
    best_sigma = dom.boundary[idx].copy()
    best_d = d.copy()
    best_idx = idx.copy()
    best_s = dom.arclength[idx].copy()
    for nb in (-1, 0):
        k0 = (idx + nb) % M
        a = dom.boundary[k0]
        b = dom.boundary[(k0 + 1) % M]
        ab = b - a
        denom = np.sum(ab * ab, axis=-1)
        t = np.clip(np.sum((pts - a) * ab, axis=-1) / np.maximum(denom, 1e-30), 0, 1)
        proj = a + t[:, None] * ab
        dd = np.linalg.norm(pts - proj, axis=-1)
        better = dd < best_d
        best_d = np.where(better, dd, best_d)
        best_sigma[better] = proj[better]
        best_idx = np.where(better & (t > 0.5), (k0 + 1) % M, best_idx)
        best_s = np.where(better, dom.arclength[k0] + t * seg_len[k0], best_s)
    nu = dom.normals[best_idx]
    tube = np.inf if dom.kappa_max == 0 else 1.0 / dom.kappa_max
    # allow one cell of slack: polyline distances carry O(h) error
    out = best_d >= tube - dom.h
    if single:
        return ProjectionResult(
            best_sigma[0], best_d[0], nu[0], best_idx[0], best_s[0], out[0]
        )
    shape = x.shape[:-1]
    return ProjectionResult(
        best_sigma.reshape(shape + (2,)),
        best_d.reshape(shape),
        nu.reshape(shape + (2,)),
        best_idx.reshape(shape),
        best_s.reshape(shape),
        out.reshape(shape),
    )


def tubular_map(dom, s, y):
    """Tubular coordinates (s, y) -> gamma(s) - y * nu(s).

    ``s`` is the arc-length coordinate along the boundary (wrapped to
    the perimeter), ``y`` the inward depth.  Boundary position and
    normal are linearly interpolated between polyline vertices.
    """
    s = np.mod(np.asarray(s, dtype=float), dom.perimeter)
    y = np.asarray(y, dtype=float)
    M = len(dom.boundary)
    k = np.searchsorted(dom.arclength, s, side="right") - 1
    k = np.clip(k, 0, M - 1)
    s0 = dom.arclength[k]
    s1 = np.where(k + 1 < M, dom.arclength[(k + 1) % M], dom.perimeter)
    t = np.clip((s - s0) / np.maximum(s1 - s0, 1e-30), 0.0, 1.0)
    gamma = (1 - t)[..., None] * dom.boundary[k] + t[..., None] * dom.boundary[
        (k + 1) % M
    ]
    nu = (1 - t)[..., None] * dom.normals[k] + t[..., None] * dom.normals[(k + 1) % M]
    nu = nu / np.maximum(np.linalg.norm(nu, axis=-1, keepdims=True), 1e-30)
    return gamma - y[..., None] * nu


def dump_grid_csv(dom, path):
    """Write the grid as CSV with columns i, j, x, y, inside, d."""
    jj, ii = np.meshgrid(np.arange(len(dom.x)), np.arange(len(dom.y)))
    xx, yy = dom.cell_centers
    with open(path, "w") as f:
        f.write("i,j,x,y,inside,d\n")
        for i, j, x, y, m, d in zip(
            ii.ravel(),
            jj.ravel(),
            xx.ravel(),
            yy.ravel(),
            dom.mask.ravel(),
            dom.signed_distance.ravel(),
        ):
            f.write(f"{i},{j},{x:.17g},{y:.17g},{int(m)},{d:.17g}\n")


def dump_boundary_csv(dom, path):
    """Write the boundary polyline as CSV with columns s, x, y, nux, nuy."""
    with open(path, "w") as f:
        f.write("s,x,y,nux,nuy\n")
        for s, (x, y), (nx, ny) in zip(dom.arclength, dom.boundary, dom.normals):
            f.write(f"{s:.17g},{x:.17g},{y:.17g},{nx:.17g},{ny:.17g}\n")


def make_boundary_data(dom, variant, beta, winding=None):
    """Dirichlet data on the boundary polyline.

    g1: the constant z-axis uniaxial tensor (3 beta / 2)(z x z - I/3).
    g2: in-plane uniaxial -3 beta (n x n - I/3) with director angle
    winding * (2 pi s / perimeter).  winding is the loop degree of the
    data and may be any multiple of 1/2: the head-tail symmetry of the
    director keeps the tensor values continuous around the loop even
    when n itself flips sign.
    """
    M = len(dom.boundary)
    if variant == "g1":
        vals = np.tile(qt.uniaxial(1.5 * beta, ZHAT), (M, 1))
        return BoundaryData(variant="g1", beta=beta, winding=0, values=vals)
    if variant != "g2":
        raise InputError("variant must be 'g1' or 'g2'")
    if winding is None:
        raise InputError("variant g2 requires a winding")
    if abs(2.0 * winding - round(2.0 * winding)) > 1e-12:
        raise InputError("g2 winding must be a multiple of 1/2")
    t = 2.0 * np.pi * dom.arclength / dom.perimeter
    n = np.stack(
        [np.cos(winding * t), np.sin(winding * t), np.zeros_like(t)], axis=-1
    )
    vals = qt.uniaxial(np.full(M, -3.0 * beta), n)
    return BoundaryData(variant="g2", beta=beta, winding=float(winding), values=vals)
