import numpy as np
import pytest

from nematicfilm import domain as dm
from nematicfilm import potential as pot
from nematicfilm import qtensor as qt
from nematicfilm.errors import InputError


@pytest.fixture(scope="module")
def disk():
    return dm.make_disk(1.0, 0.02)


@pytest.fixture(scope="module")
def strip():
    return dm.make_strip(3.0, 1.0, 0.02)


@pytest.fixture(scope="module")
def dumbbell():
    spec = dm.DumbbellSpec(
        neck_halfwidth=0.25,
        neck_convexity=1.0,
        bulb_radius=0.8,
        separation=2.4,
        costs=(1.0, 1.5, 2.0),
    )
    return spec, dm.make_dumbbell(spec, 0.02)


class TestDisk:
    def test_perimeter(self, disk):
        assert abs(disk.perimeter - 2 * np.pi) / (2 * np.pi) < 0.005

    def test_distance_at_center(self, disk):
        i = np.argmin(np.abs(disk.y))
        j = np.argmin(np.abs(disk.x))
        assert abs(disk.signed_distance[i, j] - 1.0) < 2 * disk.h

    def test_normals_radial(self, disk):
        radial = disk.boundary / np.linalg.norm(disk.boundary, axis=1, keepdims=True)
        assert np.max(np.linalg.norm(disk.normals - radial, axis=1)) < 1e-6

    def test_normals_orthogonal_to_tangent(self, disk):
        # central-difference tangents on the closed polyline
        t = np.roll(disk.boundary, -1, axis=0) - np.roll(disk.boundary, 1, axis=0)
        t /= np.linalg.norm(t, axis=1, keepdims=True)
        assert np.max(np.abs(np.sum(t * disk.normals, axis=1))) < 1e-6

    def test_polyline_closed_and_spaced(self, disk):
        closed = np.vstack([disk.boundary, disk.boundary[:1]])
        gaps = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        assert gaps.max() <= disk.h * 1.01

    def test_grad_signed_distance_near_boundary(self, disk):
        gy, gx = np.gradient(disk.signed_distance, disk.h)
        norm = np.hypot(gx, gy)
        near = disk.mask & (disk.signed_distance > 2 * disk.h) & (
            disk.signed_distance < 0.3
        )
        assert np.max(np.abs(norm[near] - 1.0)) < 0.05

    def test_too_coarse(self):
        with pytest.raises(InputError):
            dm.make_disk(0.1, 0.05)


class TestStrip:
    def test_distance_at_center(self, strip):
        i = np.argmin(np.abs(strip.y - 0.5))
        j = np.argmin(np.abs(strip.x - 1.5))
        assert abs(strip.signed_distance[i, j] - 0.5) < strip.h

    def test_area(self, strip):
        area = strip.mask.sum() * strip.h**2
        assert abs(area - 3.0) / 3.0 < 0.05

    def test_flat_boundary(self, strip):
        assert strip.kappa_max == 0.0
        closed = np.vstack([strip.boundary, strip.boundary[:1]])
        gaps = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        assert gaps.max() <= strip.h * 1.01


class TestProjection:
    def test_disk_interior_point(self, disk):
        res = dm.project_to_boundary(disk, np.array([0.5, 0.0]))
        assert np.linalg.norm(res.sigma - [1.0, 0.0]) < disk.h
        assert abs(res.d - 0.5) < disk.h
        assert not res.out_of_tube

    def test_boundary_point(self, disk):
        x = disk.boundary[7]
        res = dm.project_to_boundary(disk, x)
        assert res.d < 1e-12
        assert np.linalg.norm(res.sigma - x) < 1e-12

    def test_distance_matches_exact(self, disk, rng):
        pts = rng.uniform(-0.7, 0.7, size=(200, 2))
        res = dm.project_to_boundary(disk, pts)
        exact = 1.0 - np.linalg.norm(pts, axis=1)
        assert np.max(np.abs(res.d - exact)) < disk.h

    def test_round_trip(self, disk, rng):
        pts = rng.uniform(-0.95, 0.95, size=(2000, 2))
        pts = pts[np.linalg.norm(pts, axis=1) < 0.9][:1000]
        res = dm.project_to_boundary(disk, pts)
        back = dm.tubular_map(disk, res.s, res.d)
        assert np.max(np.linalg.norm(back - pts, axis=1)) < 2 * disk.h

    def test_out_of_tube_flag(self, disk):
        res = dm.project_to_boundary(disk, np.array([0.0, 0.0]))
        assert res.out_of_tube


class TestDumbbell:
    def test_contact_condition(self, dumbbell):
        spec, (dom, P, Q, seg) = dumbbell
        c1, c2, c3 = spec.costs
        wp = float(spec.wprime(spec.x0))
        nu = np.array([-wp, 1.0]) / np.hypot(wp, 1.0)
        v = np.array([1.0, 0.0])
        assert abs(v @ nu - (c1 - c2) / c3) < 1e-6

    def test_contact_points_on_boundary(self, dumbbell):
        spec, (dom, P, Q, seg) = dumbbell
        for pt in (P, Q):
            res = dm.project_to_boundary(dom, pt)
            assert res.d < dom.h

    def test_equal_costs_contact_at_neck_minimum(self):
        spec = dm.DumbbellSpec(costs=(1.0, 1.0, 2.0))
        assert spec.x0 == 0.0

    def test_known_slope(self):
        # (c2-c1)/c3 = 1/sqrt(3) forces w'(x0) = 1/sqrt(2)
        spec = dm.DumbbellSpec(costs=(1.0, 2.0, np.sqrt(3.0)))
        assert abs(spec.wprime(spec.x0) - 1 / np.sqrt(2)) < 1e-12

    def test_neck_convex(self, dumbbell):
        spec, (dom, P, Q, seg) = dumbbell
        xj = spec.junction()
        top = dom.boundary[
            (np.abs(dom.boundary[:, 0]) < 0.9 * xj) & (dom.boundary[:, 1] > 0)
        ]
        top = top[np.argsort(top[:, 0])]
        slopes = np.diff(top[:, 1]) / np.diff(top[:, 0])
        assert np.all(np.diff(slopes) > 0)

    def test_mask_symmetry(self, dumbbell):
        spec, (dom, P, Q, seg) = dumbbell
        assert np.array_equal(dom.mask, dom.mask[::-1])
        assert np.array_equal(dom.mask, dom.mask[:, ::-1])

    def test_junction_on_bulb(self, dumbbell):
        spec, _ = dumbbell
        xj = spec.junction()
        r = np.hypot(xj - spec.separation / 2, float(spec.w(xj)))
        assert abs(r - spec.bulb_radius) < 1e-10

    def test_polyline_closed(self, dumbbell):
        spec, (dom, P, Q, seg) = dumbbell
        closed = np.vstack([dom.boundary, dom.boundary[:1]])
        gaps = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        assert gaps.max() <= 3 * dom.h

    def test_perimeter_brackets(self, dumbbell):
        # between one bulb circle and two bulbs plus the neck graphs
        spec, (dom, P, Q, seg) = dumbbell
        lo = 2 * np.pi * spec.bulb_radius
        xj = spec.junction()
        hi = 2 * (2 * np.pi * spec.bulb_radius) + 4 * xj * np.sqrt(
            1 + float(spec.wprime(xj)) ** 2
        )
        assert lo < dom.perimeter < hi

    def test_unreachable_contact(self):
        spec = dm.DumbbellSpec(costs=(1.0, 2.8, 2.0))
        with pytest.raises(InputError):
            dm.make_dumbbell(spec, 0.02)

    def test_triangle_violation_rejected(self):
        with pytest.raises(InputError):
            dm.DumbbellSpec(costs=(1.0, 4.0, 2.0))


class TestTubularBounds:
    def test_jacobian_bound(self, disk):
        # inward offset map P_t contracts lengths by at most kappa*t
        th = np.linspace(0.0, 2 * np.pi, 400, endpoint=False)
        gamma = np.stack([np.cos(th), np.sin(th)], axis=-1)
        nu = gamma.copy()
        for t in (0.1, 0.3, 0.6):
            offs = gamma - t * nu
            len0 = np.linalg.norm(np.diff(gamma, axis=0), axis=1)
            len1 = np.linalg.norm(np.diff(offs, axis=0), axis=1)
            jac = len1 / len0
            assert np.max(np.abs(jac - 1.0)) <= disk.kappa_max * t + 0.01

    def test_projection_inequality(self, disk):
        # polygonal test set V in the width-eta tube: the projected arc
        # is controlled by the boundary of V inside the tube
        eta = 0.4
        rect = np.array([[0.65, -0.2], [0.95, -0.2], [0.95, 0.2], [0.65, 0.2]])
        edges = []
        for k in range(4):
            a, b = rect[k], rect[(k + 1) % 4]
            t = np.linspace(0, 1, 400, endpoint=False)[:, None]
            edges.append(a + t * (b - a))
        bnd = np.concatenate(edges)
        r = np.linalg.norm(bnd, axis=1)
        in_tube = (r > 1 - eta) & (r <= 1.0)
        h1_boundary = in_tube.sum() * (np.linalg.norm(rect[1] - rect[0]) / 400)
        res = dm.project_to_boundary(disk, bnd[in_tube])
        ang = np.arctan2(res.sigma[:, 1], res.sigma[:, 0])
        h1_proj = ang.max() - ang.min()  # arc length on the unit circle
        assert (1 - eta * disk.kappa_max) * h1_proj <= h1_boundary * 1.05


class TestBoundaryData:
    def test_g1_constant(self, disk):
        bd = dm.make_boundary_data(disk, "g1", beta=-0.1)
        ref = qt.uniaxial(1.5 * -0.1, np.array([0.0, 0.0, 1.0]))
        assert np.allclose(bd.values, ref)
        assert bd.winding == 0

    def test_g2_winding(self, disk):
        for w in (-1, 1, 2):
            bd = dm.make_boundary_data(disk, "g2", beta=-0.1, winding=w)
            deg = qt.loop_degree(qt.LoopSample(bd.values))
            assert deg == w

    def test_g2_half_degree(self, disk):
        # the director flips sign around the loop but the tensor values
        # stay continuous, giving the elementary degree-1/2 data
        bd = dm.make_boundary_data(disk, "g2", beta=-0.2, winding=0.5)
        closed = np.vstack([bd.values, bd.values[:1]])
        jumps = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        assert jumps.max() < 4 * np.pi / len(bd.values)
        assert qt.loop_degree(qt.LoopSample(bd.values)) == 0.5

    def test_g2_rejects_quarter_winding(self, disk):
        with pytest.raises(InputError):
            dm.make_boundary_data(disk, "g2", beta=-0.1, winding=0.25)

    def test_g2_zhat_eigenvector(self, disk):
        bd = dm.make_boundary_data(disk, "g2", beta=-0.1, winding=1)
        assert np.max(np.abs(bd.values[:, 3:])) < 1e-14

    def test_g2_strength(self, disk):
        bd = dm.make_boundary_data(disk, "g2", beta=-0.1, winding=1)
        lam = qt.eigs(bd.values[0]).lam
        assert abs(lam[-1] - 2 * 0.3 / 3) < 1e-12

    def test_positive_potential_on_boundary(self, disk, default_params):
        for variant, w in (("g2", 1), ("g2", 0)):
            bd = dm.make_boundary_data(disk, variant, default_params.beta, winding=w)
            vals = pot.w(bd.values, default_params)
            assert np.all(vals > 0)

    def test_g2_requires_winding(self, disk):
        with pytest.raises(InputError):
            dm.make_boundary_data(disk, "g2", beta=-0.1)

    def test_unknown_variant(self, disk):
        with pytest.raises(InputError):
            dm.make_boundary_data(disk, "g3", beta=-0.1)


class TestDumps:
    def test_csv_roundtrip(self, tmp_path, strip):
        gp = tmp_path / "grid.csv"
        bp = tmp_path / "boundary.csv"
        dm.dump_grid_csv(strip, gp)
        dm.dump_boundary_csv(strip, bp)
        g = np.genfromtxt(gp, delimiter=",", names=True)
        b = np.genfromtxt(bp, delimiter=",", names=True)
        assert len(g) == strip.mask.size
        assert int(g["inside"].sum()) == int(strip.mask.sum())
        assert len(b) == len(strip.boundary)
        assert np.allclose(b["s"], strip.arclength)
