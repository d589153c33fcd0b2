import numpy as np
import pytest

from nematicfilm import domain as dm
from nematicfilm import potential as pot
from nematicfilm import qtensor as qt
from nematicfilm import solver as sv


@pytest.fixture(scope="module")
def disk16():
    return dm.make_disk(1.0, 1.0 / 8.0)


@pytest.fixture(scope="module")
def disk_fine():
    return dm.make_disk(1.0, 0.025)


@pytest.fixture(scope="module")
def table(default_params):
    return sv.phi_table(default_params, n=200, connectivity=16)


def well_constant_field(dom, p, i=0):
    rep = p.wells.components[i].representative
    values = np.tile(rep, dom.mask.shape + (1,))
    return sv.Field2D(dom=dom, values=values, pinned=~dom.mask, bd=None)


def smooth_test_field(dom, bd, amp=0.3):
    f = sv.make_field(dom, bd)
    xx, yy = dom.cell_centers
    bump = amp * np.exp(-((xx**2 + yy**2) / 0.3))
    pert = np.stack(
        [
            bump * np.sin(2 * xx),
            bump * np.cos(yy),
            bump * np.sin(xx + yy),
            0.3 * bump,
            0.2 * bump * np.cos(xx),
        ],
        axis=-1,
    )
    f.values = np.where(f.pinned[..., None], f.values, f.values + pert)
    return f


def quarter_rotate(values, n):
    """Field transform under a 90-degree rotation of the plane."""
    out = np.empty_like(values)
    for iy in range(n):
        for ix in range(n):
            out[iy, ix] = qt.rotate_z(values[n - 1 - ix, iy], np.pi / 2)
    return out


class TestEnergy2D:
    def test_well_constant_is_zero(self, disk16, default_params):
        f = well_constant_field(disk16, default_params)
        assert sv.energy_2d(f, default_params, 0.1) < 1e-10

    def test_rotation_invariance(self, disk16, default_params):
        p = default_params
        bd = dm.make_boundary_data(disk16, "g2", p.beta, winding=1)
        f = smooth_test_field(disk16, bd)
        n = len(disk16.x)
        rot = sv.Field2D(
            dom=disk16,
            values=quarter_rotate(f.values, n),
            pinned=f.pinned,
            bd=bd,
        )
        e1 = sv.energy_2d(f, p, 0.1)
        e2 = sv.energy_2d(rot, p, 0.1)
        assert abs(e1 - e2) < 1e-9 * max(1.0, e1)

    def test_gradient_matches_finite_differences(self, disk16, default_params, rng):
        p = default_params
        bd = dm.make_boundary_data(disk16, "g2", p.beta, winding=1)
        f = smooth_test_field(disk16, bd)
        eps = 0.15
        g = sv.grad_energy_2d(f, p, eps)[f.free].ravel()
        x0 = f.values[f.free].ravel()
        t = 1e-5
        worst = 0.0
        for _ in range(50):
            d = rng.standard_normal(x0.size)
            d /= np.linalg.norm(d)

            def e_at(xv):
                f.values[f.free] = xv.reshape(-1, 5)
                return sv.energy_2d(f, p, eps)

            fd = (e_at(x0 + t * d) - e_at(x0 - t * d)) / (2 * t)
            worst = max(worst, abs(fd - g @ d) / max(abs(fd), 1e-12))
        f.values[f.free] = x0.reshape(-1, 5)
        assert worst < 1e-6


class TestEnergy3D:
    def make3d(self, dom, p, n_z=5):
        bd = dm.make_boundary_data(dom, "g2", p.beta, winding=1)
        f2 = smooth_test_field(dom, bd)
        f3 = sv.make_field_3d(dom, bd, eps=0.2, n_z=n_z)
        f3.values[:] = f2.values[None]
        return f2, f3

    def test_z_independent_no_z_gradient(self, disk16, default_params):
        _, f3 = self.make3d(disk16, default_params)
        _, parts = sv.energy_3d(f3, default_params)
        assert parts.z_gradient == 0.0

    def test_z_independent_matches_2d(self, disk16, default_params):
        p = default_params
        f2, f3 = self.make3d(disk16, p)
        total, _ = sv.energy_3d(f3, p)
        area = sv.cut_cell_weights(disk16).area
        expected = sv.energy_2d(f2, p, 0.2) + area * p.w_min / 0.2
        assert abs(total - expected) < 1e-9 * max(1.0, abs(total))

    def test_zhat_eigenvector_surface_zero(self, disk16, default_params):
        p = default_params
        _, f3 = self.make3d(disk16, p)
        f3.values[..., 3:] = 0.0  # zhat becomes an eigenvector everywhere
        _, parts = sv.energy_3d(f3, p)
        assert parts.surface == 0.0

    def test_gradient_matches_finite_differences(self, default_params, rng):
        p = default_params
        dom = dm.make_disk(1.0, 1.0 / 6.0)
        _, f3 = self.make3d(dom, p, n_z=3)
        f3.values += 0.05 * rng.standard_normal(f3.values.shape)
        f3.values[f3.pinned] = 0.2
        g = sv.grad_energy_3d(f3, p)[f3.free].ravel()
        x0 = f3.values[f3.free].ravel()
        t = 1e-5
        worst = 0.0
        for _ in range(20):
            d = rng.standard_normal(x0.size)
            d /= np.linalg.norm(d)

            def e_at(xv):
                f3.values[f3.free] = xv.reshape(-1, 5)
                return sv.energy_3d(f3, p)[0]

            fd = (e_at(x0 + t * d) - e_at(x0 - t * d)) / (2 * t)
            worst = max(worst, abs(fd - g @ d) / max(abs(fd), 1e-12))
        assert worst < 1e-6


class TestSurfaceBulkGap:
    def test_z_independent_zero(self, disk16, default_params):
        bd = dm.make_boundary_data(disk16, "g2", default_params.beta, winding=1)
        f3 = sv.make_field_3d(disk16, bd, eps=0.2, n_z=5)
        assert sv.surface_bulk_gap(f3, default_params) == 0.0

    def test_linear_z_field_analytic(self, disk16, default_params):
        p = default_params
        bd = dm.make_boundary_data(disk16, "g2", p.beta, winding=1)
        n_z = 33
        f3 = sv.make_field_3d(disk16, bd, eps=0.2, n_z=n_z)
        rng = np.random.default_rng(7)
        dq = 0.3 * rng.standard_normal(5)
        z = np.linspace(0.0, 1.0, n_z)
        base = f3.values[0].copy()
        f3.values[:] = base[None] + z[:, None, None, None] * dq
        m = disk16.mask
        q0 = base[m]
        am = sv.cut_cell_weights(disk16).alpha[m]
        # f_s along a line in tensor space is quadratic in z, so
        # Simpson with one interval integrates it exactly
        vol = (
            np.sum(am * pot.f_s(q0, p))
            + 4 * np.sum(am * pot.f_s(q0 + 0.5 * dq, p))
            + np.sum(am * pot.f_s(q0 + dq, p))
        ) / 6.0
        bot = np.sum(am * pot.f_s(q0, p))
        exact = abs(vol - bot) * disk16.h**2 / 0.2
        got = sv.surface_bulk_gap(f3, p)
        assert abs(got - exact) / exact < 0.01


class TestMinimize:
    def test_critical_start_converges_immediately(self, disk16, default_params):
        f = well_constant_field(disk16, default_params)
        res = sv.minimize(f, default_params, sv.SolveConfig(eps=0.1))
        assert res.converged
        assert len(res.trace) == 1

    def test_trace_nonincreasing_and_pinned_exact(self, disk16, default_params):
        p = default_params
        bd = dm.make_boundary_data(disk16, "g2", p.beta, winding=1)
        f0 = sv.make_field(disk16, bd, init="taper")
        cfg = sv.SolveConfig(eps=0.2, max_iters=300, grad_tol=1e-5)
        res = sv.minimize(f0, p, cfg)
        assert np.all(np.diff(res.trace[:, 1]) <= 0)
        assert np.array_equal(res.field.values[f0.pinned], f0.values[f0.pinned])

    def test_rotational_equivariance(self, disk16, default_params):
        p = default_params
        bd = dm.make_boundary_data(disk16, "g2", p.beta, winding=1)
        f0 = sv.make_field(disk16, bd, init="taper")
        n = len(disk16.x)
        r0 = sv.Field2D(
            dom=disk16,
            values=quarter_rotate(f0.values, n),
            pinned=f0.pinned,
            bd=bd,
        )
        cfg = sv.SolveConfig(eps=0.2, max_iters=400, grad_tol=1e-5)
        e1 = sv.energy_2d(sv.minimize(f0, p, cfg).field, p, 0.2)
        e2 = sv.energy_2d(sv.minimize(r0, p, cfg).field, p, 0.2)
        assert abs(e1 - e2) < 10 * cfg.grad_tol * max(1.0, e1)


def well_matched_data(dom, p, winding=1):
    """g2 data with strength equal to s*, i.e. valued in the first well."""
    s = pot.s_star(p).value
    return dm.make_boundary_data(dom, "g2", -s / 3.0, winding=winding)


@pytest.fixture(scope="module")
def disk_run(disk_fine, default_params):
    f0 = sv.make_field(disk_fine, well_matched_data(disk_fine, default_params),
                       init="taper")
    cfg = sv.SolveConfig(eps=0.1, max_iters=4000, grad_tol=1e-4)
    return sv.minimize(f0, default_params, cfg)


class TestDefects:
    def test_well_constant_empty(self, disk16, default_params, table):
        f = well_constant_field(disk16, default_params)
        assert sv.detect_defects(f, default_params, 0.05, table) == []

    def test_disk_degrees_tally_to_one(self, disk_run, default_params, table):
        defects = sv.detect_defects(disk_run.field, default_params, 0.1, table)
        assert not any(d.touches_boundary for d in defects)
        assert len(defects) in (1, 2)
        assert sum(d.degree for d in defects) == 1

    def test_defect_count_stable_across_seeds(
        self, disk_fine, default_params, table
    ):
        p = default_params
        bd = well_matched_data(disk_fine, p)
        counts = []
        for seed in (0, 1, 2):
            rng = np.random.default_rng(seed)
            f0 = sv.make_field(disk_fine, bd, init="taper")
            pert = 0.01 * rng.standard_normal(f0.values.shape)
            f0.values = np.where(f0.pinned[..., None], f0.values, f0.values + pert)
            res = sv.minimize(
                f0, p, sv.SolveConfig(eps=0.1, max_iters=2500, grad_tol=1e-4)
            )
            ds = sv.detect_defects(res.field, p, 0.1, table)
            counts.append((len(ds), sum(d.degree for d in ds)))
        assert len(set(counts)) == 1
        assert counts[0][1] == 1

    def test_boundary_touching_cluster_flagged(self, disk16, default_params, table):
        p = default_params
        f = well_constant_field(disk16, p)
        # hot blob hugging the rim: too close for a surrounding loop
        xx, yy = disk16.cell_centers
        blob = disk16.mask & (np.hypot(xx - 0.9, yy) < 0.15)
        f.values[blob] = p.wells.components[1].representative
        defects = sv.detect_defects(f, p, 0.1, table)
        assert len(defects) == 1
        assert defects[0].touches_boundary
        assert defects[0].degree is None


class TestLambda:
    def test_self_distance_zero(self, disk16, default_params, table):
        f = well_constant_field(disk16, default_params)
        assert sv.lambda_distance(f, f, default_params, table) == 0.0

    def test_symmetry_and_nonnegative(self, disk16, default_params, table, rng):
        p = default_params
        bd = dm.make_boundary_data(disk16, "g2", p.beta, winding=1)
        f1 = smooth_test_field(disk16, bd, amp=0.2)
        f2 = smooth_test_field(disk16, bd, amp=0.5)
        d12 = sv.lambda_distance(f1, f2, p, table)
        d21 = sv.lambda_distance(f2, f1, p, table)
        assert d12 == d21
        assert d12 > 0

    def test_triangle_inequality(self, disk16, default_params, table):
        p = default_params
        bd = dm.make_boundary_data(disk16, "g2", p.beta, winding=1)
        f1 = smooth_test_field(disk16, bd, amp=0.1)
        f2 = smooth_test_field(disk16, bd, amp=0.35)
        f3 = smooth_test_field(disk16, bd, amp=0.6)
        d13 = sv.lambda_distance(f1, f3, p, table)
        d12 = sv.lambda_distance(f1, f2, p, table)
        d23 = sv.lambda_distance(f2, f3, p, table)
        assert d13 <= d12 + d23 + 1e-12

    def test_same_well_labels_vanish(self, disk16, default_params, table):
        # both fields valued in well 1 (different points on the circle)
        p = default_params
        f1 = well_constant_field(disk16, p)
        f2 = f1.copy()
        f2.values = qt.rotate_z(f2.values, 1.0)
        area = disk16.mask.sum() * disk16.h**2
        assert sv.lambda_distance(f1, f2, p, table) < 0.02 * area


class TestLambdaBall:
    def test_mu_zero_matches_unconstrained(self, disk16, default_params, table):
        p = default_params
        bd = dm.make_boundary_data(disk16, "g2", p.beta, winding=1)
        f0 = sv.make_field(disk16, bd, init="taper")
        cfg = sv.SolveConfig(eps=0.2, max_iters=200, grad_tol=1e-5)
        plain = sv.minimize(f0, p, cfg)
        ball = sv.LambdaBall(center=f0, delta=1e-3, mu=0.0)
        res = sv.local_minimize_in_lambda_ball(ball, p, cfg, table=table)
        assert np.array_equal(res.field.values, plain.field.values)

    def test_large_delta_matches_unconstrained(self, disk16, default_params, table):
        p = default_params
        bd = dm.make_boundary_data(disk16, "g2", p.beta, winding=1)
        f0 = sv.make_field(disk16, bd, init="taper")
        cfg = sv.SolveConfig(eps=0.2, max_iters=200, grad_tol=1e-5)
        plain = sv.minimize(f0, p, cfg)
        ball = sv.LambdaBall(center=f0, delta=1e9, mu=1e3)
        res = sv.local_minimize_in_lambda_ball(ball, p, cfg, table=table)
        assert np.array_equal(res.field.values, plain.field.values)
        assert res.interior

    def test_restart_from_minimizer_stays_interior(
        self, disk16, default_params, table
    ):
        p = default_params
        bd = dm.make_boundary_data(disk16, "g2", p.beta, winding=1)
        cfg = sv.SolveConfig(eps=0.2, max_iters=300, grad_tol=1e-5)
        center = sv.minimize(sv.make_field(disk16, bd, init="taper"), p, cfg).field
        ball = sv.LambdaBall(center=center, delta=0.5, mu=1e3)
        res = sv.local_minimize_in_lambda_ball(ball, p, cfg, table=table)
        assert res.interior
        assert res.lambda_final < 0.1


class TestDumps:
    def test_field_and_trace_csv(self, tmp_path, disk16, default_params, table):
        p = default_params
        bd = dm.make_boundary_data(disk16, "g2", p.beta, winding=1)
        f0 = sv.make_field(disk16, bd, init="taper")
        res = sv.minimize(f0, p, sv.SolveConfig(eps=0.2, max_iters=50, grad_tol=1e-5))
        fpath = tmp_path / "field.csv"
        tpath = tmp_path / "trace.csv"
        sv.dump_field_csv(res.field, p, fpath, table)
        sv.dump_trace_csv(res.trace, tpath)
        rows = np.genfromtxt(fpath, delimiter=",", names=True)
        assert len(rows) == disk16.mask.sum()
        assert set(rows.dtype.names) >= {"i", "j", "x", "y", "q1", "w", "phi1", "phi2"}
        tr = np.genfromtxt(tpath, delimiter=",", names=True)
        assert len(np.atleast_1d(tr)) == len(res.trace)
