import os

import numpy as np
import pytest

from nematicfilm import cli
from nematicfilm import domain as dm
from nematicfilm import experiments as xp
from nematicfilm import gamma as gm
from nematicfilm import metric
from nematicfilm import potential as pot
from nematicfilm import qtensor as qt
from nematicfilm import solver as sv
from nematicfilm.errors import ConfigError, InputError, NumericalError

GOOD_CONFIG = """
[scenario]
name = smoke
seed = 0

[potential]
a = -1.0
b = -4.0
c = 4.0
gamma_s = 4.0
beta = -0.1
variant = reduced

[domain]
kind = disk
radius = 1.0

[boundary]
variant = g2
winding = 1
beta = -0.2

[solver]
max_iters = 600
grad_tol = 5e-3

[sweep]
eps_list = 0.2,0.15
"""


def write_config(tmp_path, text, name="scn.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestScenarioConfig:
    def test_parse(self, tmp_path):
        scn = xp.scenario_from_config(write_config(tmp_path, GOOD_CONFIG))
        assert scn.name == "smoke"
        assert scn.domain_kind == "disk"
        assert scn.eps_list == (0.2, 0.15)
        assert scn.bc_beta == -0.2
        assert scn.winding == 1
        assert scn.solve.max_iters == 600

    def test_missing_key_named(self, tmp_path):
        text = GOOD_CONFIG.replace("a = -1.0\n", "")
        with pytest.raises(ConfigError, match="potential.a"):
            xp.scenario_from_config(write_config(tmp_path, text))

    def test_missing_winding_named(self, tmp_path):
        text = GOOD_CONFIG.replace("winding = 1\n", "")
        with pytest.raises(ConfigError, match="boundary.winding"):
            xp.scenario_from_config(write_config(tmp_path, text))

    def test_bad_value(self, tmp_path):
        text = GOOD_CONFIG.replace("radius = 1.0", "radius = wide")
        with pytest.raises(ConfigError, match="domain.radius"):
            xp.scenario_from_config(write_config(tmp_path, text))

    def test_eps_must_decrease(self, tmp_path):
        text = GOOD_CONFIG.replace("eps_list = 0.2,0.15", "eps_list = 0.15,0.2")
        with pytest.raises(ConfigError):
            xp.scenario_from_config(write_config(tmp_path, text))

    def test_unknown_domain(self, tmp_path):
        text = GOOD_CONFIG.replace("kind = disk", "kind = torus")
        with pytest.raises(ConfigError):
            xp.scenario_from_config(write_config(tmp_path, text))

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            xp.scenario_from_config("/nonexistent/scn.ini")

    def test_geometric_sweep_default(self, tmp_path):
        text = GOOD_CONFIG.replace(
            "eps_list = 0.2,0.15", "eps_start = 0.2\neps_stop = 0.025\nn_eps = 6"
        )
        scn = xp.scenario_from_config(write_config(tmp_path, text))
        assert len(scn.eps_list) == 6
        ratios = np.diff(np.log(scn.eps_list))
        assert np.allclose(ratios, ratios[0])


class TestRunScenario:
    def test_missing_key_exit_2(self, tmp_path, capsys):
        path = write_config(tmp_path, GOOD_CONFIG.replace("b = -4.0\n", ""))
        code = xp.run_scenario(path, out_dir=str(tmp_path / "out"))
        assert code == 0 + 2
        assert "potential.b" in capsys.readouterr().out

    def test_smoke_artifacts(self, tmp_path):
        path = write_config(tmp_path, GOOD_CONFIG)
        out = str(tmp_path / "out")
        code = xp.run_scenario(path, out_dir=out, quiet=True)
        assert code in (0, 3)
        assert os.path.exists(os.path.join(out, "energies.csv"))
        assert os.path.exists(os.path.join(out, "manifest.txt"))
        eps, energy = xp.load_energies_csv(os.path.join(out, "energies.csv"))
        assert list(eps) == [0.2, 0.15]
        assert np.all(energy > 0)
        run0 = os.path.join(out, "run_00_eps_0.2")
        for name in ("field.csv", "trace.csv", "defects.csv"):
            assert os.path.getsize(os.path.join(run0, name)) > 0
        manifest = open(os.path.join(out, "manifest.txt")).read()
        assert "config_sha256:" in manifest
        assert "seed: 0" in manifest

    def test_determinism_byte_identical(self, tmp_path):
        path = write_config(tmp_path, GOOD_CONFIG)
        outs = [str(tmp_path / f"out{k}") for k in (1, 2)]
        for out in outs:
            assert xp.run_scenario(path, out_dir=out, quiet=True) in (0, 3)
        for root, _, files in os.walk(outs[0]):
            for name in files:
                a = os.path.join(root, name)
                b = a.replace(outs[0], outs[1], 1)
                assert open(a, "rb").read() == open(b, "rb").read(), name


class TestAsymptoticFit:
    def test_exact_recovery(self):
        eps = np.geomspace(0.2, 0.02, 6)
        energy = 1.0 + np.pi * eps * np.log(1.0 / eps) + 0.3 * eps
        fit = xp.fit_asymptotics(eps, energy, targets=(1.0, np.pi))
        assert abs(fit.a - 1.0) < 1e-8
        assert abs(fit.b - np.pi) < 1e-8
        assert abs(fit.c - 0.3) < 1e-8
        assert fit.rel_dev_a < 1e-8
        assert fit.rel_dev_b < 1e-8

    def test_row_order_invariance(self, rng):
        eps = np.geomspace(0.2, 0.02, 8)
        energy = 0.5 + 2.0 * eps * np.log(1.0 / eps) - 0.1 * eps
        energy += 1e-3 * rng.standard_normal(8)
        ref = xp.fit_asymptotics(eps, energy)
        perm = rng.permutation(8)
        shuffled = xp.fit_asymptotics(eps[perm], energy[perm])
        assert np.allclose(
            [shuffled.a, shuffled.b, shuffled.c], [ref.a, ref.b, ref.c], rtol=1e-10
        )

    def test_too_few_points(self):
        eps = np.array([0.2, 0.1, 0.02])
        with pytest.raises(InputError):
            xp.fit_asymptotics(eps, np.ones(3))

    def test_narrow_span(self):
        eps = np.array([0.2, 0.15, 0.1, 0.05])
        with pytest.raises(InputError):
            xp.fit_asymptotics(eps, np.ones(4))

    def test_rank_deficient(self):
        eps = np.array([0.2, 0.2, 0.02, 0.02])
        with pytest.raises(NumericalError):
            xp.fit_asymptotics(eps, np.ones(4))

    def test_fit_csv(self, tmp_path):
        eps = np.geomspace(0.2, 0.02, 5)
        fit = xp.fit_asymptotics(eps, 1.0 + eps, targets=(1.0, 0.5))
        path = tmp_path / "fit.csv"
        fit.to_csv(str(path))
        rows = path.read_text().strip().split("\n")
        assert rows[0] == "coefficient,value,target,rel_deviation"
        assert len(rows) == 5

    def test_targets(self, default_params):
        g = qt.uniaxial(0.3, np.array([1.0, 0.0, 0.0]))
        a_star, b_star = xp.asymptotic_targets(default_params, g, 2 * np.pi, 1)
        phi1 = metric.phi(1, g, default_params)
        sstar = pot.s_star(default_params).value
        assert abs(a_star - 2 * phi1 * 2 * np.pi) < 1e-12
        assert abs(b_star - np.pi * sstar**2) < 1e-12


class TestEnergiesCsv:
    def test_empty_rows(self, tmp_path):
        path = tmp_path / "energies.csv"
        path.write_text(
            "eps,h,energy,iterations,grad_norm,converged,n_defects,degree_sum,gap\n"
        )
        with pytest.raises(InputError, match="no data rows"):
            xp.load_energies_csv(str(path))


class TestStripData:
    def test_endpoints_in_wells(self, default_params):
        dom = dm.make_strip(2.0, 1.0, 0.05)
        bd = xp.two_well_strip_data(dom, default_params, 1.0, width=0.2)
        wvals = pot.w(bd.values, default_params)
        far = np.abs(dom.boundary[:, 0] - 1.0) > 0.15
        assert np.max(wvals[far]) < 1e-8
        assert bd.values.shape == (len(dom.boundary), 5)

    def test_sides_near_respective_wells(self, default_params):
        dom = dm.make_strip(2.0, 1.0, 0.05)
        bd = xp.two_well_strip_data(dom, default_params, 1.0, width=0.2)
        table = sv.phi_table(default_params)
        phi1 = table.query(bd.values, 1)
        phi2 = table.query(bd.values, 2)
        left = dom.boundary[:, 0] < 0.8
        right = dom.boundary[:, 0] > 1.2
        # the table is bilinear, so exact well points read back a small
        # interpolation residue
        assert np.max(phi1[left]) < 1e-3
        assert np.max(phi2[right]) < 1e-3

    def test_boundary_term_positive(self, default_params):
        dom = dm.make_strip(2.0, 1.0, 0.05)
        bd = xp.two_well_strip_data(dom, default_params, 1.0, width=0.2)
        table = sv.phi_table(default_params)
        term = xp._boundary_term(dom, bd, table)
        assert 0 < term < 1.0


class TestLiftedCenter:
    def test_pinned_and_regions(self, default_params):
        p = default_params
        costs = gm.costs_from_metric(p)
        spec = gm.default_dumbbell_spec(costs)
        dom, P, Q, _ = dm.make_dumbbell(spec, 0.08)
        candidate = gm.dumbbell_candidate(dom, spec, P, Q)
        bd = dm.make_boundary_data(dom, "g2", p.beta, winding=0)
        wells = p.wells.components
        g_rep = qt.uniaxial(-3.0 * p.beta, np.array([1.0, 0.0, 0.0]))
        reps = {
            1: metric.well_project(wells[0], g_rep),
            2: wells[1].representative,
        }
        center = xp.lifted_center(dom, candidate, reps, bd, eps=0.1)
        ref = sv.make_field(dom, bd, init="boundary")
        assert np.array_equal(center.values[center.pinned], ref.values[ref.pinned])
        xx, yy = dom.cell_centers
        deep = dom.mask & (dom.signed_distance > 0.35)
        left = deep & (xx < spec.x0 - 0.2)
        right = deep & (xx > spec.x0 + 0.2)
        assert np.max(np.abs(center.values[left] - reps[1])) < 1e-12
        assert np.max(np.abs(center.values[right] - reps[2])) < 1e-12


class TestSurfaceDecay:
    def test_requires_full_variant(self, default_params):
        with pytest.raises(InputError):
            xp.surface_decay(default_params)


class TestCli:
    def test_version(self, capsys):
        assert cli.main(["version"]) == 0
        out = capsys.readouterr().out.strip()
        assert out.count(".") == 2

    def test_run_requires_config(self, capsys):
        assert cli.main(["run"]) == 2

    def test_run_bad_config_exit_2(self, tmp_path, capsys):
        path = write_config(tmp_path, GOOD_CONFIG.replace("c = 4.0\n", ""))
        assert cli.main(["run", "--config", path, "--out", str(tmp_path)]) == 2
        assert "potential.c" in capsys.readouterr().out

    def test_fit_without_energies_exit_2(self, tmp_path):
        assert cli.main(["fit", "--out", str(tmp_path)]) == 2

    def test_fit_from_csv(self, tmp_path, capsys):
        eps = np.geomspace(0.2, 0.02, 6)
        energy = 1.0 + np.pi * eps * np.log(1.0 / eps) + 0.3 * eps
        with open(tmp_path / "energies.csv", "w") as fp:
            fp.write(
                "eps,h,energy,iterations,grad_norm,converged,"
                "n_defects,degree_sum,gap\n"
            )
            for e, en in zip(eps, energy):
                fp.write(f"{e:.17g},0.01,{en:.17g},10,1e-5,1,0,0,nan\n")
        assert cli.main(["fit", "--out", str(tmp_path), "--quiet"]) == 0
        assert os.path.getsize(tmp_path / "fit.csv") > 0
