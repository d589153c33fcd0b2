"""Command-line entry point.

Verbs:
    run         execute a sweep scenario from a config file
    fit         least-squares asymptotic fit of a sweep's energies.csv
    gamma-check strip interface-energy consistency report
    dumbbell    candidate partition, calibration gap, perturbation battery
    geodesic    inter-well geodesic path and distance
    wells       calibrated zero-set summary
    version     print the package version

Flags: --config PATH, --out DIR, --seed N, --threads N, --quiet.
Exit codes: 0 success, 2 config/input error, 3 non-convergence.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from . import domain as dmn
from . import experiments as xp
from . import gamma as gm
from . import metric
from . import potential as pot
from . import qtensor as qt
from . import solver as sv
from .errors import ConfigError, InputError, NumericalError


def _parser():
    ap = argparse.ArgumentParser(
        prog="nematicfilm", description="thin-film nematic scenario runner"
    )
    sub = ap.add_subparsers(dest="verb", required=True)
    verbs = ["run", "fit", "gamma-check", "dumbbell", "geodesic", "wells", "version"]
    for verb in verbs:
        sp = sub.add_parser(verb)
        sp.add_argument("--config", default=None, help="scenario config file")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--quiet", action="store_true")
    return ap


def _default_params(args):
    """Calibrated potential: from --config's [potential] section when
    given, otherwise the desk defaults."""
    if args.config:
        scn = xp.scenario_from_config(args.config)
        p = scn.params
    else:
        p = pot.PotentialParams(
            a=-1.0, b=-4.0, c=4.0, beta=-0.1, gamma_s=4.0, variant="reduced"
        )
    pot.calibrate_wmin(p, seed=0)
    return p


def _need_out(args):
    if args.out is None:
        print("config error: --out DIR is required for this verb")
        raise SystemExit(2)
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _cmd_run(args):
    if args.config is None:
        print("config error: --config PATH is required for 'run'")
        return 2
    return xp.run_scenario(
        args.config,
        out_dir=args.out,
        seed=args.seed,
        threads=args.threads,
        quiet=args.quiet,
    )


def _cmd_fit(args):
    out = _need_out(args)
    energies_path = os.path.join(out, "energies.csv")
    if not os.path.exists(energies_path):
        print(f"config error: '{energies_path}' not found (run a sweep first)")
        return 2
    eps, energy = xp.load_energies_csv(energies_path)
    targets = None
    if args.config:
        scn = xp.scenario_from_config(args.config)
        pot.calibrate_wmin(scn.params, seed=0)
        if scn.domain_kind == "disk":
            perim = 2 * np.pi * scn.geometry["radius"]
            if scn.bc_variant == "g2":
                g = qt.uniaxial(-3.0 * scn.bc_beta, np.array([1.0, 0.0, 0.0]))
            else:
                g = qt.uniaxial(1.5 * scn.bc_beta, qt.ZHAT)
            k = int(round(2 * scn.winding))  # twice the loop degree
            targets = xp.asymptotic_targets(scn.params, g, perim, k)
    fit = xp.fit_asymptotics(eps, energy, targets)
    fit.to_csv(os.path.join(out, "fit.csv"))
    if not args.quiet:
        print(f"A={fit.a:.6g} B={fit.b:.6g} C={fit.c:.6g} residual={fit.residual:.3g}")
        if fit.target_a is not None:
            print(f"rel_dev_A={fit.rel_dev_a:.4g} rel_dev_B={fit.rel_dev_b:.4g}")
    return 0


def _cmd_gamma_check(args):
    out = _need_out(args)
    p = _default_params(args)
    report = xp.gamma_consistency(p, quiet=args.quiet)
    report.to_csv(os.path.join(out, "gamma_report.csv"))
    if not args.quiet:
        print(f"gamma-check: {'PASS' if report.passed else 'FAIL'}")
    return 0 if report.converged else 3


def _cmd_dumbbell(args):
    out = _need_out(args)
    p = _default_params(args)
    costs = gm.costs_from_metric(p)
    spec = gm.default_dumbbell_spec(costs)
    dom, P, Q, _ = dmn.make_dumbbell(spec, 0.04)
    candidate = gm.dumbbell_candidate(dom, spec, P, Q)
    _, delta = gm.admissible_delta_range(
        costs, spec.neck_convexity, 2 * spec.junction()
    )
    report = gm.perturbation_test(
        candidate, costs, spec, delta, trials=200, seed=args.seed or 0
    )
    report.to_csv(os.path.join(out, "perturbations.csv"))
    dmn_boundary = os.path.join(out, "boundary.csv")
    dmn.dump_boundary_csv(dom, dmn_boundary)
    with open(os.path.join(out, "interface.csv"), "w") as fp:
        fp.write("x,y\n")
        for k, coords in enumerate(gm.interface_polyline(candidate)):
            if k:
                fp.write("nan,nan\n")
            for x, y in coords:
                fp.write(f"{x:.17g},{y:.17g}\n")
    with open(os.path.join(out, "dumbbell.txt"), "w") as fp:
        fp.write(f"c1: {costs.c1:.17g}\n")
        fp.write(f"c2: {costs.c2:.17g}\n")
        fp.write(f"c3: {costs.c3:.17g}\n")
        fp.write(f"x0: {spec.x0:.17g}\n")
        fp.write(f"delta: {delta:.17g}\n")
        fp.write(f"f0_candidate: {gm.f0(candidate, costs):.17g}\n")
        fp.write(f"battery: {'PASS' if report.passed else 'FAIL'}\n")
    if not args.quiet:
        print(f"dumbbell battery: {'PASS' if report.passed else 'FAIL'}")
    return 0 if report.passed else 3


def _cmd_geodesic(args):
    out = _need_out(args)
    p = _default_params(args)
    wells = p.wells.components
    path, d = metric.geodesic(wells[0], wells[1], p)
    with open(os.path.join(out, "geodesic.csv"), "w") as fp:
        fp.write("node,q1,q2,q3,q4,q5\n")
        for k, node in enumerate(path.nodes):
            fp.write(f"{k}," + ",".join(f"{v:.17g}" for v in node) + "\n")
    with open(os.path.join(out, "geodesic.txt"), "w") as fp:
        fp.write(f"distance: {d:.17g}\n")
    if not args.quiet:
        print(f"d(P1, P2) = {d:.6g}")
    return 0


def _cmd_wells(args):
    out = _need_out(args)
    p = _default_params(args)
    with open(os.path.join(out, "wells.csv"), "w") as fp:
        fp.write("component,kind,q1,q2,q3,q4,q5\n")
        for k, well in enumerate(p.wells.components):
            rep = ",".join(f"{v:.17g}" for v in well.representative)
            fp.write(f"{k + 1},{well.kind},{rep}\n")
    with open(os.path.join(out, "wells.txt"), "w") as fp:
        fp.write(f"s_star: {pot.s_star(p).value:.17g}\n")
        fp.write(f"w_min: {p.w_min:.17g}\n")
        fp.write(f"components: {p.wells.count}\n")
    if not args.quiet:
        print(f"{p.wells.count} well components, s* = {pot.s_star(p).value:.6g}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "fit": _cmd_fit,
    "gamma-check": _cmd_gamma_check,
    "dumbbell": _cmd_dumbbell,
    "geodesic": _cmd_geodesic,
    "wells": _cmd_wells,
}


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.verb == "version":
        print(__version__)
        return 0
    try:
        return _COMMANDS[args.verb](args)
    except SystemExit as exc:
        return exc.code
    except (ConfigError, InputError) as exc:
        print(f"config error: {exc}")
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
