"""Figure jobs: turn solver/experiments CSV artifacts into images.

Kinds:
    energy_vs_eps     energies.csv -> E(eps) on a log-x axis
    field_map         field.csv [+ defects.csv] -> director-angle hue,
                      order-parameter brightness, defect markers
    geodesic_profile  geodesic.csv -> tensor coordinates along the path
    partition_diagram boundary.csv + interface.csv -> domain outline
                      with the interface dashed
    fit_overlay       energies.csv + fit.csv -> data, fitted curve, and
                      target curve
"""

import csv
import os
from dataclasses import dataclass, field

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.colors import hsv_to_rgb  # noqa: E402

KINDS = (
    "energy_vs_eps",
    "field_map",
    "geodesic_profile",
    "partition_diagram",
    "fit_overlay",
)


class FigureError(RuntimeError):
    """A job cannot be rendered (bad inputs, malformed CSV)."""


@dataclass
class FigureJob:
    inputs: list
    kind: str
    output: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind '{self.kind}'")
        if not self.inputs:
            raise FigureError("at least one input CSV is required")
        for path in self.inputs:
            if not os.path.exists(path):
                raise FigureError(f"input '{path}' does not exist")


def read_csv(path, required):
    """Load a CSV with a header row; check required columns and
    non-emptiness."""
    with open(path, newline="") as fp:
        reader = csv.reader(fp)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureError(f"'{path}': missing header row")
        rows = [r for r in reader if r]
    for col in required:
        if col not in header:
            raise FigureError(f"'{path}': missing column '{col}'")
    if not rows:
        raise FigureError(f"'{path}': no data rows")
    out = {}
    for col in header:
        j = header.index(col)
        vals = []
        for r in rows:
            tok = r[j] if j < len(r) else ""
            try:
                vals.append(float(tok) if tok != "" else np.nan)
            except ValueError:
                vals.append(np.nan)
        out[col] = np.array(vals)
    return out


def _save(fig, path):
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def _energy_vs_eps(job):
    data = read_csv(job.inputs[0], ["eps", "energy"])
    order = np.argsort(data["eps"])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(data["eps"][order], data["energy"][order], "o-", color="tab:blue")
    ax.set_xscale("log")
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel(r"$E_\varepsilon$")
    ax.grid(True, alpha=0.3)
    _save(fig, job.output)


def _field_map(job):
    data = read_csv(job.inputs[0], ["i", "j", "x", "y", "q2", "q3"])
    i = data["i"].astype(int)
    j = data["j"].astype(int)
    ny, nx = i.max() + 1, j.max() + 1
    # director angle is half the (q2, q3) phase; doubling it back before
    # the hue mapping respects the nematic head-tail symmetry
    phase = np.arctan2(data["q3"], data["q2"])  # = 2 * director angle
    s = np.hypot(data["q2"], data["q3"])
    hue = np.full((ny, nx), 0.0)
    val = np.zeros((ny, nx))
    inside = np.zeros((ny, nx), dtype=bool)
    hue[i, j] = (phase % (2 * np.pi)) / (2 * np.pi)
    smax = s.max() if s.max() > 0 else 1.0
    val[i, j] = s / smax
    inside[i, j] = True
    hsv = np.stack([hue, np.where(inside, 1.0, 0.0), np.where(inside, val, 1.0)], axis=-1)
    rgb = hsv_to_rgb(hsv)
    fig, ax = plt.subplots(figsize=(5, 5))
    extent = [data["x"].min(), data["x"].max(), data["y"].min(), data["y"].max()]
    ax.imshow(rgb, origin="lower", extent=extent)
    if len(job.inputs) > 1:
        defects = read_csv(job.inputs[1], ["ci", "cj", "degree"])
        h = (extent[1] - extent[0]) / max(nx - 1, 1)
        xs = extent[0] + defects["cj"] * h
        ys = extent[2] + defects["ci"] * h
        ax.plot(xs, ys, "wo", markersize=9, markeredgecolor="k")
        for x, y, d in zip(xs, ys, defects["degree"]):
            label = "?" if np.isnan(d) else f"{d:+.1f}"
            ax.annotate(label, (x, y), color="k", fontsize=7,
                        ha="center", va="center")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    _save(fig, job.output)


def _geodesic_profile(job):
    cols = ["node", "q1", "q2", "q3", "q4", "q5"]
    data = read_csv(job.inputs[0], cols)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for c in cols[1:]:
        ax.plot(data["node"], data[c], label=c)
    ax.set_xlabel("node")
    ax.set_ylabel("coordinate")
    ax.legend(ncol=3, fontsize=8)
    ax.grid(True, alpha=0.3)
    _save(fig, job.output)


def _partition_diagram(job):
    boundary = read_csv(job.inputs[0], ["x", "y"])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    bx = np.append(boundary["x"], boundary["x"][0])
    by = np.append(boundary["y"], boundary["y"][0])
    ax.plot(bx, by, "-", color="k", lw=1.2)
    if len(job.inputs) > 1:
        iface = read_csv(job.inputs[1], ["x", "y"])
        # dashed: the interface portion of the partition boundary
        ax.plot(iface["x"], iface["y"], "--", color="tab:red", lw=1.5)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    _save(fig, job.output)


def _fit_overlay(job):
    data = read_csv(job.inputs[0], ["eps", "energy"])
    fit = read_csv(job.inputs[1], ["coefficient", "value"])
    with open(job.inputs[1], newline="") as fp:
        rows = list(csv.DictReader(fp))
    coefs = {r["coefficient"]: r for r in rows}
    for name in ("A", "B", "C"):
        if name not in coefs:
            raise FigureError(f"'{job.inputs[1]}': missing coefficient '{name}'")
    a, b, c = (float(coefs[k]["value"]) for k in ("A", "B", "C"))

    def model(eps, aa, bb, cc):
        return aa + bb * eps * np.log(1.0 / eps) + cc * eps

    order = np.argsort(data["eps"])
    eps = data["eps"][order]
    energy = data["energy"][order]
    dense = np.geomspace(eps.min(), eps.max(), 200)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(eps, energy, "o", color="tab:blue", label="data")
    ax.plot(dense, model(dense, a, b, c), "-", color="tab:orange", label="fit")
    ta = coefs["A"].get("target", "")
    tb = coefs["B"].get("target", "")
    if ta and tb:
        ax.plot(
            dense,
            model(dense, float(ta), float(tb), c),
            ":",
            color="tab:green",
            label="target",
        )
    ax.set_xscale("log")
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel(r"$E_\varepsilon$")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _save(fig, job.output)
    return float(np.max(np.abs(energy - model(eps, a, b, c))))


_RENDERERS = {
    "energy_vs_eps": _energy_vs_eps,
    "field_map": _field_map,
    "geodesic_profile": _geodesic_profile,
    "partition_diagram": _partition_diagram,
    "fit_overlay": _fit_overlay,
}


def plot(job):
    """Render a job to its output image.

    Returns the maximum plotted residual for fit_overlay jobs, None
    otherwise.
    """
    return _RENDERERS[job.kind](job)
