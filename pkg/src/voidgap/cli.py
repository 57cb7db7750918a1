"""Command-line front end: ``voidgap <command> --config run.cfg --out DIR``."""
from __future__ import annotations

import math
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .cell_oracle import compute_bands, fit_epsilon_cubed
from .config import RunConfig, load_config
from .cross_modes import ModeSet, analytic_cross_modes, solve_cross_modes
from .dispersion import band_table, gap_precondition
from .errors import ConfigParse, GapNotPredicted, VoidGapError
from .gap_asymptotics import (correction_near_pi, coupling_coefficients, gap_interval)
from .virtual_mass import VirtualMassTensor, analytic_virtual_mass, compute_virtual_mass


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _header(cfg: RunConfig, title: str) -> list[str]:
    lines = [f"voidgap {__version__}: {title}", "configuration:"]
    lines += ["  " + line for line in cfg.to_text().splitlines()]
    return lines


def write_csv(path: Path, cfg: RunConfig, title: str, columns: list[str], rows) -> Path:
    """CSV with a ``#`` reproducibility header and 17-significant-digit numbers."""
    with open(path, "w", newline="\n") as fh:
        for line in _header(cfg, title):
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_text(path: Path, cfg: RunConfig, title: str, body: list[str]) -> Path:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(_header(cfg, title) + [""] + body) + "\n")
    return path


def _matrix_lines(name: str, M) -> list[str]:
    M = np.atleast_2d(np.asarray(M))
    return [f"{name} ="] + ["  " + "  ".join("%.17g" % x for x in row) for row in M]


# ---------------------------------------------------------------------------
# pipeline pieces
# ---------------------------------------------------------------------------

def _cross_bc(cfg: RunConfig) -> str:
    return "neumann" if cfg.bc() == "neumann" else "dirichlet"


def run_modes(cfg: RunConfig) -> ModeSet:
    cs = cfg.cross_section()
    if cfg["numeric.modes_method"] == "analytic":
        return analytic_cross_modes(cs, _cross_bc(cfg), cfg["numeric.mode_count"])
    return solve_cross_modes(cs, _cross_bc(cfg), cfg["numeric.mode_count"], cfg["numeric.mode_h"],
                             extrapolate=cfg["numeric.extrapolate"])


def run_vmass(cfg: RunConfig) -> VirtualMassTensor:
    void = cfg.void()
    if cfg["numeric.vmass_method"] == "analytic":
        return analytic_virtual_mass(void)
    return compute_virtual_mass(void, cfg["numeric.mesh_level"])


def modes_outputs(cfg: RunConfig, ms: ModeSet, out: Path) -> list[Path]:
    err = ms.error_estimate if ms.error_estimate is not None else [math.nan] * ms.count
    rows = [(q + 1, ms.eigenvalues[q], err[q]) for q in range(ms.count)]
    return [write_csv(out / "modes.csv", cfg, f"cross-section eigenvalues ({ms.bc_kind})",
                      ["q", "M_q", "error_estimate"], rows)]


def vmass_outputs(cfg: RunConfig, T: VirtualMassTensor, out: Path) -> list[Path]:
    body = _matrix_lines("Q", T.q) + _matrix_lines("Q_tilde", T.q_tilde) \
        + _matrix_lines("Q_upper_left", T.upper_left_block)
    body += [
        "eigenvalues(Q) = " + "  ".join("%.17g" % x for x in np.linalg.eigvalsh(T.q)),
        "eigenvalues(Q_tilde) = " + "  ".join("%.17g" % x for x in np.linalg.eigvalsh(T.q_tilde)),
        "void_volume = %.17g" % T.volume,
        "asymmetry_before_symmetrization = %.3e" % T.asymmetry,
        f"mesh_level = {T.mesh_level if T.mesh_level is not None else 'closed form'}",
    ]
    if T.n_faces is not None:
        body.append(f"surface_faces = {T.n_faces}")
    if T.condition is not None:
        body.append("condition_estimate = %.3e" % T.condition)
    return [write_text(out / "vmass.txt", cfg, "virtual-mass tensor", body)]


def gap_outputs(cfg: RunConfig, ms: ModeSet, T: VirtualMassTensor, out: Path,
                plots: bool) -> list[Path]:
    cs, void = cfg.cross_section(), cfg.void()
    cc = coupling_coefficients(cfg.bc(), ms, T, void, cfg.center(), cs)
    eps = cfg["numeric.eps"]
    holds, margin = gap_precondition(ms)
    body = ["coefficients:"]
    body += [f"  {k} = {v}" for k, v in cc.provenance().items()]
    body += ["F0 = %.17g" % cc.f0, "F1 = %.17g%+.17gj" % (cc.f1.real, cc.f1.imag),
             "abs_F1 = %.17g" % cc.abs_f1, "",
             "precondition M1 + pi^2 < M2: %s (margin %.17g)" % (holds, margin)]
    c0 = cfg["numeric.c0"]
    try:
        rep = gap_interval(cc, ms, eps, eigen_resolution=cfg["numeric.eigen_resolution"],
                           c0=None if math.isnan(c0) else c0)
        body += ["status = GapPredicted", "branch labelling: by value, lower <= upper"]
        body += [f"{k} = {_fmt(v)}" for k, v in rep.as_dict().items()]
        body.append("error_budget is c0 * eps^3.5 with a heuristic c0 (remainder constant unknown)")
        if not rep.within_validity_range:
            body.append("warning: eps^3 corrections exceed 10% of the band spacing")
    except GapNotPredicted as exc:
        body += ["status = GapNotPredicted", f"reason = {exc}"]
    files = [write_text(out / "gap_report.txt", cfg, f"predicted first gap at eps = {eps:g}", body)]

    psi = np.linspace(-cfg["numeric.psi_max"], cfg["numeric.psi_max"], cfg["numeric.psi_points"])
    pairs = [correction_near_pi(p, cc)[:2] for p in psi]
    lower = np.array([p[0] for p in pairs])
    upper = np.array([p[1] for p in pairs])
    files.append(write_csv(out / "near_pi.csv", cfg, "corrections near eta = pi",
                           ["psi", "lower", "upper"], zip(psi, lower, upper)))
    if plots:
        from .plotting import plot_near_pi
        files.append(plot_near_pi(psi, lower, upper, cc.f0, out / "near_pi.png"))
    return files


def unperturbed_outputs(cfg: RunConfig, ms: ModeSet, out: Path, plots: bool) -> list[Path]:
    etas = cfg.eta_grid()
    k = cfg["numeric.bands"]
    vals, qs, mm = band_table(ms, etas, k)
    cols = ["eta"] + [f"lambda_{i + 1}" for i in range(k)] \
        + [f"q_{i + 1}" for i in range(k)] + [f"m_{i + 1}" for i in range(k)]
    rows = [(e, *vals[i], *qs[i], *mm[i]) for i, e in enumerate(etas)]
    files = [write_csv(out / "unperturbed.csv", cfg, "unperturbed lattice values with (q, m) labels",
                       cols, rows)]
    if plots:
        from .plotting import plot_dispersion
        fine = np.linspace(0, 2 * math.pi, 401, endpoint=False)
        fv, _, _ = band_table(ms, fine, k)
        files.append(plot_dispersion(fine, fv, out / "unperturbed.png",
                                     crossing=float(ms.eigenvalues[0]) + math.pi ** 2))
    return files


def perturbed_outputs(cfg: RunConfig, out: Path, threads: int, plots: bool,
                      predicted: tuple[float, float] | None = None) -> list[Path]:
    geom = cfg.cell()
    etas = cfg.eta_grid()
    k = cfg["numeric.bands"]
    bands = compute_bands(geom, etas, k, cfg["numeric.cell_h"], threads=threads)
    cols = ["eta", "epsilon"] + [f"lambda_{i + 1}" for i in range(k)]
    rows = [(e, geom.epsilon, *bands.values[i]) for i, e in enumerate(etas)]
    files = [write_csv(out / "perturbed.csv", cfg, "perturbed band functions from the cell solver",
                       cols, rows)]
    seg = bands.segments
    body = [f"h = {bands.h:.17g}", f"epsilon = {geom.epsilon:.17g}", "segments:"]
    body += [f"  band {n + 1}: [{seg[n, 0]:.17g}, {seg[n, 1]:.17g}]" for n in range(k)]
    gap = bands.gap_after(1)
    body.append("gap between bands 1 and 2: " + ("none" if gap is None else
                                                 f"({gap[0]:.17g}, {gap[1]:.17g}) length {gap[1] - gap[0]:.17g}"))
    files.append(write_text(out / "bands_report.txt", cfg, "band segments", body))
    if plots:
        from .plotting import plot_bands
        files.append(plot_bands(etas, bands.values, out / "perturbed.png", gap=gap,
                                predicted=predicted, epsilon=geom.epsilon))
    return files


def verify_outputs(cfg: RunConfig, ms: ModeSet, T: VirtualMassTensor, out: Path,
                   threads: int, plots: bool) -> list[Path]:
    geom = cfg.cell()
    cc = coupling_coefficients(cfg.bc(), ms, T, cfg.void(), cfg.center(), cfg.cross_section())
    h = cfg["numeric.cell_h"]
    eps_list = cfg["numeric.eps_list"]
    modes_for_rank = ModeSet.from_eigenvalues(ms.eigenvalues, ms.bc_kind)
    extrap = cfg["numeric.extrapolate"]

    def one(branch):
        return fit_epsilon_cubed(geom, eps_list, math.pi, branch, h,
                                 mode_set=modes_for_rank, extrapolate=extrap)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=2) as pool:
            fits = list(pool.map(one, ("-", "+")))
    else:
        fits = [one("-"), one("+")]
    predictions = {"-": cc.f0 - cc.abs_f1, "+": cc.f0 + cc.abs_f1}
    rows = []
    for fit in fits:
        for r in fit.rows:
            rows.append((r.epsilon, r.eta, r.k, r.lambda_coarse,
                         math.nan if r.lambda_fine is None else r.lambda_fine, r.deviation))
    files = [write_csv(out / "verify.csv", cfg, "eps sweep at eta = pi (shift relative to eps = 0 on the same grid)",
                       ["epsilon", "eta", "k", "lambda_h", "lambda_h_half", "extrapolated_shift"], rows)]
    body = [f"h = {h:.17g} (Richardson with h/2: {extrap})"]
    for fit in fits:
        pred = predictions[fit.branch]
        body += [f"branch {fit.branch} (k = {fit.k}):",
                 f"  fitted_slope = {fit.slope:.17g}",
                 f"  predicted_slope = {pred:.17g}",
                 f"  relative_difference = {abs(fit.slope - pred) / abs(pred):.6f}",
                 f"  fit_residual = {fit.residual:.6e}",
                 f"  c0_estimate = {fit.c0_estimate():.6e}"]
    files.append(write_text(out / "fit_report.txt", cfg, "oracle slope fit against asymptotics", body))
    if plots:
        from .plotting import plot_epsilon_fit
        files.append(plot_epsilon_fit(fits, predictions, out / "epsilon_fit.png"))
    return files


# ---------------------------------------------------------------------------
# click commands
# ---------------------------------------------------------------------------

def _common(f):
    f = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="Run configuration (flat 'section.key = value' file).")(f)
    f = click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                     help="Output directory (overrides output.dir).")(f)
    f = click.option("--threads", type=int, default=None, envvar="VOIDGAP_THREADS",
                     help="Worker threads for eta and eps sweeps [env: VOIDGAP_THREADS].")(f)
    f = click.option("--resolution", type=float, default=None,
                     help="Grid spacing: cross-section h for 'modes', cell h otherwise.")(f)
    f = click.option("--no-plots", is_flag=True, default=False, help="Skip PNG figures.")(f)
    return f


class _Context:
    def __init__(self, config_path, out_dir, threads, resolution, no_plots, resolution_key):
        if config_path is None:
            from .config import parse_config
            cfg = parse_config("")
        else:
            cfg = load_config(config_path)
        if resolution is not None:
            cfg = cfg.with_overrides(**{resolution_key.replace(".", "__"): resolution})
        self.cfg = cfg
        self.out = Path(out_dir if out_dir is not None else cfg["output.dir"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.threads = threads if threads is not None else cfg["run.threads"]
        if self.threads < 1:
            raise ConfigParse("--threads must be at least 1")
        self.plots = cfg["output.plots"] and not no_plots


def _run(body):
    try:
        files = body()
    except VoidGapError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(2)
    for f in files:
        click.echo(str(f))


@click.group()
@click.version_option(__version__, prog_name="voidgap")
def main():
    """Predict and verify the first band gap of a periodic waveguide with small voids."""


@main.command()
@_common
def modes(config_path, out_dir, threads, resolution, no_plots):
    """Cross-section eigenvalues to modes.csv."""
    def body():
        ctx = _Context(config_path, out_dir, threads, resolution, no_plots, "numeric.mode_h")
        return modes_outputs(ctx.cfg, run_modes(ctx.cfg), ctx.out)
    _run(body)


@main.command()
@_common
def vmass(config_path, out_dir, threads, resolution, no_plots):
    """Virtual-mass tensor of the void to vmass.txt."""
    def body():
        ctx = _Context(config_path, out_dir, threads, resolution, no_plots, "numeric.cell_h")
        return vmass_outputs(ctx.cfg, run_vmass(ctx.cfg), ctx.out)
    _run(body)


@main.command()
@_common
def gap(config_path, out_dir, threads, resolution, no_plots):
    """Coupling coefficients and the predicted gap to gap_report.txt."""
    def body():
        ctx = _Context(config_path, out_dir, threads, resolution, no_plots, "numeric.cell_h")
        ctx.cfg.cell()
        return gap_outputs(ctx.cfg, run_modes(ctx.cfg), run_vmass(ctx.cfg), ctx.out, ctx.plots)
    _run(body)


@main.command()
@_common
@click.option("--unperturbed/--perturbed", default=True,
              help="Lattice curves (default) or bands from the cell solver.")
def bands(config_path, out_dir, threads, resolution, no_plots, unperturbed):
    """Dispersion curves to unperturbed.csv or perturbed.csv."""
    def body():
        ctx = _Context(config_path, out_dir, threads, resolution, no_plots, "numeric.cell_h")
        if unperturbed:
            return unperturbed_outputs(ctx.cfg, run_modes(ctx.cfg), ctx.out, ctx.plots)
        return perturbed_outputs(ctx.cfg, ctx.out, ctx.threads, ctx.plots)
    _run(body)


@main.command()
@_common
def verify(config_path, out_dir, threads, resolution, no_plots):
    """Eps sweep with the cell solver; slopes compared with the asymptotics."""
    def body():
        ctx = _Context(config_path, out_dir, threads, resolution, no_plots, "numeric.cell_h")
        return verify_outputs(ctx.cfg, run_modes(ctx.cfg), run_vmass(ctx.cfg), ctx.out,
                              ctx.threads, ctx.plots)
    _run(body)


@main.command()
@_common
def report(config_path, out_dir, threads, resolution, no_plots):
    """Full pipeline: modes, virtual mass, gap, curves (and verification if run.verify)."""
    def body():
        ctx = _Context(config_path, out_dir, threads, resolution, no_plots, "numeric.cell_h")
        cfg = ctx.cfg
        cfg.cell()
        ms, T = run_modes(cfg), run_vmass(cfg)
        files = modes_outputs(cfg, ms, ctx.out) + vmass_outputs(cfg, T, ctx.out)
        files += gap_outputs(cfg, ms, T, ctx.out, ctx.plots)
        files += unperturbed_outputs(cfg, ms, ctx.out, ctx.plots)
        if cfg["run.verify"]:
            predicted = None
            try:
                cc = coupling_coefficients(cfg.bc(), ms, T, cfg.void(), cfg.center(),
                                           cfg.cross_section())
                rep = gap_interval(cc, ms, cfg["numeric.eps"],
                                   eigen_resolution=cfg["numeric.eigen_resolution"])
                predicted = (rep.a_minus, rep.a_plus)
            except GapNotPredicted:
                pass
            files += perturbed_outputs(cfg, ctx.out, ctx.threads, ctx.plots, predicted)
            files += verify_outputs(cfg, ms, T, ctx.out, ctx.threads, ctx.plots)
        return files
    _run(body)


if __name__ == "__main__":
    main()
