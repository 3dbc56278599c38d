"""Command-line driver: phantom -> scan -> reconstruct -> analyze pipeline,
settings sweeps, and the built-in verification suite.

Exit codes: 0 success, 1 check/validation failure, 2 malformed input.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import formats
from .analysis import kt1_signature, rank, rmse_ct, sweep
from .config import ConfigError, RunConfig, apply_override, parse_config
from .detector import DetectorModel, ElectronicsSettings, counts_to_projection, scan
from .formats import FormatError
from .phantom import GridSpec, Phantom, paper_phantom, rasterize
from .projector import FanGeometry
from .recon import get_filter, rebin_fan_to_parallel, fbp
from .verify import run_checks

__all__ = ["main", "entry"]


def _phantom_from(cfg: RunConfig) -> Phantom:
    if cfg.phantom_file is not None:
        return formats.parse_phantom(Path(cfg.phantom_file).read_text())
    return paper_phantom(
        mu_background=cfg.mu_background,
        aluminium_center=(cfg.al_cx, cfg.al_cy),
        iron_center=(cfg.fe_cx, cfg.fe_cy),
    )


def _geometry_from(cfg: RunConfig) -> FanGeometry:
    views = tuple(np.arange(cfg.n_views) * (360.0 / cfg.n_views))
    return FanGeometry(
        source_to_center=cfg.source_to_center,
        source_to_detector=cfg.source_to_detector,
        fan_angle=cfg.fan_angle,
        n_detectors=cfg.n_detectors,
        view_angles=views,
    )


def _model_from(cfg: RunConfig, settings=None) -> DetectorModel:
    if settings is None:
        settings = ElectronicsSettings(cfg.hv, cfg.gain, cfg.lld, cfg.tau)
    nominal = ElectronicsSettings(
        cfg.nominal_hv, cfg.nominal_gain, cfg.nominal_lld, cfg.nominal_tau
    )
    return DetectorModel(
        i0_rate=cfg.i0_rate,
        settings=settings,
        nominal=nominal,
        hv_ref=cfg.hv_ref,
        pmt_exponent=cfg.pmt_exponent,
        sigma_h=cfg.sigma_h,
        nu0=cfg.nu0,
        lld0=cfg.lld0,
        h_sat=cfg.h_sat,
    )


def _filters_from(cfg: RunConfig):
    return [get_filter(code) for code in cfg.filters]


def _recon_axes(cfg: RunConfig, phantom: Phantom):
    thetas = np.arange(cfg.n_thetas) * (360.0 / cfg.n_thetas)
    s_max = cfg.s_max if cfg.s_max is not None else phantom.background.radius
    s_bins = np.linspace(-s_max, s_max, cfg.n_sbins)
    return thetas, s_bins


def _require_seed(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise ConfigError("a seed is required for stochastic stages (set 'seed')")
    return cfg.seed


def cmd_phantom(cfg: RunConfig, outdir: Path) -> int:
    ph = _phantom_from(cfg)
    grid = GridSpec(cfg.n_pixels, cfg.fov)
    truth = rasterize(ph, grid, supersample=4)
    from .recon import ReconImage

    (outdir / "truth.dimg").write_text(formats.format_image(ReconImage(grid, truth)))
    (outdir / "truth.pgm").write_text(formats.format_pgm(truth))
    (outdir / "phantom.spec").write_text(formats.format_phantom(ph))
    print(f"phantom: wrote truth image {grid.n_pixels}x{grid.n_pixels} to {outdir}")
    return 0


def cmd_scan(cfg: RunConfig, outdir: Path) -> int:
    seed = _require_seed(cfg)
    ph = _phantom_from(cfg)
    geom = _geometry_from(cfg)
    model = _model_from(cfg)
    res = scan(ph, geom, model, cfg.repeats, seed)
    (outdir / "counts.dsino").write_text(formats.format_sinogram(res.counts))
    (outdir / "open_beam.txt").write_text(
        formats.format_open_beam(res.open_beam, res.samples, res.tau)
    )
    print(f"scan: wrote {geom.n_views}x{geom.n_detectors} counts sinogram (seed {seed})")
    return 0


def cmd_reconstruct(cfg: RunConfig, outdir: Path) -> int:
    sino_path = outdir / "counts.dsino"
    if not sino_path.exists():
        raise ConfigError(f"no sinogram at {sino_path}; run 'scan' first")
    sino = formats.parse_sinogram(sino_path.read_text())
    if sino.kind == "counts":
        open_beam, _samples, tau = formats.parse_open_beam(
            (outdir / "open_beam.txt").read_text()
        )
        proj = counts_to_projection(sino, open_beam, duration=tau)
    else:
        proj = sino
    ph = _phantom_from(cfg)
    filters = _filters_from(cfg)
    thetas, s_bins = _recon_axes(cfg, ph)
    parallel = rebin_fan_to_parallel(proj, proj.geom, thetas, s_bins)
    (outdir / "parallel.dsino").write_text(formats.format_sinogram(parallel))
    grid = GridSpec(cfg.n_pixels, cfg.fov)
    for filt in filters:
        img = fbp(parallel, filt, grid)
        (outdir / f"recon_{filt.code}.dimg").write_text(formats.format_image(img))
    print(f"reconstruct: wrote {len(filters)} image(s) to {outdir}")
    return 0


def cmd_analyze(cfg: RunConfig, outdir: Path) -> int:
    images = []
    for code in cfg.filters:
        path = outdir / f"recon_{code}.dimg"
        if path.exists():
            images.append(formats.parse_image(path.read_text()))
    if len(images) < 3:
        raise ConfigError("analyze needs reconstructions for at least 3 filters")
    sig = kt1_signature(images)
    truth_path = outdir / "truth.dimg"
    if truth_path.exists():
        truth = formats.parse_image(truth_path.read_text()).values
    else:
        truth = rasterize(_phantom_from(cfg), images[0].grid, supersample=4)

    with open(outdir / "kt1_signature.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["filter_code", "w2_0", "nmax", "inv_nmax"])
        for img, pt in zip(images, sig.points):
            w.writerow([img.filter.code, repr(pt.w2_0),
                        repr(1.0 / pt.inv_nmax), repr(pt.inv_nmax)])
    (outdir / "fit_summary.txt").write_text(
        f"slope={sig.slope!r}\nintercept={sig.intercept!r}\nrmse_kt1={sig.rmse_fit!r}\n"
    )
    with open(outdir / "rmse_table.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["filter_code", "nmax", "rmse_ct"])
        for img in images:
            w.writerow([img.filter.code, repr(float(np.max(img.values))),
                        repr(rmse_ct(img.values, truth))])
    print(f"analyze: rmse_kt1={sig.rmse_fit:.6g} over {len(images)} filters")
    return 0


def _settings_grid(cfg: RunConfig):
    if cfg.grid_file is not None:
        return formats.parse_settings_grid(Path(cfg.grid_file).read_text())
    grid = [
        ElectronicsSettings(hv=h, gain=g, lld=l, tau=t)
        for h in cfg.sweep_hv
        for g in cfg.sweep_gain
        for l in cfg.sweep_lld
        for t in cfg.sweep_tau
    ]
    if not grid:
        raise ConfigError("settings grid is empty")
    return grid


_SWEEP_COLUMNS = ["hv", "gain", "lld", "tau", "rmse_kt1", "rmse_ct", "normality"]


def _write_sweep_csv(path: Path, results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_SWEEP_COLUMNS)
        for r in results:
            s = r.settings
            w.writerow([repr(s.hv), repr(s.gain), repr(s.lld), repr(s.tau),
                        repr(r.rmse_kt1), repr(r.rmse_ct), repr(r.normality)])


def cmd_sweep(cfg: RunConfig, outdir: Path) -> int:
    seed = _require_seed(cfg)
    grid_settings = _settings_grid(cfg)
    ph = _phantom_from(cfg)
    geom = _geometry_from(cfg)
    model = _model_from(cfg)
    filters = _filters_from(cfg)
    thetas, s_bins = _recon_axes(cfg, ph)
    grid = GridSpec(cfg.n_pixels, cfg.fov)
    results = sweep(ph, geom, model, grid_settings, filters, grid,
                    thetas=thetas, s_bins=s_bins,
                    repeats=cfg.sweep_repeats, seed=seed)
    _write_sweep_csv(outdir / "sweep.csv", results)
    for criterion in ("rmse_kt1", "rmse_ct", "normality"):
        _write_sweep_csv(outdir / f"rank_{criterion}.csv", rank(results, criterion))
    print(f"sweep: {len(results)} settings scored (seed {seed})")
    return 0


def cmd_verify(cfg: RunConfig, outdir: Path) -> int:
    table = None
    if cfg.break_filter_table:
        from .recon import FilterSpec

        table = {"h50": FilterSpec("h50", 0.5, 0.123)}
    ok = run_checks(filter_table=table)
    print("verify: " + ("all checks passed" if ok else "FAILED"))
    return 0 if ok else 1


_COMMANDS = {
    "phantom": cmd_phantom,
    "scan": cmd_scan,
    "reconstruct": cmd_reconstruct,
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


@contextlib.contextmanager
def _locked(outdir: Path):
    # one writer per output directory
    lock = outdir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"output directory '{outdir}' is locked by another run")
    os.close(fd)
    try:
        yield
    finally:
        with contextlib.suppress(FileNotFoundError):
            lock.unlink()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gammact",
        description="Limited-detector gamma CT simulation and noise-audit toolkit",
    )
    parser.add_argument("--config", help="path to a key=value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, help="master RNG seed")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    args = parser.parse_args(argv)

    try:
        cfg = RunConfig()
        if args.config:
            cfg = parse_config(Path(args.config).read_text(), cfg)
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got '{item}'")
            key, value = item.split("=", 1)
            apply_override(cfg, key.strip(), value.strip())
        if args.seed is not None:
            cfg.seed = args.seed
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        with _locked(outdir):
            return _COMMANDS[args.command](cfg, outdir)
    except (ConfigError, FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
