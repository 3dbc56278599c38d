"""Text file formats: sinograms (DSINO 1), images (DIMG 1), phantom specs,
open-beam samples (DOPEN 1), settings grids, and a PGM export.

All numeric values are printed with 17 significant digits, so every format
round-trips 64-bit floats exactly. Text was chosen over binary for
diffability and cross-language exactness.
"""

from __future__ import annotations

import itertools

import numpy as np

from .detector import CountSample, ElectronicsSettings
from .phantom import DiscSpec, GridSpec, Phantom
from .projector import FanGeometry, Sinogram
from .recon import FilterSpec, ParallelSinogram, ReconImage

__all__ = [
    "FormatError",
    "format_sinogram",
    "parse_sinogram",
    "format_image",
    "parse_image",
    "format_phantom",
    "parse_phantom",
    "format_open_beam",
    "parse_open_beam",
    "parse_settings_grid",
    "format_pgm",
]

MAGIC_SINO = "DSINO 1"
MAGIC_IMG = "DIMG 1"
MAGIC_OPEN = "DOPEN 1"


class FormatError(ValueError):
    pass


def _g(x) -> str:
    return format(float(x), ".17g")


def _row(vals) -> str:
    return " ".join(_g(v) for v in np.asarray(vals).ravel())


def _split(text: str, magic: str):
    lines = text.splitlines()
    if not lines or lines[0].strip() != magic:
        raise FormatError(f"bad magic line, expected '{magic}'")
    meta = {}
    i = 1
    while i < len(lines) and lines[i].strip() != "":
        line = lines[i]
        if "=" not in line:
            raise FormatError(f"malformed header line: '{line}'")
        key, val = line.split("=", 1)
        meta[key.strip()] = val.strip()
        i += 1
    rows = [ln for ln in lines[i:] if ln.strip() != ""]
    return meta, rows


def _need(meta: dict, key: str) -> str:
    if key not in meta:
        raise FormatError(f"missing key '{key}'")
    return meta[key]


def _floats(s: str) -> np.ndarray:
    return np.array([float(t) for t in s.split()], dtype=float)


def _data(rows) -> np.ndarray:
    return np.array([[float(t) for t in r.split()] for r in rows], dtype=float)


# --- sinograms --------------------------------------------------------------

def format_sinogram(sino) -> str:
    lines = [MAGIC_SINO]
    if isinstance(sino, ParallelSinogram):
        lines.append("kind=parallel")
        lines.append("thetas=" + _row(sino.thetas))
        lines.append("s_bins=" + _row(sino.s_bins))
        lines.append(
            "coverage=" + "".join("1" if c else "0" for c in sino.coverage.ravel())
        )
        values = sino.values
    else:
        if sino.geom is None:
            raise FormatError("fan sinogram needs geometry metadata to serialize")
        g = sino.geom
        lines.append(f"kind={sino.kind}")
        lines.append("view_angles=" + _row(g.view_angles))
        lines.append(f"n_detectors={g.n_detectors}")
        lines.append("fan_angle=" + _g(g.fan_angle))
        lines.append("source_to_center=" + _g(g.source_to_center))
        lines.append("source_to_detector=" + _g(g.source_to_detector))
        if sino.seed is not None:
            lines.append(f"seed={int(sino.seed)}")
        values = sino.values
    lines.append("")
    lines.extend(_row(r) for r in values)
    return "\n".join(lines) + "\n"


def parse_sinogram(text: str):
    meta, rows = _split(text, MAGIC_SINO)
    kind = _need(meta, "kind")
    values = _data(rows)
    if kind == "parallel":
        thetas = _floats(_need(meta, "thetas"))
        s_bins = _floats(_need(meta, "s_bins"))
        if values.shape != (thetas.size, s_bins.size):
            raise FormatError("data shape does not match thetas/s_bins")
        coverage = None
        if "coverage" in meta:
            bits = meta["coverage"]
            if len(bits) != values.size:
                raise FormatError("coverage length does not match data")
            coverage = np.array([c == "1" for c in bits]).reshape(values.shape)
        return ParallelSinogram(thetas, s_bins, values, coverage)
    if kind not in ("counts", "attenuation"):
        raise FormatError(f"unknown sinogram kind '{kind}'")
    view_angles = _floats(_need(meta, "view_angles"))
    n_det = int(_need(meta, "n_detectors"))
    geom = FanGeometry(
        source_to_center=float(_need(meta, "source_to_center")),
        source_to_detector=float(_need(meta, "source_to_detector")),
        fan_angle=float(_need(meta, "fan_angle")),
        n_detectors=n_det,
        view_angles=tuple(view_angles),
    )
    if values.shape != (view_angles.size, n_det):
        raise FormatError("data shape does not match geometry")
    seed = int(meta["seed"]) if "seed" in meta else None
    return Sinogram(values, kind=kind, geom=geom, seed=seed)


# --- images -----------------------------------------------------------------

def format_image(img: ReconImage) -> str:
    lines = [MAGIC_IMG]
    lines.append(f"n_pixels={img.grid.n_pixels}")
    lines.append("fov=" + _g(img.grid.fov))
    if img.filter is not None:
        lines.append(f"filter_code={img.filter.code}")
        lines.append("filter_alpha=" + _g(img.filter.alpha))
        lines.append("filter_w2_0=" + _g(img.filter.w2_0))
    lines.append("")
    lines.extend(_row(r) for r in img.values)
    return "\n".join(lines) + "\n"


def parse_image(text: str) -> ReconImage:
    meta, rows = _split(text, MAGIC_IMG)
    grid = GridSpec(int(_need(meta, "n_pixels")), float(_need(meta, "fov")))
    values = _data(rows)
    if values.shape != (grid.n_pixels, grid.n_pixels):
        raise FormatError("data shape does not match n_pixels")
    filt = None
    if "filter_code" in meta:
        filt = FilterSpec(
            meta["filter_code"],
            float(_need(meta, "filter_alpha")),
            float(_need(meta, "filter_w2_0")),
        )
    return ReconImage(grid, values, filt)


def format_pgm(values: np.ndarray) -> str:
    """8-bit PGM (linear min-max normalization) for eyeballing only."""
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    pix = np.clip(np.round((v - lo) * scale), 0, 255).astype(int)
    lines = ["P2", f"{pix.shape[1]} {pix.shape[0]}", "255"]
    lines.extend(" ".join(str(p) for p in row) for row in pix)
    return "\n".join(lines) + "\n"


# --- phantom specs ----------------------------------------------------------

def _disc_lines(name: str, d: DiscSpec):
    return [f"[{name}]", "cx=" + _g(d.cx), "cy=" + _g(d.cy),
            "r=" + _g(d.radius), "mu=" + _g(d.mu)]


def format_phantom(ph: Phantom) -> str:
    lines = _disc_lines("background", ph.background)
    for ins in ph.inserts:
        lines.extend(_disc_lines("insert", ins))
    return "\n".join(lines) + "\n"


def parse_phantom(text: str) -> Phantom:
    sections = []
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = {"__name__": line[1:-1]}
            sections.append(current)
        elif "=" in line:
            if current is None:
                raise FormatError("key outside any section in phantom spec")
            key, val = line.split("=", 1)
            current[key.strip()] = val.strip()
        else:
            raise FormatError(f"malformed phantom spec line: '{line}'")

    def disc(sec):
        vals = {}
        for key in ("cx", "cy", "r", "mu"):
            if key not in sec:
                raise FormatError(f"missing key '{key}' in [{sec['__name__']}]")
            try:
                vals[key] = float(sec[key])
            except ValueError:
                raise FormatError(f"bad value for key '{key}'")
        return DiscSpec(vals["cx"], vals["cy"], vals["r"], vals["mu"])

    bgs = [s for s in sections if s["__name__"] == "background"]
    if len(bgs) != 1:
        raise FormatError("phantom spec needs exactly one [background] section")
    inserts = tuple(disc(s) for s in sections if s["__name__"] == "insert")
    return Phantom(disc(bgs[0]), inserts)


# --- open-beam samples ------------------------------------------------------

def format_open_beam(open_beam, samples: np.ndarray, tau: float) -> str:
    samples = np.asarray(samples, dtype=float)
    lines = [MAGIC_OPEN]
    lines.append(f"n_detectors={samples.shape[1]}")
    lines.append(f"repeats={samples.shape[0]}")
    lines.append("tau=" + _g(tau))
    lines.append("open_beam=" + _row([ob.counts for ob in open_beam]))
    lines.append("open_beam_duration=" + _g(open_beam[0].duration))
    lines.append("")
    lines.extend(_row(r) for r in samples)
    return "\n".join(lines) + "\n"


def parse_open_beam(text: str):
    meta, rows = _split(text, MAGIC_OPEN)
    n_det = int(_need(meta, "n_detectors"))
    repeats = int(_need(meta, "repeats"))
    tau = float(_need(meta, "tau"))
    duration = float(_need(meta, "open_beam_duration"))
    counts = _floats(_need(meta, "open_beam"))
    if counts.size != n_det:
        raise FormatError("open_beam length does not match n_detectors")
    open_beam = tuple(CountSample(c, duration) for c in counts)
    samples = _data(rows)
    if samples.shape != (repeats, n_det):
        raise FormatError("sample rows do not match repeats/n_detectors")
    return open_beam, samples, tau


# --- settings grids ---------------------------------------------------------

def parse_settings_grid(text: str):
    """Cartesian product of hv/gain/lld/tau axes from a key=value listing.

    Axis values may be separated by spaces or commas. Product order is
    hv (slowest) then gain, lld, tau.
    """
    axes = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"malformed settings grid line: '{line}'")
        key, val = line.split("=", 1)
        key = key.strip()
        if key not in ("hv", "gain", "lld", "tau"):
            raise FormatError(f"unknown settings axis '{key}'")
        axes[key] = [float(t) for t in val.replace(",", " ").split()]
    for key in ("hv", "gain", "lld", "tau"):
        if key not in axes or not axes[key]:
            raise FormatError(f"missing key '{key}'")
    return [
        ElectronicsSettings(hv=h, gain=g, lld=l, tau=t)
        for h, g, l, t in itertools.product(
            axes["hv"], axes["gain"], axes["lld"], axes["tau"]
        )
    ]
