"""Run configuration: flat key=value files with dotted section prefixes.

Unknown keys are rejected so typos never pass silently. Any key can be
overridden on the command line via ``--set key=value``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

__all__ = ["ConfigError", "RunConfig", "parse_config", "apply_override"]


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"bad boolean value '{s}'")


def _float_list(s: str):
    return tuple(float(t) for t in s.replace(",", " ").split())


def _str_list(s: str):
    return tuple(t.strip() for t in s.split(",") if t.strip())


@dataclass
class RunConfig:
    seed: Optional[int] = None
    repeats: int = 100

    phantom_file: Optional[str] = None
    mu_background: float = 0.096
    al_cx: float = -2.5
    al_cy: float = 0.0
    fe_cx: float = 3.0
    fe_cy: float = 2.0

    n_views: int = 36
    n_detectors: int = 5
    fan_angle: float = 13.25
    source_to_center: float = 26.0
    source_to_detector: float = 52.0

    i0_rate: float = 3000.0
    hv: float = 750.0
    gain: float = 1.0
    lld: float = 1.0
    tau: float = 1.0
    hv_ref: float = 750.0
    pmt_exponent: float = 7.0
    sigma_h: float = 0.3
    nu0: float = 200.0
    lld0: float = 0.5
    h_sat: float = 5.0
    nominal_hv: float = 750.0
    nominal_gain: float = 1.0
    nominal_lld: float = 1.0
    nominal_tau: float = 1.0

    filters: tuple = ("h99", "h91", "h75", "h54", "h50")
    n_thetas: int = 36
    n_sbins: int = 64
    n_pixels: int = 128
    fov: float = 14.0
    s_max: Optional[float] = None

    sweep_hv: tuple = (690.0, 750.0, 815.0)
    sweep_gain: tuple = (0.35, 0.55, 0.85)
    sweep_lld: tuple = (1.6, 2.1, 2.6)
    sweep_tau: tuple = (1.0,)
    sweep_repeats: int = 2000
    grid_file: Optional[str] = None

    break_filter_table: bool = False  # verify-suite negative-control hook


# dotted key -> (attribute, converter)
_KEYS = {
    "seed": ("seed", int),
    "repeats": ("repeats", int),
    "phantom.file": ("phantom_file", str),
    "phantom.mu_background": ("mu_background", float),
    "phantom.al_cx": ("al_cx", float),
    "phantom.al_cy": ("al_cy", float),
    "phantom.fe_cx": ("fe_cx", float),
    "phantom.fe_cy": ("fe_cy", float),
    "geometry.n_views": ("n_views", int),
    "geometry.n_detectors": ("n_detectors", int),
    "geometry.fan_angle": ("fan_angle", float),
    "geometry.source_to_center": ("source_to_center", float),
    "geometry.source_to_detector": ("source_to_detector", float),
    "detector.i0_rate": ("i0_rate", float),
    "detector.hv": ("hv", float),
    "detector.gain": ("gain", float),
    "detector.lld": ("lld", float),
    "detector.tau": ("tau", float),
    "detector.hv_ref": ("hv_ref", float),
    "detector.pmt_exponent": ("pmt_exponent", float),
    "detector.sigma_h": ("sigma_h", float),
    "detector.nu0": ("nu0", float),
    "detector.lld0": ("lld0", float),
    "detector.h_sat": ("h_sat", float),
    "detector.nominal_hv": ("nominal_hv", float),
    "detector.nominal_gain": ("nominal_gain", float),
    "detector.nominal_lld": ("nominal_lld", float),
    "detector.nominal_tau": ("nominal_tau", float),
    "recon.filters": ("filters", _str_list),
    "recon.n_thetas": ("n_thetas", int),
    "recon.n_sbins": ("n_sbins", int),
    "recon.n_pixels": ("n_pixels", int),
    "recon.fov": ("fov", float),
    "recon.s_max": ("s_max", float),
    "sweep.hv": ("sweep_hv", _float_list),
    "sweep.gain": ("sweep_gain", _float_list),
    "sweep.lld": ("sweep_lld", _float_list),
    "sweep.tau": ("sweep_tau", _float_list),
    "sweep.repeats": ("sweep_repeats", int),
    "sweep.grid_file": ("grid_file", str),
    "verify.break_filter_table": ("break_filter_table", _bool),
}


def apply_override(cfg: RunConfig, key: str, value: str) -> None:
    if key not in _KEYS:
        raise ConfigError(f"unknown config key '{key}'")
    attr, conv = _KEYS[key]
    try:
        setattr(cfg, attr, conv(value))
    except ConfigError:
        raise
    except (TypeError, ValueError):
        raise ConfigError(f"bad value '{value}' for config key '{key}'")


def parse_config(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    cfg = base if base is not None else RunConfig()
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"malformed config line: '{line}'")
        key, value = line.split("=", 1)
        apply_override(cfg, key.strip(), value.strip())
    return cfg
