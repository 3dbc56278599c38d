"""Built-in invariant suite backing the ``verify`` CLI command.

Each check is a fast, self-contained smoke test of one pipeline stage; the
suite prints one line per check and reports overall pass/fail. The filter
table can be injected so a deliberately broken table exercises the failure
path (negative control).
"""

from __future__ import annotations

import sys

import numpy as np

from .analysis import normality_score
from .detector import DetectorModel, sample_scan
from .formats import format_sinogram, parse_sinogram
from .phantom import DiscSpec, GridSpec, Phantom, mu_at, paper_phantom
from .projector import (FanGeometry, Sinogram, ideal_sinogram, line_integrals,
                        paper_geometry)
from .recon import (HAMMING_FILTERS, ParallelSinogram, fbp, filter_kernel,
                    get_filter, rebin_fan_to_parallel)

__all__ = ["run_checks"]

_EXPECTED_FILTERS = {
    "h99": (0.99, 0.001),
    "h91": (0.91, 0.083),
    "h75": (0.75, 0.250),
    "h54": (0.54, 0.460),
    "h50": (0.50, 0.500),
}


def _check_geometry(_):
    g = paper_geometry()
    return (
        g.fan_angle == 13.25
        and g.source_to_detector == 52.0
        and g.source_to_center == 26.0
        and g.n_detectors == 5
        and g.view_angles == tuple(float(v) for v in range(0, 360, 10))
    )


def _check_filter_table(table):
    if set(table) != set(_EXPECTED_FILTERS):
        return False
    return all(
        (table[c].alpha, table[c].w2_0) == _EXPECTED_FILTERS[c] for c in table
    )


def _check_projector(_):
    ph = paper_phantom()
    rng = np.random.default_rng(7)
    step = 1e-3
    t = np.arange(15.5, 36.5, step) + 0.5 * step
    for _i in range(40):
        px, py = rng.uniform(-4, 4, 2)
        ang = rng.uniform(0, 2 * np.pi)
        dx, dy = np.cos(ang), np.sin(ang)
        ox, oy = px - 26.0 * dx, py - 26.0 * dy
        xs, ys = ox + t * dx, oy + t * dy
        quad = float(np.sum(mu_at(ph, xs, ys)) * step)
        exact = float(line_integrals(ph, ox, oy, dx, dy))
        if abs(quad - exact) > 1e-3:
            return False
    return True


def _check_kernel_zero_sum(_):
    for filt in HAMMING_FILTERS.values():
        if abs(filter_kernel(filt, 64, 0.1).sum()) > 1e-8:
            return False
    return True


def _check_fbp_disc(_):
    r, mu = 6.0, 0.096
    thetas = np.arange(90) * 2.0
    s = np.linspace(-7.0, 7.0, 64)
    proj = 2.0 * mu * np.sqrt(np.maximum(r**2 - s**2, 0.0))
    par = ParallelSinogram(thetas, s, np.tile(proj, (90, 1)))
    grid = GridSpec(64, 14.0)
    img = fbp(par, get_filter("h50"), grid)
    x, y = grid.centers()
    rr = x[None, :] ** 2 + y[:, None] ** 2
    mean = img.values[rr < 16.0].mean()
    return abs(mean - mu) <= 0.1 * mu


def _check_rebinning(_):
    disc = Phantom(DiscSpec(0.0, 0.0, 6.0, 0.096))
    geom = FanGeometry(26.0, 52.0, 13.25, 64, tuple(np.arange(360) * 1.0))
    fan = ideal_sinogram(disc, geom)
    s = np.linspace(-2.9, 2.9, 41)
    par = rebin_fan_to_parallel(fan, geom, np.arange(36) * 10.0, s)
    expect = 2.0 * 0.096 * np.sqrt(36.0 - s**2)
    err = np.max(np.abs(par.values - expect[None, :]))
    return err <= 0.02 * (2.0 * 0.096 * 6.0)


def _check_normality_stat(_):
    ok = 0
    for sd in range(20):
        rng = np.random.default_rng(sd)
        if normality_score(rng.normal(size=10_000)) < 9.21:
            ok += 1
        if normality_score(rng.exponential(size=10_000)) <= 9.21:
            return False
    return ok >= 18


def _check_roundtrip(_):
    geom = paper_geometry()
    rng = np.random.default_rng(11)
    sino = Sinogram(rng.uniform(size=(36, 5)), "attenuation", geom=geom, seed=5)
    back = parse_sinogram(format_sinogram(sino))
    return (
        np.array_equal(back.values, sino.values)
        and back.geom == sino.geom
        and back.seed == sino.seed
        and back.kind == sino.kind
    )


def _check_determinism(_):
    ph = paper_phantom()
    geom = paper_geometry()
    model = DetectorModel()
    atten = ideal_sinogram(ph, geom)
    a = sample_scan(atten, model, 25, 123)
    b = sample_scan(atten, model, 25, 123)
    c = sample_scan(atten, model, 25, 124)
    return (
        np.array_equal(a.counts.values, b.counts.values)
        and np.array_equal(a.samples, b.samples)
        and not np.array_equal(a.counts.values, c.counts.values)
    )


_CHECKS = [
    ("geometry_constants", _check_geometry),
    ("filter_table", _check_filter_table),
    ("projector_vs_quadrature", _check_projector),
    ("kernel_zero_frequency_null", _check_kernel_zero_sum),
    ("fbp_disc_accuracy", _check_fbp_disc),
    ("rebinning_vs_analytic", _check_rebinning),
    ("normality_statistic", _check_normality_stat),
    ("format_roundtrip", _check_roundtrip),
    ("scan_determinism", _check_determinism),
]


def run_checks(filter_table=None, stream=None) -> bool:
    """Run every check; print one pass/fail line each; True iff all pass."""
    if filter_table is None:
        filter_table = HAMMING_FILTERS
    if stream is None:
        stream = sys.stdout
    all_ok = True
    for name, fn in _CHECKS:
        try:
            ok = bool(fn(filter_table))
        except Exception as exc:  # a crash is a failure, not an abort
            ok = False
            print(f"[FAIL] {name}: {exc}", file=stream)
            all_ok = False
            continue
        print(f"[{'PASS' if ok else 'FAIL'}] {name}", file=stream)
        all_ok = all_ok and ok
    return all_ok
