"""Noise-audit metrics and the brute-force electronics sweep.

Three criteria are computed per electronics setting and always reported
together (image similarity alone is known to mislead):

* rmse_kt1 -- residual of the linear fit of 1/N_max against the filter
  second-derivative constants (small when projection noise is low)
* rmse_ct  -- RMS deviation of the reconstruction from the rasterized
  ground-truth phantom, restricted to the inscribed field-of-view circle
* normality -- Jarque-Bera statistic of the open-beam count samples
  (raw counts, or batch means as a central-limit variant)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .detector import (CountSample, DetectorModel, ElectronicsSettings,
                       counts_to_projection, sample_scan)
from .phantom import GridSpec, Phantom, rasterize
from .projector import FanGeometry, ideal_sinogram
from .recon import ReconImage, fbp, rebin_fan_to_parallel

__all__ = [
    "KT1Point",
    "KT1Signature",
    "SweepResult",
    "kt1_signature",
    "rmse_ct",
    "normality_score",
    "sweep",
    "rank",
]


@dataclass(frozen=True)
class KT1Point:
    w2_0: float
    inv_nmax: float


@dataclass(frozen=True)
class KT1Signature:
    """Per-filter (w2_0, 1/N_max) points with their least-squares line."""

    points: tuple
    slope: float
    intercept: float
    rmse_fit: float


@dataclass(frozen=True)
class SweepResult:
    settings: ElectronicsSettings
    rmse_kt1: float
    rmse_ct: float
    normality: float


def kt1_signature(images) -> KT1Signature:
    """Fit 1/N_max against w2_0 over reconstructions with distinct filters.

    N_max is the signed maximum of the raw reconstructed values (no
    grayscale renormalization, which would erase the signal). Ordinary
    least squares is used: the abscissas are exact constants, so all error
    lives in the ordinate.
    """
    images = list(images)
    if len(images) < 3:
        raise ValueError("need at least 3 images for a meaningful fit")
    codes = [im.filter.code for im in images]
    if len(set(codes)) != len(codes):
        raise ValueError("images must use distinct filters")
    w = np.array([im.filter.w2_0 for im in images])
    nmax = np.array([float(np.max(im.values)) for im in images])
    if np.any(nmax <= 0):
        raise ValueError("every image must have a positive maximum")
    inv = 1.0 / nmax
    slope, intercept = np.polyfit(w, inv, 1)
    resid = inv - (slope * w + intercept)
    rmse = float(np.sqrt(np.mean(resid**2)))
    points = tuple(KT1Point(float(a), float(b)) for a, b in zip(w, inv))
    return KT1Signature(points, float(slope), float(intercept), rmse)


def _fov_mask(n: int) -> np.ndarray:
    idx = np.arange(n) + 0.5 - 0.5 * n
    return idx[None, :] ** 2 + idx[:, None] ** 2 <= (0.5 * n) ** 2


def rmse_ct(recon, truth) -> float:
    """RMS pixel deviation inside the inscribed field-of-view circle."""
    a = recon.values if isinstance(recon, ReconImage) else np.asarray(recon, float)
    b = truth.values if isinstance(truth, ReconImage) else np.asarray(truth, float)
    if a.shape != b.shape:
        raise ValueError("image dimensions must match")
    mask = _fov_mask(a.shape[0])
    return float(np.sqrt(np.mean((a[mask] - b[mask]) ** 2)))


def normality_score(samples, batch_size: Optional[int] = None) -> float:
    """Jarque-Bera statistic JB = (n/6) * (S^2 + K^2/4); lower = more normal.

    ``samples`` may be numbers or CountSample objects. With ``batch_size``
    the statistic is computed on means of consecutive batches (the
    central-limit variant); at least 20 scored values are required either
    way.
    """
    x = np.array(
        [s.counts if isinstance(s, CountSample) else s for s in np.ravel(samples)],
        dtype=float,
    )
    if batch_size is not None:
        m = int(batch_size)
        if m < 2:
            raise ValueError("batch size must be >= 2")
        n_batches = x.size // m
        if n_batches < 20:
            raise ValueError("need at least 20 full batches")
        x = x[: n_batches * m].reshape(n_batches, m).mean(axis=1)
    n = x.size
    if n < 20:
        raise ValueError("need at least 20 samples")
    centered = x - x.mean()
    m2 = np.mean(centered**2)
    if m2 <= 0:
        raise ValueError("zero sample variance: statistic undefined")
    skew = np.mean(centered**3) / m2**1.5
    exkurt = np.mean(centered**4) / m2**2 - 3.0
    return float(n / 6.0 * (skew**2 + exkurt**2 / 4.0))


def _setting_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def sweep(phantom: Phantom, geom: FanGeometry, base_model: DetectorModel,
          settings_list, filters, grid: GridSpec, thetas=None, s_bins=None,
          repeats: int = 2000, seed: int = 0, supersample: int = 2):
    """Brute-force settings sweep: one SweepResult per electronics setting.

    The noise-free sinogram and ground truth are computed once; each
    setting gets its own seeded substream, so results are deterministic in
    (settings_list, seed) and independent of evaluation order. rmse_ct is
    the mean over the filter set.
    """
    settings_list = list(settings_list)
    if not settings_list:
        raise ValueError("settings grid must be non-empty")
    filters = list(filters)
    attenuation = ideal_sinogram(phantom, geom)
    truth = rasterize(phantom, grid, supersample)
    if thetas is None:
        thetas = np.arange(geom.n_views) * (360.0 / geom.n_views)
    if s_bins is None:
        s_bins = np.linspace(-phantom.background.radius, phantom.background.radius, 64)
    results = []
    for i, st in enumerate(settings_list):
        model = base_model.with_settings(st)
        res = sample_scan(attenuation, model, repeats, _setting_seed(seed, i))
        proj = counts_to_projection(res.counts, res.open_beam, duration=st.tau)
        parallel = rebin_fan_to_parallel(proj, geom, thetas, s_bins)
        images = [fbp(parallel, f, grid) for f in filters]
        sig = kt1_signature(images)
        rc = float(np.mean([rmse_ct(im, truth) for im in images]))
        nj = normality_score(res.samples)
        results.append(SweepResult(st, sig.rmse_fit, rc, nj))
    return results


_CRITERIA = {
    "rmse_kt1": lambda r: r.rmse_kt1,
    "rmse_ct": lambda r: r.rmse_ct,
    "normality": lambda r: r.normality,
}


def rank(results, criterion: str):
    """Ascending sort by criterion; ties broken by (hv, gain, lld, tau)."""
    if not results:
        raise ValueError("results must be non-empty")
    try:
        key = _CRITERIA[criterion]
    except KeyError:
        raise ValueError(f"unknown criterion '{criterion}'")
    return sorted(results, key=lambda r: (key(r),) + r.settings.astuple())
