"""Scintillation-electronics counting model.

The electronics knobs (HV, gain, LLD, averaging time) are mapped to three
counting-noise parameters through a phenomenological model:

* mean pulse height  h = gain * (hv / hv_ref)**pmt_exponent
* detection efficiency  epsilon = Phi((h - lld) / sigma_h), clamped away
  from 0 and 1 (the LLD cuts into the pulse-height spectrum)
* spurious pulse rate  nu = nu0 * exp(-lld / lld0)
* overdispersion  d = 1 + (h / h_sat)**2  applied to the spurious term

Measured counts are Poisson(true signal) plus a negative-binomial spurious
component that degenerates to Poisson when d = 1. All randomness flows from
an explicit seed; ray (view v, detector k) uses substream id
``v * n_detectors + k``, so results are independent of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr

from .phantom import Phantom
from .projector import FanGeometry, Sinogram, ideal_sinogram

__all__ = [
    "ElectronicsSettings",
    "DetectorModel",
    "CountSample",
    "ScanResult",
    "substream",
    "effective_params",
    "sample_counts",
    "sample_scan",
    "scan",
    "counts_to_projection",
]

_EPS_CLAMP = 1e-6


@dataclass(frozen=True)
class ElectronicsSettings:
    """Abstract detector-electronics knobs; all strictly positive."""

    hv: float = 750.0
    gain: float = 1.0
    lld: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        for name in ("hv", "gain", "lld", "tau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    def astuple(self):
        return (self.hv, self.gain, self.lld, self.tau)


@dataclass(frozen=True)
class DetectorModel:
    """Counting model: open-beam rate, current settings, and noise constants."""

    i0_rate: float = 3000.0
    settings: ElectronicsSettings = field(default_factory=ElectronicsSettings)
    nominal: ElectronicsSettings = field(default_factory=ElectronicsSettings)
    hv_ref: float = 750.0
    pmt_exponent: float = 7.0
    sigma_h: float = 0.3
    nu0: float = 200.0
    lld0: float = 0.5
    h_sat: float = 5.0

    def __post_init__(self):
        if not self.i0_rate > 0:
            raise ValueError("i0_rate must be > 0")
        for name in ("hv_ref", "pmt_exponent", "sigma_h", "lld0", "h_sat"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.nu0 < 0:
            raise ValueError("nu0 must be >= 0")

    def with_settings(self, settings: ElectronicsSettings) -> "DetectorModel":
        return replace(self, settings=settings)


@dataclass(frozen=True)
class CountSample:
    """One counting measurement over a known duration."""

    counts: float
    duration: float

    def __post_init__(self):
        if self.counts < 0:
            raise ValueError("counts must be >= 0")
        if not self.duration > 0:
            raise ValueError("duration must be > 0")


@dataclass
class ScanResult:
    counts: Sinogram  # kind="counts"
    open_beam: tuple  # CountSample per detector, long integration
    samples: np.ndarray  # open-beam repeats, shape (repeats, n_detectors)
    tau: float


def substream(seed: int, stream_id: int) -> np.random.Generator:
    """Deterministic per-task RNG stream derived from (seed, stream_id)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream_id)]))


def effective_params(model: DetectorModel):
    """(epsilon, nu, d): detection efficiency, spurious rate, overdispersion."""
    s = model.settings
    h = s.gain * (s.hv / model.hv_ref) ** model.pmt_exponent
    eps = float(ndtr((h - s.lld) / model.sigma_h))
    eps = min(max(eps, _EPS_CLAMP), 1.0 - _EPS_CLAMP)
    nu = model.nu0 * np.exp(-s.lld / model.lld0)
    d = 1.0 + (h / model.h_sat) ** 2
    return eps, float(nu), float(d)


def _draw(model, path_attenuation, rng, duration=None, size=None):
    """Raw count draw(s); scalar when size is None."""
    eps, nu, d = effective_params(model)
    if duration is None:
        duration = model.settings.tau
    lam = eps * model.i0_rate * np.exp(-path_attenuation) * duration
    counts = rng.poisson(lam, size=size)
    mean_sp = nu * duration
    if mean_sp > 0:
        if d > 1.0 + 1e-12:
            # negative binomial with mean m and variance d*m
            counts = counts + rng.negative_binomial(mean_sp / (d - 1.0), 1.0 / d, size=size)
        else:
            counts = counts + rng.poisson(mean_sp, size=size)
    return counts


def sample_counts(model: DetectorModel, path_attenuation: float,
                  rng: np.random.Generator) -> CountSample:
    """Simulate one measurement of a ray with the given path attenuation."""
    if path_attenuation < 0:
        raise ValueError("path_attenuation must be >= 0")
    return CountSample(int(_draw(model, path_attenuation, rng)), model.settings.tau)


def sample_scan(attenuation: Sinogram, model: DetectorModel, repeats: int,
                seed: int) -> ScanResult:
    """Sample a counts sinogram plus open-beam data from a noise-free
    attenuation sinogram.

    Stream ids: ray (v, k) -> v*K + k; per-detector open-beam reference
    (integrated over repeats*tau) -> V*K + k; open-beam repeat vector for
    detector k -> V*K + K + k.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if attenuation.kind != "attenuation":
        raise ValueError("expected an attenuation sinogram")
    vals = attenuation.values
    n_views, n_det = vals.shape
    counts = np.empty((n_views, n_det))
    for v in range(n_views):
        for k in range(n_det):
            counts[v, k] = _draw(model, vals[v, k], substream(seed, v * n_det + k))
    tau = model.settings.tau
    ob_duration = repeats * tau
    open_beam = tuple(
        CountSample(
            int(_draw(model, 0.0, substream(seed, n_views * n_det + k),
                      duration=ob_duration)),
            ob_duration,
        )
        for k in range(n_det)
    )
    samples = np.empty((repeats, n_det))
    for k in range(n_det):
        samples[:, k] = _draw(
            model, 0.0, substream(seed, n_views * n_det + n_det + k), size=repeats
        )
    sino = Sinogram(counts, kind="counts", geom=attenuation.geom, seed=int(seed))
    return ScanResult(sino, open_beam, samples, tau)


def scan(phantom: Phantom, geom: FanGeometry, model: DetectorModel,
         repeats: int, seed: int) -> ScanResult:
    """Full simulated acquisition: exact line integrals, then counting noise."""
    return sample_scan(ideal_sinogram(phantom, geom), model, repeats, seed)


def counts_to_projection(counts: Sinogram, open_beam, duration=None) -> Sinogram:
    """Beer-Lambert inversion: p = ln(I0_k / max(counts, 1)).

    open_beam is one CountSample per detector; when its duration differs
    from the per-ray measurement time, the reference is rate-normalized
    first. Negative projections (counts above the open beam) clamp to 0.
    """
    if counts.kind != "counts":
        raise ValueError("expected a counts sinogram")
    refs = []
    for ob in open_beam:
        ref = ob.counts
        if ref <= 0:
            raise ValueError("open-beam counts must be > 0 for every detector")
        if duration is not None and ob.duration != duration:
            ref = ref * duration / ob.duration
        refs.append(ref)
    refs = np.asarray(refs, dtype=float)
    if refs.size != counts.values.shape[1]:
        raise ValueError("open_beam must have one sample per detector")
    floored = np.maximum(counts.values, 1.0)
    p = np.log(refs[None, :] / floored)
    p = np.maximum(p, 0.0)
    return Sinogram(p, kind="attenuation", geom=counts.geom, seed=counts.seed)
