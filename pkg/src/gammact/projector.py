"""Analytic fan-beam forward model.

View angle beta is measured counter-clockwise from the +x axis; the source
sits on the -x side at beta = 0, i.e. at ``-D * (cos beta, sin beta)`` with
D the source-to-center distance. The five (or more) detector bins are
equiangular on an arc centered at the source, with bin-center fan angles
``gamma_k = -fan/2 + (k + 0.5) * fan / n_detectors``.

Line integrals through the disc phantom are computed in closed form from
ray-circle chord lengths, so the forward model is exact for this phantom
class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .phantom import Phantom

__all__ = [
    "FanGeometry",
    "Ray",
    "Sinogram",
    "paper_geometry",
    "fan_rays",
    "line_integral",
    "line_integrals",
    "ideal_sinogram",
]


@dataclass(frozen=True)
class FanGeometry:
    """Fan-beam acquisition layout (distances in cm, angles in degrees)."""

    source_to_center: float
    source_to_detector: float
    fan_angle: float
    n_detectors: int
    view_angles: tuple

    def __post_init__(self):
        object.__setattr__(self, "view_angles", tuple(float(v) for v in self.view_angles))
        if not 0 < self.source_to_center < self.source_to_detector:
            raise ValueError("require 0 < source_to_center < source_to_detector")
        if not self.fan_angle > 0:
            raise ValueError("fan_angle must be > 0")
        if self.n_detectors < 1:
            raise ValueError("n_detectors must be >= 1")
        va = self.view_angles
        if any(not 0 <= v < 360 for v in va):
            raise ValueError("view angles must lie in [0, 360)")
        if any(b <= a for a, b in zip(va, va[1:])):
            raise ValueError("view angles must be strictly increasing")

    @property
    def gammas(self) -> np.ndarray:
        """Equiangular detector bin centers (degrees), symmetric about 0."""
        k = np.arange(self.n_detectors)
        return -0.5 * self.fan_angle + (k + 0.5) * self.fan_angle / self.n_detectors

    @property
    def n_views(self) -> int:
        return len(self.view_angles)


@dataclass(frozen=True)
class Ray:
    """A line through the plane: origin (source) plus unit direction.

    gamma/beta record the fan and view angles the ray came from; they are
    carried for rebinning and not re-derived from the direction.
    """

    ox: float
    oy: float
    dx: float
    dy: float
    gamma: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        norm = float(np.hypot(self.dx, self.dy))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("ray direction must be a unit vector")


@dataclass
class Sinogram:
    """2D projection array (views x detectors) with fan geometry metadata."""

    values: np.ndarray
    kind: str  # "counts" or "attenuation"
    geom: Optional[FanGeometry] = None
    seed: Optional[int] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("sinogram values must be a 2D array")
        if self.kind not in ("counts", "attenuation"):
            raise ValueError("sinogram kind must be 'counts' or 'attenuation'")


def paper_geometry(n_views: int = 36) -> FanGeometry:
    """Acquisition geometry of the physical experiment: 13.25 deg fan, five
    detectors, 52 cm source-to-detector, 26 cm source-to-center, views every
    360/n_views degrees (36 by default)."""
    views = tuple(np.arange(n_views) * (360.0 / n_views))
    return FanGeometry(
        source_to_center=26.0,
        source_to_detector=52.0,
        fan_angle=13.25,
        n_detectors=5,
        view_angles=views,
    )


def fan_rays(geom: FanGeometry, view_index: int):
    """Rays of one view, source through each detector bin center."""
    if not 0 <= view_index < geom.n_views:
        raise IndexError("view_index out of range")
    beta = geom.view_angles[view_index]
    b = np.radians(beta)
    ox = -geom.source_to_center * np.cos(b)
    oy = -geom.source_to_center * np.sin(b)
    rays = []
    for g in geom.gammas:
        ang = np.radians(beta + g)
        rays.append(Ray(float(ox), float(oy), float(np.cos(ang)), float(np.sin(ang)),
                        gamma=float(g), beta=float(beta)))
    return rays


def _chords(cx, cy, radius, ox, oy, dx, dy):
    # Chord length of the line (o, d) through the disc; 0 when it misses.
    rx = cx - ox
    ry = cy - oy
    cross = rx * dy - ry * dx
    h2 = radius**2 - cross**2
    return 2.0 * np.sqrt(np.maximum(h2, 0.0))


def line_integrals(phantom: Phantom, ox, oy, dx, dy):
    """Vectorized closed-form path attenuation for arrays of rays."""
    bg = phantom.background
    total = bg.mu * _chords(bg.cx, bg.cy, bg.radius, ox, oy, dx, dy)
    for ins in phantom.inserts:
        total = total + (ins.mu - bg.mu) * _chords(
            ins.cx, ins.cy, ins.radius, ox, oy, dx, dy
        )
    return total


def line_integral(phantom: Phantom, ray: Ray) -> float:
    """Exact line integral of the phantom attenuation along one ray."""
    return float(line_integrals(phantom, ray.ox, ray.oy, ray.dx, ray.dy))


def ideal_sinogram(phantom: Phantom, geom: FanGeometry) -> Sinogram:
    """Noise-free fan-beam sinogram: entry (v, k) is the line integral along
    detector k of view v."""
    beta = np.radians(np.asarray(geom.view_angles))[:, None]
    gam = np.radians(geom.gammas)[None, :]
    d = geom.source_to_center
    shape = np.broadcast_shapes(beta.shape, gam.shape)
    ox = np.broadcast_to(-d * np.cos(beta), shape)
    oy = np.broadcast_to(-d * np.sin(beta), shape)
    dx = np.cos(beta + gam)
    dy = np.sin(beta + gam)
    vals = line_integrals(phantom, ox, oy, dx, dy)
    return Sinogram(vals, kind="attenuation", geom=geom)
