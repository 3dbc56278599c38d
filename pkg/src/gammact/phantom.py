"""Disc-based cyber phantom: attenuation map definition and rasterization.

Coordinate convention (shared with the reconstruction code): physical
coordinates are right-handed with x to the right and y up; in rasterized
arrays row 0 is the top of the image, i.e. y decreases with row index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DiscSpec",
    "Phantom",
    "GridSpec",
    "MU_PERSPEX",
    "MU_ALUMINIUM",
    "MU_IRON",
    "paper_phantom",
    "mu_at",
    "rasterize",
]

# Linear attenuation coefficients (cm^-1) at the Cs-137 line (662 keV).
# Perspex/PMMA is derived from tabulated mass attenuation (~0.0806 cm^2/g)
# times density 1.19 g/cm^3; aluminium and iron are the nominal values for
# the two insert materials.
MU_PERSPEX = 0.096
MU_ALUMINIUM = 0.211
MU_IRON = 0.544


@dataclass(frozen=True)
class DiscSpec:
    """Homogeneous disc with a linear attenuation coefficient.

    Parameters
    ----------
    cx, cy : float
        Disc center (cm).
    radius : float
        Disc radius (cm), strictly positive.
    mu : float
        Linear attenuation coefficient (cm^-1), non-negative.
    """

    cx: float
    cy: float
    radius: float
    mu: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disc radius must be > 0")
        if self.mu < 0:
            raise ValueError("disc mu must be >= 0")


@dataclass(frozen=True)
class Phantom:
    """A background disc plus non-overlapping insert discs.

    Insert attenuation replaces (does not add to) the background value,
    matching a drilled-and-filled physical phantom.
    """

    background: DiscSpec
    inserts: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "inserts", tuple(self.inserts))
        bg = self.background
        for ins in self.inserts:
            d = float(np.hypot(ins.cx - bg.cx, ins.cy - bg.cy))
            if d + ins.radius > bg.radius + 1e-12:
                raise ValueError("insert disc must lie inside the background disc")
        for i, a in enumerate(self.inserts):
            for b in self.inserts[i + 1 :]:
                if np.hypot(a.cx - b.cx, a.cy - b.cy) < a.radius + b.radius - 1e-12:
                    raise ValueError("insert discs must not overlap")


@dataclass(frozen=True)
class GridSpec:
    """Square pixel grid centered on the phantom origin."""

    n_pixels: int = 128
    fov: float = 14.0

    def __post_init__(self):
        if self.n_pixels < 2:
            raise ValueError("n_pixels must be >= 2")
        if not self.fov > 0:
            raise ValueError("fov must be > 0")

    @property
    def pixel_size(self) -> float:
        return self.fov / self.n_pixels

    def centers(self):
        """Pixel-center coordinates: x along columns, y along rows (top down)."""
        half = 0.5 * self.fov
        step = self.pixel_size
        x = -half + (np.arange(self.n_pixels) + 0.5) * step
        y = half - (np.arange(self.n_pixels) + 0.5) * step
        return x, y


def paper_phantom(
    mu_background: float = MU_PERSPEX,
    aluminium_center: tuple = (-2.5, 0.0),
    iron_center: tuple = (3.0, 2.0),
) -> Phantom:
    """12 cm Perspex disc with aluminium (3.8 cm) and iron (0.8 cm) inserts.

    Insert positions are configurable; the defaults keep both inserts well
    inside the background and apart from each other.
    """
    bg = DiscSpec(0.0, 0.0, 6.0, mu_background)
    al = DiscSpec(aluminium_center[0], aluminium_center[1], 1.9, MU_ALUMINIUM)
    fe = DiscSpec(iron_center[0], iron_center[1], 0.4, MU_IRON)
    return Phantom(bg, (al, fe))


def mu_at(phantom: Phantom, x, y):
    """Pointwise attenuation: insert value inside an insert, background value
    inside the background disc, zero outside. Vectorized over x, y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    bg = phantom.background
    out = np.where(
        (x - bg.cx) ** 2 + (y - bg.cy) ** 2 <= bg.radius**2, bg.mu, 0.0
    )
    for ins in phantom.inserts:
        inside = (x - ins.cx) ** 2 + (y - ins.cy) ** 2 <= ins.radius**2
        out = np.where(inside, ins.mu, out)
    if out.ndim == 0:
        return float(out)
    return out


def rasterize(phantom: Phantom, grid: GridSpec, supersample: int = 1) -> np.ndarray:
    """Rasterize the phantom onto ``grid``.

    Each pixel holds the mean of ``mu_at`` over ``supersample`` x
    ``supersample`` sub-points placed uniformly inside the pixel;
    ``supersample=1`` samples the pixel center.
    """
    ss = int(supersample)
    if ss < 1:
        raise ValueError("supersample must be >= 1")
    n = grid.n_pixels
    half = 0.5 * grid.fov
    sub = (np.arange(n * ss) + 0.5) * (grid.fov / (n * ss))
    x = -half + sub
    y = half - sub
    vals = mu_at(phantom, x[None, :], y[:, None])
    return vals.reshape(n, ss, n, ss).mean(axis=(1, 3))
