"""Edge-preserving denoising of the input grid by bilateral filtering."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridError, ImageGrid


@dataclass(frozen=True)
class BilateralParams:
    """Bilateral kernel widths.

    ``sigma_spatial`` is in voxels, ``sigma_range`` in normalized intensity
    units; ``radius`` is the window half-width (defaults to 2 * sigma_spatial,
    rounded up).
    """

    sigma_spatial: float = 3.0
    sigma_range: float = 0.1
    radius: int = field(default=-1)

    def __post_init__(self) -> None:
        if self.sigma_spatial <= 0 or self.sigma_range <= 0:
            raise GridError("bilateral sigmas must be positive")
        if self.radius < 0:
            object.__setattr__(self, "radius", math.ceil(2.0 * self.sigma_spatial))
        if self.radius < 1:
            raise GridError("bilateral radius must be >= 1")


def bilateral_filter(grid: ImageGrid, params: BilateralParams | None = None) -> ImageGrid:
    """Brute-force bilateral filter over a clipped window.

    Each output voxel is the window sum of neighbor values weighted by
    ``exp(-||dx||^2 / 2*s_s^2) * exp(-(dI)^2 / 2*s_r^2)``, renormalized by
    the total weight.  Windows are clipped at the grid boundary (no padding),
    so border voxels see unbiased intensities.
    """
    if params is None:
        params = BilateralParams()
    values = grid.values
    inv_2ss = 1.0 / (2.0 * params.sigma_spatial ** 2)
    inv_2sr = 1.0 / (2.0 * params.sigma_range ** 2)
    r = params.radius

    num = np.zeros_like(values)
    den = np.zeros_like(values)
    ndim = values.ndim
    for offset in itertools.product(range(-r, r + 1), repeat=ndim):
        dist2 = sum(o * o for o in offset)
        w_spatial = math.exp(-dist2 * inv_2ss)
        # Overlap of the grid with itself shifted by `offset`.
        dst = tuple(
            slice(max(0, -o), values.shape[a] - max(0, o)) for a, o in enumerate(offset)
        )
        src = tuple(
            slice(max(0, o), values.shape[a] - max(0, -o)) for a, o in enumerate(offset)
        )
        center = values[dst]
        neigh = values[src]
        w = w_spatial * np.exp(-((neigh - center) ** 2) * inv_2sr)
        num[dst] += w * neigh
        den[dst] += w
    out = num / den
    # Convex combination of inputs; clip float noise at the range ends.
    np.clip(out, values.min(), values.max(), out=out)
    return grid.with_values(out)
