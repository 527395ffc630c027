"""Seed refinement: Gaussian weighting around the FG center of mass, and
morphological cleanup of the FG seed set."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import BG, FG, UNLABELED, GridError, SeedMask, StrengthMap


@dataclass(frozen=True)
class WeightParams:
    """Gaussian weighting of seeds.

    The kernel width adapts to object scale: sigma = ``sigma_factor`` times
    the FG bounding-box diagonal (in voxels).  Background seeds are certain
    by construction and get the constant ``bg_weight``.
    """

    sigma_factor: float = 0.5
    bg_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.sigma_factor <= 0:
            raise GridError("sigma_factor must be positive")
        if not 0.0 <= self.bg_weight <= 1.0:
            raise GridError("bg_weight must lie in [0, 1]")


@dataclass(frozen=True)
class MorphParams:
    """FG cleanup variant: opening, erosion, or none.

    The structuring element is the face-adjacency cross (3 voxels wide per
    axis); voxels clipped at the border count as absent, so border FG never
    survives erosion.
    """

    variant: str = "none"
    iterations: int = 1

    def __post_init__(self) -> None:
        if self.variant not in ("opening", "erosion", "none"):
            raise GridError(f"unknown morphology variant {self.variant!r}")
        if self.variant != "none" and self.iterations < 1:
            raise GridError("morphology iterations must be >= 1")


def weight_seeds(mask: SeedMask, params: WeightParams | None = None) -> StrengthMap:
    """Gaussian kernel weights shifted to the FG seed centroid.

    FG voxel v gets ``exp(-||v - c||^2 / 2 sigma^2)`` with c the unweighted
    FG centroid; BG voxels get ``bg_weight``; unlabeled voxels get zero.
    The centroid is taken over FG only; border BG seeds would otherwise
    drag it to the volume center regardless of object position.
    """
    if params is None:
        params = WeightParams()
    fg_coords = np.argwhere(mask.labels == FG)
    if fg_coords.shape[0] == 0:
        raise GridError("weighting is undefined for an empty FG seed set")
    centroid = fg_coords.mean(axis=0)
    span = fg_coords.max(axis=0) - fg_coords.min(axis=0)
    diagonal = math.sqrt(float((span * span).sum()))
    weights = np.zeros(mask.dims, dtype=np.float64)
    if diagonal == 0.0:
        # Single FG voxel: it sits at the centroid.
        weights[tuple(fg_coords[0])] = 1.0
    else:
        sigma = params.sigma_factor * diagonal
        d2 = ((fg_coords - centroid) ** 2).sum(axis=1)
        weights[tuple(fg_coords.T)] = np.exp(-d2 / (2.0 * sigma * sigma))
    weights[mask.labels == BG] = params.bg_weight
    strengths = StrengthMap(weights)
    strengths.check_zero_on_unlabeled(mask)
    return strengths


def uniform_strengths(mask: SeedMask, bg_weight: float = 1.0) -> StrengthMap:
    """Strength map with full confidence on every seed (weighting off)."""
    weights = np.zeros(mask.dims, dtype=np.float64)
    weights[mask.labels == FG] = 1.0
    weights[mask.labels == BG] = bg_weight
    return StrengthMap(weights)


def _erode(fg: np.ndarray) -> np.ndarray:
    """One erosion by the face cross; out-of-grid neighbors count as absent."""
    out = fg.copy()
    for axis in range(fg.ndim):
        for step in (-1, 1):
            shifted = np.zeros_like(fg)
            dst = [slice(None)] * fg.ndim
            src = [slice(None)] * fg.ndim
            dst[axis] = slice(max(0, -step), fg.shape[axis] - max(0, step))
            src[axis] = slice(max(0, step), fg.shape[axis] - max(0, -step))
            shifted[tuple(dst)] = fg[tuple(src)]
            out &= shifted
    return out


def _dilate(fg: np.ndarray) -> np.ndarray:
    """One dilation by the face cross, clipped at the grid border."""
    out = fg.copy()
    for axis in range(fg.ndim):
        for step in (-1, 1):
            dst = [slice(None)] * fg.ndim
            src = [slice(None)] * fg.ndim
            dst[axis] = slice(max(0, -step), fg.shape[axis] - max(0, step))
            src[axis] = slice(max(0, step), fg.shape[axis] - max(0, -step))
            out[tuple(dst)] |= fg[tuple(src)]
    return out


def morph_fg(mask: SeedMask, params: MorphParams | None = None) -> SeedMask:
    """Apply the configured morphology to the FG set only.

    BG labels are untouched, and the dilation half of an opening never
    converts a BG voxel.  The FG set may come out empty; callers decide
    whether that is an error.
    """
    if params is None:
        params = MorphParams()
    if params.variant == "none":
        return mask
    fg = mask.labels == FG
    for _ in range(params.iterations):
        fg = _erode(fg)
    if params.variant == "opening":
        bg = mask.labels == BG
        for _ in range(params.iterations):
            fg = _dilate(fg) & ~bg
    out = np.where(mask.labels == BG, BG, UNLABELED).astype(np.uint8)
    out[fg] = FG
    return SeedMask(out)
