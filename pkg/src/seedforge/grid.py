"""Raster, mask, and label types shared by every pipeline stage.

Arrays are stored row-major with the last axis fastest.  For a 2-D image of
shape ``(ny, nx)`` the voxel at wire coordinate ``(x, y)`` is ``arr[y, x]``;
for 3-D ``(nz, ny, nx)`` it is ``arr[z, y, x]``.  All types are immutable
after construction (backing arrays are frozen) and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

# Per-voxel label codes used throughout the package.
UNLABELED = 0
FG = 1
BG = 2


class GridError(ValueError):
    """Raised on malformed rasters or invalid grid parameters."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ImageGrid:
    """Scalar 2-D/3-D raster with values normalized to [0, 1].

    ``raw_min`` / ``raw_max`` keep the pre-normalization range so values can
    be mapped back for round-trip export.
    """

    values: np.ndarray
    spacing: tuple[float, ...]
    raw_min: float
    raw_max: float

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim not in (2, 3):
            raise GridError(f"grid must be 2-D or 3-D, got {v.ndim}-D")
        if v.size == 0 or min(v.shape) < 1:
            raise GridError("grid must be non-empty")
        if len(self.spacing) != v.ndim:
            raise GridError("spacing length must match dimensionality")
        lo, hi = float(v.min()), float(v.max())
        if lo < 0.0 or hi > 1.0:
            raise GridError("grid values must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    def with_values(self, values: np.ndarray) -> "ImageGrid":
        """New grid sharing spacing and raw range, with replaced values."""
        return ImageGrid(values, self.spacing, self.raw_min, self.raw_max)

    def inverted(self) -> "ImageGrid":
        return self.with_values(1.0 - self.values)


@dataclass(frozen=True)
class SeedMask:
    """Ternary per-voxel labeling: UNLABELED / FG / BG."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        lab = np.asarray(self.labels, dtype=np.uint8)
        if lab.ndim not in (2, 3):
            raise GridError("seed mask must be 2-D or 3-D")
        if not np.isin(lab, (UNLABELED, FG, BG)).all():
            raise GridError("seed mask labels must be UNLABELED, FG or BG")
        object.__setattr__(self, "labels", _frozen(lab))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.labels.shape

    @property
    def fg(self) -> np.ndarray:
        return self.labels == FG

    @property
    def bg(self) -> np.ndarray:
        return self.labels == BG

    @property
    def fg_count(self) -> int:
        return int(np.count_nonzero(self.labels == FG))

    @property
    def bg_count(self) -> int:
        return int(np.count_nonzero(self.labels == BG))

    def fg_only(self) -> "SeedMask":
        """The mask restricted to its FG voxels (BG dropped)."""
        out = np.where(self.labels == FG, FG, UNLABELED).astype(np.uint8)
        return SeedMask(out)

    @staticmethod
    def empty(dims: Sequence[int]) -> "SeedMask":
        return SeedMask(np.zeros(tuple(dims), dtype=np.uint8))

    @staticmethod
    def from_fg(fg: np.ndarray) -> "SeedMask":
        return SeedMask(np.where(fg, FG, UNLABELED).astype(np.uint8))


@dataclass(frozen=True)
class StrengthMap:
    """Per-voxel seed weight in [0, 1]; zero on all unlabeled voxels."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.min() < 0.0 or w.max() > 1.0:
            raise GridError("strength weights must lie in [0, 1]")
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.weights.shape

    def check_zero_on_unlabeled(self, mask: SeedMask) -> None:
        """Assert the paired-mask invariant: weight > 0 only on seeds."""
        if (self.weights[mask.labels == UNLABELED] != 0.0).any():
            raise GridError("strength map has nonzero weight on unlabeled voxel")


@dataclass(frozen=True)
class LabelMap:
    """Binary segmentation result, optionally with an FG-probability field.

    When ``fg_probability`` is present, ``label == FG`` iff probability is at
    least 0.5 (ties go to FG).
    """

    labels: np.ndarray
    fg_probability: np.ndarray | None = None

    def __post_init__(self) -> None:
        lab = np.asarray(self.labels, dtype=np.uint8)
        if not np.isin(lab, (FG, BG)).all():
            raise GridError("label map must be binary FG/BG")
        object.__setattr__(self, "labels", _frozen(lab))
        if self.fg_probability is not None:
            p = np.asarray(self.fg_probability, dtype=np.float64)
            if p.shape != lab.shape:
                raise GridError("probability field shape mismatch")
            if ((p >= 0.5) != (lab == FG)).any():
                raise GridError("labels inconsistent with fg_probability >= 0.5 rule")
            object.__setattr__(self, "fg_probability", _frozen(p))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.labels.shape

    @property
    def fg(self) -> np.ndarray:
        return self.labels == FG

    @staticmethod
    def from_probability(p: np.ndarray) -> "LabelMap":
        labels = np.where(p >= 0.5, FG, BG).astype(np.uint8)
        return LabelMap(labels, p)


@dataclass(frozen=True)
class Connectivity:
    """Face adjacency on the lattice: 4-neighborhood in 2-D, 6 in 3-D."""

    ndim: int
    offsets: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self) -> None:
        offs = []
        for axis in range(self.ndim):
            for step in (-1, 1):
                o = [0] * self.ndim
                o[axis] = step
                offs.append(tuple(o))
        object.__setattr__(self, "offsets", tuple(offs))

    def neighbors(self, dims: Sequence[int], coord: Sequence[int]) -> Iterator[tuple[int, ...]]:
        """In-bounds face neighbors of ``coord``."""
        for off in self.offsets:
            n = tuple(c + o for c, o in zip(coord, off))
            if all(0 <= ni < d for ni, d in zip(n, dims)):
                yield n


def normalize_intensities(raw: np.ndarray, spacing: Sequence[float] | None = None) -> ImageGrid:
    """Affinely map a raw raster onto [0, 1], keeping the original range.

    Constant rasters map to all-zeros rather than erroring so degenerate
    inputs still flow through the pipeline.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if arr.size == 0:
        raise GridError("cannot ingest an empty raster")
    if arr.ndim not in (2, 3):
        raise GridError(f"raster must be 2-D or 3-D, got {arr.ndim}-D")
    lo, hi = float(arr.min()), float(arr.max())
    if hi > lo:
        values = (arr - lo) / (hi - lo)
    else:
        values = np.zeros_like(arr)
    if spacing is None:
        spacing = (1.0,) * arr.ndim
    return ImageGrid(values, tuple(float(s) for s in spacing), lo, hi)


def mask_border(grid_dims: Sequence[int], thickness: int) -> SeedMask:
    """Label every voxel within ``thickness`` of any face as BG.

    Valid BG seeds can be generated along the volume border whenever the
    object lies entirely inside the image; the interior stays unlabeled.
    """
    dims = tuple(int(d) for d in grid_dims)
    if thickness < 1:
        raise GridError("border thickness must be >= 1")
    if 2 * thickness >= min(dims):
        raise GridError(
            f"border thickness {thickness} too large for dims {dims}"
        )
    labels = np.full(dims, BG, dtype=np.uint8)
    interior = tuple(slice(thickness, d - thickness) for d in dims)
    labels[interior] = UNLABELED
    return SeedMask(labels)


def merge_seeds(fg: SeedMask, bg: SeedMask) -> tuple[SeedMask, int]:
    """Combine two seed masks; BG wins on conflict.

    Border BG seeds are certain by construction, so a voxel claimed by both
    sides ends up BG.  Returns the merged mask and the conflict count.
    """
    if fg.dims != bg.dims:
        raise GridError(f"seed mask dims differ: {fg.dims} vs {bg.dims}")
    any_bg = (fg.labels == BG) | (bg.labels == BG)
    any_fg = (fg.labels == FG) | (bg.labels == FG)
    conflicts = int(np.count_nonzero(any_bg & any_fg))
    out = np.zeros(fg.dims, dtype=np.uint8)
    out[any_fg] = FG
    out[any_bg] = BG  # BG precedence
    return SeedMask(out), conflicts
