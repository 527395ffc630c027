"""Metrics, synthetic phantoms, and the benchmark harness.

The clinical data behind the original figures is not distributable, so the
harness runs pipeline configurations over synthetic phantoms with known
ground truth and aggregates Dice and seed-error statistics per
configuration.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import PipelineConfig
from .grid import FG, GridError, ImageGrid, SeedMask
from .segmenters import PipelineError, segment


class MetricsError(ValueError):
    """Raised on undefined metrics (dim mismatch, empty seed set)."""


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """Dice overlap 2|A n B| / (|A| + |B|); two empty masks agree vacuously."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise MetricsError(f"mask dims differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.count_nonzero(a & b)) / total


def seed_error(seeds: SeedMask, truth: np.ndarray) -> float:
    """Fraction of FG seed voxels lying on ground-truth background."""
    truth = np.asarray(truth, dtype=bool)
    if seeds.dims != truth.shape:
        raise MetricsError(f"dims differ: {seeds.dims} vs {truth.shape}")
    fg = seeds.labels == FG
    n_fg = int(fg.sum())
    if n_fg == 0:
        raise MetricsError("seed error rate undefined without FG seeds")
    return int(np.count_nonzero(fg & ~truth)) / n_fg


@dataclass
class Metrics:
    dice: float
    fg_seed_error_rate: float
    fg_seed_count: int
    bg_seed_count: int
    runtime_ms: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "dice": self.dice,
            "fg_seed_error_rate": self.fg_seed_error_rate,
            "fg_seed_count": self.fg_seed_count,
            "bg_seed_count": self.bg_seed_count,
            "runtime_ms": dict(self.runtime_ms),
        }


# ---------------------------------------------------------------------------
# Deterministic RNG
#
# Phantoms must be bit-reproducible across runs and languages, so noise
# comes from a fixed, named shift-register generator rather than platform
# RNGs.

_MASK64 = (1 << 64) - 1
_XS_MULT = 0x2545F4914F6CDD1D


class XorShift64Star:
    """xorshift64* generator; uniform doubles take the top 53 bits."""

    ALGORITHM = "xorshift64*"

    def __init__(self, seed: int):
        self.state = (int(seed) & _MASK64) or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self.state
        x ^= (x >> 12)
        x ^= (x << 25) & _MASK64
        x ^= (x >> 27)
        self.state = x
        return (x * _XS_MULT) & _MASK64

    def random(self) -> float:
        """Uniform double in (0, 1]."""
        return ((self.next_u64() >> 11) + 1) * 2.0 ** -53

    def uniforms(self, n: int) -> np.ndarray:
        return np.array([self.random() for _ in range(n)], dtype=np.float64)

    def normals(self, n: int) -> np.ndarray:
        """Standard normals via Box-Muller on consecutive uniform pairs."""
        pairs = (n + 1) // 2
        out = np.empty(2 * pairs)
        for i in range(pairs):
            u1 = self.random()
            u2 = self.random()
            r = math.sqrt(-2.0 * math.log(u1))
            out[2 * i] = r * math.cos(2.0 * math.pi * u2)
            out[2 * i + 1] = r * math.sin(2.0 * math.pi * u2)
        return out[:n]


# ---------------------------------------------------------------------------
# Phantoms

@dataclass(frozen=True)
class PhantomSpec:
    """Synthetic object descriptor; fully determines the generated volume."""

    shape: str = "disk"  # disk | ellipse | two-blob
    dims: tuple[int, ...] = (64, 64)
    radius: float = 12.0
    radii: tuple[float, ...] | None = None  # ellipse semi-axes, slowest axis first
    centers: tuple[tuple[float, ...], ...] | None = None
    contrast: float = 0.6
    noise_sigma: float = 0.05
    seed: int = 0
    background: float = 0.2

    def name(self) -> str:
        return (
            f"{self.shape}-{'x'.join(str(d) for d in self.dims)}"
            f"-c{self.contrast:g}-n{self.noise_sigma:g}-s{self.seed}"
        )

    def to_json(self) -> dict:
        return {
            "shape": self.shape,
            "dims": list(self.dims),
            "radius": self.radius,
            "radii": list(self.radii) if self.radii else None,
            "centers": [list(c) for c in self.centers] if self.centers else None,
            "contrast": self.contrast,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "background": self.background,
            "rng": XorShift64Star.ALGORITHM,
        }

    @staticmethod
    def from_json(data: dict) -> "PhantomSpec":
        return PhantomSpec(
            shape=data.get("shape", "disk"),
            dims=tuple(data["dims"]),
            radius=float(data.get("radius", 12.0)),
            radii=tuple(data["radii"]) if data.get("radii") else None,
            centers=tuple(tuple(c) for c in data["centers"]) if data.get("centers") else None,
            contrast=float(data.get("contrast", 0.6)),
            noise_sigma=float(data.get("noise_sigma", 0.05)),
            seed=int(data.get("seed", 0)),
            background=float(data.get("background", 0.2)),
        )


@dataclass(frozen=True)
class Phantom:
    grid: ImageGrid
    truth: np.ndarray
    spec: PhantomSpec


def _ellipsoid_mask(dims, center, radii) -> np.ndarray:
    coords = np.indices(dims, dtype=np.float64)
    acc = np.zeros(dims)
    for axis in range(len(dims)):
        acc += ((coords[axis] - center[axis]) / radii[axis]) ** 2
    return acc <= 1.0


def make_phantom(spec: PhantomSpec) -> Phantom:
    """Rasterize the descriptor and add deterministic noise.

    The object must sit entirely inside the volume with at least a 2-voxel
    border margin so border BG seeding stays valid.
    """
    dims = tuple(int(d) for d in spec.dims)
    if not 0.0 < spec.contrast <= 1.0:
        raise GridError("phantom contrast must lie in (0, 1]")
    if spec.noise_sigma < 0:
        raise GridError("phantom noise sigma must be >= 0")
    default_center = tuple((d - 1) / 2.0 for d in dims)

    if spec.shape == "disk":
        centers = spec.centers or (default_center,)
        radii_list = [(spec.radius,) * len(dims)]
    elif spec.shape == "ellipse":
        centers = spec.centers or (default_center,)
        radii_list = [spec.radii or (spec.radius,) * len(dims)]
    elif spec.shape == "two-blob":
        if spec.centers is not None:
            centers = spec.centers
        else:
            off = max(spec.radius + 2.0, dims[-1] / 4.0)
            c = list(default_center)
            left = tuple(c[:-1] + [c[-1] - off])
            right = tuple(c[:-1] + [c[-1] + off])
            centers = (left, right)
        radii_list = [(spec.radius,) * len(dims)] * len(centers)
    else:
        raise GridError(f"unknown phantom shape {spec.shape!r}")

    truth = np.zeros(dims, dtype=bool)
    for center, radii in zip(centers, radii_list):
        truth |= _ellipsoid_mask(dims, center, radii)
    if not truth.any():
        raise GridError("phantom object rasterized to nothing")

    margin = 2
    coords = np.argwhere(truth)
    if (coords.min(axis=0) < margin).any() or (
        coords.max(axis=0) > np.array(dims) - 1 - margin
    ).any():
        raise GridError("phantom object must keep a 2-voxel margin from every face")

    values = np.full(dims, spec.background, dtype=np.float64)
    values[truth] += spec.contrast
    if spec.noise_sigma > 0:
        rng = XorShift64Star(spec.seed)
        noise = rng.normals(int(np.prod(dims))).reshape(dims)
        values = values + spec.noise_sigma * noise
    values = np.clip(values, 0.0, 1.0)
    grid = ImageGrid(values, (1.0,) * len(dims), 0.0, 1.0)
    return Phantom(grid=grid, truth=truth, spec=spec)


# ---------------------------------------------------------------------------
# Benchmark harness

@dataclass
class BenchRow:
    config: str
    phantom: str
    metrics: Metrics | None = None
    error: str | None = None

    def to_json(self) -> dict:
        out: dict = {"config": self.config, "phantom": self.phantom}
        if self.metrics is not None:
            out.update(self.metrics.to_json())
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class BenchAggregate:
    config: str
    runs: int
    failures: int
    dice_median: float | None
    dice_mean: float | None
    dice_std: float | None
    seed_error_median: float | None

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "runs": self.runs,
            "failures": self.failures,
            "dice_median": self.dice_median,
            "dice_mean": self.dice_mean,
            "dice_std": self.dice_std,
            "seed_error_median": self.seed_error_median,
        }


@dataclass
class BenchReport:
    rows: list[BenchRow]
    aggregates: list[BenchAggregate]

    def to_json(self) -> dict:
        return {
            "rows": [r.to_json() for r in self.rows],
            "aggregates": [a.to_json() for a in self.aggregates],
            "rng": XorShift64Star.ALGORITHM,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["config", "phantom", "dice", "fg_seed_error_rate",
             "fg_seed_count", "bg_seed_count", "total_ms", "error"]
        )
        for r in self.rows:
            if r.metrics is None:
                writer.writerow([r.config, r.phantom, "", "", "", "", "", r.error])
            else:
                m = r.metrics
                writer.writerow(
                    [r.config, r.phantom, f"{m.dice:.6f}", f"{m.fg_seed_error_rate:.6f}",
                     m.fg_seed_count, m.bg_seed_count,
                     f"{sum(m.runtime_ms.values()):.3f}", ""]
                )
        writer.writerow([])
        writer.writerow(
            ["config", "runs", "failures", "dice_median", "dice_mean", "dice_std",
             "seed_error_median"]
        )
        for a in self.aggregates:
            writer.writerow(
                [a.config, a.runs, a.failures,
                 "" if a.dice_median is None else f"{a.dice_median:.6f}",
                 "" if a.dice_mean is None else f"{a.dice_mean:.6f}",
                 "" if a.dice_std is None else f"{a.dice_std:.6f}",
                 "" if a.seed_error_median is None else f"{a.seed_error_median:.6f}"]
            )
        return buf.getvalue()


def evaluate_run(config: PipelineConfig, phantom: Phantom) -> Metrics:
    """Segment one phantom and score it against its ground truth."""
    t0 = time.perf_counter()
    result = segment(config, phantom.grid)
    total = (time.perf_counter() - t0) * 1000.0
    timings = dict(result.timings_ms)
    timings["total"] = total
    return Metrics(
        dice=dice(result.label_map.fg, phantom.truth),
        fg_seed_error_rate=seed_error(result.seeds, phantom.truth),
        fg_seed_count=result.seeds.fg_count,
        bg_seed_count=result.seeds.bg_count,
        runtime_ms=timings,
    )


def benchmark(
    configs: Sequence[tuple[str, PipelineConfig]],
    phantoms: Sequence[Phantom],
) -> BenchReport:
    """Run every configuration over every phantom.

    Individual failures become error-tagged rows and never abort the sweep;
    row order is deterministic (configs outer, phantoms inner).
    """
    if not configs or not phantoms:
        raise MetricsError("benchmark needs at least one config and one phantom")
    rows: list[BenchRow] = []
    aggregates: list[BenchAggregate] = []
    for name, config in configs:
        per_config: list[BenchRow] = []
        for phantom in phantoms:
            row = BenchRow(config=name, phantom=phantom.spec.name())
            try:
                row.metrics = evaluate_run(config, phantom)
            except (PipelineError, MetricsError, GridError) as exc:
                row.error = str(exc)
            per_config.append(row)
        rows.extend(per_config)
        ok = [r.metrics for r in per_config if r.metrics is not None]
        dices = np.array([m.dice for m in ok]) if ok else None
        errs = np.array([m.fg_seed_error_rate for m in ok]) if ok else None
        aggregates.append(
            BenchAggregate(
                config=name,
                runs=len(per_config),
                failures=len(per_config) - len(ok),
                dice_median=float(np.median(dices)) if dices is not None else None,
                dice_mean=float(dices.mean()) if dices is not None else None,
                dice_std=float(dices.std()) if dices is not None else None,
                seed_error_median=float(np.median(errs)) if errs is not None else None,
            )
        )
    return BenchReport(rows=rows, aggregates=aggregates)


def write_report(report: BenchReport, base_path: str) -> tuple[str, str]:
    """Emit CSV and JSON next to each other; returns the two paths."""
    base = base_path
    for suffix in (".csv", ".json"):
        if base.endswith(suffix):
            base = base[: -len(suffix)]
    csv_path, json_path = base + ".csv", base + ".json"
    with open(csv_path, "w") as fh:
        fh.write(report.to_csv())
    with open(json_path, "w") as fh:
        json.dump(report.to_json(), fh, indent=2)
        fh.write("\n")
    return csv_path, json_path
