"""Foreground seed generation.

Four strategies produce FG seed candidates from the (pre-processed) grid:
Otsu thresholding, GMM component selection with PDF thresholding, and two
saliency detectors (minimum barrier distance, frequency tuned) sharing one
binarization rule.  All strategies assume the bright-object convention;
dark objects are handled by inverting the grid at ingestion.

Additional saliency strategies can be plugged in by registering any
``grid -> SaliencyMap`` callable in ``SALIENCY_STRATEGIES``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import GridError, ImageGrid, SeedMask, _frozen

VARIANCE_FLOOR = 1e-6


class SeedingError(ValueError):
    """Raised when a seeding strategy cannot produce a usable FG set."""


class DegenerateInputError(SeedingError):
    """Raised when the input has no usable intensity spread."""


@dataclass(frozen=True)
class SaliencyMap:
    """Per-voxel non-negative saliency, normalized to [0, 1] by its max."""

    scores: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.scores, dtype=np.float64)
        if s.min() < 0.0 or s.max() > 1.0:
            raise GridError("saliency scores must lie in [0, 1]")
        object.__setattr__(self, "scores", _frozen(s))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.scores.shape


@dataclass(frozen=True)
class GmmModel:
    """1-D Gaussian mixture over normalized intensity.

    ``components`` holds (weight, mean, variance) triples; weights sum to 1
    and variances are floored at ``VARIANCE_FLOOR``.
    """

    components: tuple[tuple[float, float, float], ...]
    converged: bool
    log_likelihoods: tuple[float, ...]

    def __post_init__(self) -> None:
        w = sum(c[0] for c in self.components)
        if abs(w - 1.0) > 1e-9:
            raise GridError(f"GMM weights sum to {w}, expected 1")
        if any(c[0] <= 0 for c in self.components):
            raise GridError("GMM weights must be positive")
        if any(c[2] < VARIANCE_FLOOR for c in self.components):
            raise GridError("GMM variance below floor")

    @property
    def k(self) -> int:
        return len(self.components)

    def component_pdf(self, index: int, x: np.ndarray) -> np.ndarray:
        """PDF of one component (without its mixture weight)."""
        _, mean, var = self.components[index]
        return np.exp(-((x - mean) ** 2) / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


@dataclass
class SeedingReport:
    """Diagnostics accompanying an emitted seed mask."""

    method: str
    fg_count: int = 0
    threshold: float | None = None
    gmm_component: int | None = None
    gmm_converged: bool | None = None
    mbd_passes: int | None = None
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "fg_count": self.fg_count,
            "threshold": self.threshold,
            "gmm_component": self.gmm_component,
            "gmm_converged": self.gmm_converged,
            "mbd_passes": self.mbd_passes,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class SeedingParams:
    method: str = "mbd"
    bins: int = 256
    gmm_k: int = 3
    gmm_max_iter: int = 200
    gmm_tol: float = 1e-6
    mbd_passes: int = 3
    top_fraction: float = 0.10


# ---------------------------------------------------------------------------
# Otsu

def otsu_threshold(values, bins: int = 256) -> float:
    """Bin-edge threshold maximizing between-class variance.

    Histograms the samples over their own range; the candidate split after
    bin ``k`` separates bins ``0..k`` from the rest, and the returned
    threshold is the upper edge of bin ``k``.  Ties break toward the lower
    threshold.
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    if bins < 2:
        raise GridError("otsu needs at least 2 bins")
    lo, hi = float(vals.min()), float(vals.max())
    if hi <= lo:
        raise DegenerateInputError("degenerate histogram: all samples identical")
    hist, edges = np.histogram(vals, bins=bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    counts = np.cumsum(hist)
    mass = np.cumsum(hist * centers)
    total, total_mass = counts[-1], mass[-1]

    w0 = counts.astype(np.float64)
    w1 = (total - counts).astype(np.float64)
    valid = (w0 > 0) & (w1 > 0)
    mu0 = np.divide(mass, w0, out=np.zeros(bins), where=valid)
    mu1 = np.divide(total_mass - mass, w1, out=np.zeros(bins), where=valid)
    between = np.where(valid, w0 * w1 * (mu0 - mu1) ** 2, 0.0)
    k = int(np.argmax(between))  # first max = lowest threshold
    return float(edges[k + 1])


def seed_otsu(grid: ImageGrid, bins: int = 256, report: SeedingReport | None = None) -> SeedMask:
    """FG = voxels at or above the Otsu threshold of the whole grid.

    A constant grid yields an empty FG mask plus a warning diagnostic
    instead of an error.
    """
    try:
        t = otsu_threshold(grid.values, bins)
    except DegenerateInputError as exc:
        if report is not None:
            report.warnings.append(str(exc))
        return SeedMask.empty(grid.dims)
    if report is not None:
        report.threshold = t
    return SeedMask.from_fg(grid.values >= t)


# ---------------------------------------------------------------------------
# GMM

def fit_gmm(
    grid: ImageGrid,
    k: int = 3,
    max_iter: int = 200,
    tol: float = 1e-6,
) -> GmmModel:
    """EM fit of a 1-D Gaussian mixture to the grid intensities.

    Initialization is deterministic: means at the (2i+1)/(2k) intensity
    quantiles, uniform weights, variance = global variance / k.  EM runs
    until the log-likelihood delta drops below ``tol`` or ``max_iter`` is
    hit; a component losing all responsibility mass is re-seeded at the
    worst-fit sample with floored variance.
    """
    if k < 2:
        raise GridError("GMM needs k >= 2")
    x = grid.values.ravel()
    n = x.size
    if n < 10 * k:
        raise GridError(f"GMM needs at least {10 * k} voxels, got {n}")

    quantiles = (2.0 * np.arange(k) + 1.0) / (2.0 * k)
    means = np.quantile(x, quantiles)
    variances = np.full(k, max(float(x.var()) / k, VARIANCE_FLOOR))
    weights = np.full(k, 1.0 / k)

    lls: list[float] = []
    converged = False
    for _ in range(max_iter):
        # E step in log space.
        log_pdf = (
            -0.5 * np.log(2.0 * np.pi * variances)[:, None]
            - (x[None, :] - means[:, None]) ** 2 / (2.0 * variances)[:, None]
        )
        log_joint = np.log(weights)[:, None] + log_pdf
        mx = log_joint.max(axis=0)
        log_norm = mx + np.log(np.exp(log_joint - mx).sum(axis=0))
        ll = float(log_norm.sum())
        lls.append(ll)
        if len(lls) > 1 and abs(lls[-1] - lls[-2]) < tol:
            converged = True
            break
        resp = np.exp(log_joint - log_norm)

        # M step.
        nk = resp.sum(axis=1)
        for j in range(k):
            if nk[j] < 1e-12:
                # Empty component: re-seed at the worst-fit sample.
                means[j] = x[int(np.argmin(log_norm))]
                variances[j] = VARIANCE_FLOOR
                nk[j] = 1.0
                resp[j, :] = 0.0
                resp[j, int(np.argmin(log_norm))] = 1.0
            else:
                means[j] = float(resp[j] @ x) / nk[j]
                variances[j] = max(
                    float(resp[j] @ (x - means[j]) ** 2) / nk[j], VARIANCE_FLOOR
                )
        weights = nk / nk.sum()

    components = tuple(
        (float(weights[j]), float(means[j]), float(variances[j])) for j in range(k)
    )
    return GmmModel(components, converged, tuple(lls))


def seed_gmm(grid: ImageGrid, model: GmmModel, report: SeedingReport | None = None) -> SeedMask:
    """Select the FG component by support-median, then threshold its PDF map.

    For each component, the support set holds voxels whose component PDF
    exceeds half that component's peak density; the component with maximal
    median support intensity describes the bright object.  Its PDF map is
    binarized at the mean of its maximum and median values.
    """
    x = grid.values.ravel()
    best_idx, best_median = -1, -np.inf
    for j in range(model.k):
        _, mean, var = model.components[j]
        # pdf > peak/2  <=>  |x - mean| < sigma * sqrt(2 ln 2)
        half_width = math.sqrt(2.0 * math.log(2.0) * var)
        support = x[np.abs(x - mean) < half_width]
        if support.size == 0:
            continue
        med = float(np.median(support))
        if med > best_median:
            best_median, best_idx = med, j
    if best_idx < 0:
        raise SeedingError("all GMM component support sets are empty")

    pdf = model.component_pdf(best_idx, grid.values)
    t = 0.5 * (float(pdf.max()) + float(np.median(pdf)))
    if report is not None:
        report.gmm_component = best_idx
        report.gmm_converged = model.converged
        report.threshold = t
        if not model.converged:
            report.warnings.append("GMM EM did not converge within max_iter")
    return SeedMask.from_fg(pdf >= t)


# ---------------------------------------------------------------------------
# Minimum barrier distance (raster-scan approximation)

def _mbd_border_seeds(dims: tuple[int, ...]) -> np.ndarray:
    """Border indicator; axes of extent 1 do not make everything a border."""
    border = np.zeros(dims, dtype=bool)
    for axis, d in enumerate(dims):
        if d < 2:
            continue
        sl_lo = [slice(None)] * len(dims)
        sl_hi = [slice(None)] * len(dims)
        sl_lo[axis] = 0
        sl_hi[axis] = d - 1
        border[tuple(sl_lo)] = True
        border[tuple(sl_hi)] = True
    return border


def _mbd_sweep_2d(intens, dist, up, low, ny, nx, forward: bool) -> None:
    ys = range(ny) if forward else range(ny - 1, -1, -1)
    step = -1 if forward else 1
    for y in ys:
        row = y * nx
        xs = range(nx) if forward else range(nx - 1, -1, -1)
        for xx in xs:
            i = row + xx
            iv = intens[i]
            d = dist[i]
            for j in (
                (i + step * nx) if 0 <= y + step < ny else -1,
                (i + step) if 0 <= xx + step < nx else -1,
            ):
                if j < 0:
                    continue
                hi = up[j] if up[j] > iv else iv
                lo = low[j] if low[j] < iv else iv
                cost = hi - lo
                if cost < d:
                    d = cost
                    dist[i] = cost
                    up[i] = hi
                    low[i] = lo


def _mbd_sweep_3d(intens, dist, up, low, nz, ny, nx, forward: bool) -> None:
    step = -1 if forward else 1
    zs = range(nz) if forward else range(nz - 1, -1, -1)
    plane = ny * nx
    for z in zs:
        zoff = z * plane
        ys = range(ny) if forward else range(ny - 1, -1, -1)
        for y in ys:
            row = zoff + y * nx
            xs = range(nx) if forward else range(nx - 1, -1, -1)
            for xx in xs:
                i = row + xx
                iv = intens[i]
                d = dist[i]
                for j in (
                    (i + step * plane) if 0 <= z + step < nz else -1,
                    (i + step * nx) if 0 <= y + step < ny else -1,
                    (i + step) if 0 <= xx + step < nx else -1,
                ):
                    if j < 0:
                        continue
                    hi = up[j] if up[j] > iv else iv
                    lo = low[j] if low[j] < iv else iv
                    cost = hi - lo
                    if cost < d:
                        d = cost
                        dist[i] = cost
                        up[i] = hi
                        low[i] = lo


def mbd_distances(grid: ImageGrid, passes: int = 3) -> np.ndarray:
    """Raster-scan approximation of the minimum barrier distance.

    The image border is the seed set.  Per voxel the running distance D
    and the path max/min (U, L) are relaxed through causal face neighbors
    with cost ``max(U(n), I(v)) - min(L(n), I(v))`` over ``passes``
    alternating forward/backward sweeps (forward first).  D only ever
    overestimates the exact barrier distance, and more passes never
    increase it.
    """
    if passes < 1:
        raise GridError("MBD needs at least one pass")
    values = grid.values
    border = _mbd_border_seeds(values.shape)
    if not border.any():
        return np.zeros_like(values)

    intens = values.ravel().tolist()
    dist = np.where(border, 0.0, np.inf).ravel().tolist()
    up = values.ravel().tolist()
    low = values.ravel().tolist()

    for p in range(passes):
        forward = p % 2 == 0
        if values.ndim == 2:
            ny, nx = values.shape
            _mbd_sweep_2d(intens, dist, up, low, ny, nx, forward)
        else:
            nz, ny, nx = values.shape
            _mbd_sweep_3d(intens, dist, up, low, nz, ny, nx, forward)

    d = np.array(dist, dtype=np.float64).reshape(values.shape)
    if not np.isfinite(d).all():
        raise GridError("MBD left unreachable voxels (disconnected lattice?)")
    return d


# Peaks at or below this are float residue, not signal; the smallest real
# contrast after 16-bit ingestion is ~1/65535.
_SALIENCY_EPS = 1e-12


def saliency_mbd(grid: ImageGrid, passes: int = 3) -> SaliencyMap:
    """Minimum-barrier saliency: raster MBD normalized by its maximum."""
    d = mbd_distances(grid, passes)
    peak = d.max()
    if peak <= _SALIENCY_EPS:
        return SaliencyMap(np.zeros_like(d))
    return SaliencyMap(d / peak)


# ---------------------------------------------------------------------------
# Frequency-tuned saliency

_BINOMIAL = ((-2, 1.0), (-1, 4.0), (0, 6.0), (1, 4.0), (2, 1.0))


def _binomial_blur(values: np.ndarray) -> np.ndarray:
    """Separable [1,4,6,4,1]/16 blur, clipped and renormalized at borders."""
    out = values
    for axis in range(values.ndim):
        num = np.zeros_like(values)
        den = np.zeros_like(values)
        for offset, wt in _BINOMIAL:
            if abs(offset) >= values.shape[axis]:
                continue
            dst = [slice(None)] * values.ndim
            src = [slice(None)] * values.ndim
            dst[axis] = slice(max(0, -offset), values.shape[axis] - max(0, offset))
            src[axis] = slice(max(0, offset), values.shape[axis] - max(0, -offset))
            num[tuple(dst)] += wt * out[tuple(src)]
            den[tuple(dst)] += wt
        out = num / den
    return out


def saliency_ft(grid: ImageGrid) -> SaliencyMap:
    """|global mean - locally blurred intensity|, normalized by its max."""
    blurred = _binomial_blur(grid.values)
    s = np.abs(float(grid.values.mean()) - blurred)
    peak = s.max()
    if peak <= _SALIENCY_EPS:
        return SaliencyMap(np.zeros_like(s))
    return SaliencyMap(s / peak)


# ---------------------------------------------------------------------------
# Shared saliency binarization

def binarize_saliency(
    sal: SaliencyMap,
    top_fraction: float = 0.10,
    bins: int = 256,
    report: SeedingReport | None = None,
) -> SeedMask:
    """Otsu-threshold the top fraction of saliency scores into FG seeds.

    The candidate set Q holds the ``top_fraction`` voxels with the largest
    scores (stable order: ties resolved by lowest linear voxel index).  An
    identically-zero map yields an empty mask plus warning; a constant Q
    (degenerate Otsu) admits all of Q.
    """
    scores = sal.scores.ravel()
    n = scores.size
    if not scores.any():
        if report is not None:
            report.warnings.append("identically-zero saliency map")
        return SeedMask.empty(sal.dims)
    q = max(1, math.ceil(top_fraction * n))
    order = np.argsort(-scores, kind="stable")
    top = order[:q]
    fg_flat: np.ndarray
    try:
        t = otsu_threshold(scores[top], bins)
        fg_flat = top[scores[top] >= t]
        if report is not None:
            report.threshold = t
    except DegenerateInputError:
        fg_flat = top
        if report is not None:
            report.warnings.append("degenerate saliency histogram: admitting whole top fraction")
    fg = np.zeros(n, dtype=bool)
    fg[fg_flat] = True
    return SeedMask.from_fg(fg.reshape(sal.dims))


# ---------------------------------------------------------------------------
# Strategy dispatch

SALIENCY_STRATEGIES: dict[str, Callable[[ImageGrid], SaliencyMap]] = {}


def register_saliency(name: str, fn: Callable[[ImageGrid], SaliencyMap]) -> None:
    SALIENCY_STRATEGIES[name] = fn


register_saliency("mbd", saliency_mbd)
register_saliency("ft", saliency_ft)


def generate_seeds(
    grid: ImageGrid, params: SeedingParams
) -> tuple[SeedMask, SaliencyMap | None, SeedingReport]:
    """Run one FG seeding strategy; returns mask, saliency (if any), report."""
    report = SeedingReport(method=params.method)
    saliency: SaliencyMap | None = None
    if params.method == "otsu":
        mask = seed_otsu(grid, params.bins, report)
    elif params.method == "gmm":
        model = fit_gmm(grid, params.gmm_k, params.gmm_max_iter, params.gmm_tol)
        mask = seed_gmm(grid, model, report)
    elif params.method == "mbd":
        saliency = saliency_mbd(grid, params.mbd_passes)
        report.mbd_passes = params.mbd_passes
        mask = binarize_saliency(saliency, params.top_fraction, params.bins, report)
    elif params.method == "ft":
        saliency = saliency_ft(grid)
        mask = binarize_saliency(saliency, params.top_fraction, params.bins, report)
    elif params.method in SALIENCY_STRATEGIES:
        saliency = SALIENCY_STRATEGIES[params.method](grid)
        mask = binarize_saliency(saliency, params.top_fraction, params.bins, report)
    else:
        raise SeedingError(f"unknown seeding method {params.method!r}")
    report.fg_count = mask.fg_count
    return mask, saliency, report
