"""Seeded segmentation back ends and the full pipeline orchestration.

GrowCut is a cellular automaton whose initial cell strengths come from the
weighted seed mask; Random Walker solves the seeded graph-Laplacian system
on the intensity-weighted lattice.  Both use face adjacency and are
deterministic: GrowCut runs synchronous double-buffered sweeps with a
lowest-linear-index attacker tie-break, Random Walker a Jacobi
preconditioned conjugate gradient.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy import sparse

from .grid import (
    BG,
    FG,
    UNLABELED,
    GridError,
    ImageGrid,
    LabelMap,
    SeedMask,
    StrengthMap,
    mask_border,
    merge_seeds,
)
from .preprocess import bilateral_filter
from .refine import morph_fg, uniform_strengths, weight_seeds
from .seeding import SaliencyMap, SeedingError, SeedingReport, generate_seeds

if TYPE_CHECKING:  # pragma: no cover
    from .config import PipelineConfig


class SegmentationError(ValueError):
    """Raised on invalid segmenter input (e.g. a missing seed class)."""


class SolverError(RuntimeError):
    """Conjugate gradient failed to reach tolerance; carries the residual."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SolverParams:
    """Numerical knobs for both segmenters."""

    cg_tol: float = 1e-8
    cg_max_iter: int | None = None  # None -> 10 * number of voxels
    gc_max_sweeps: int = 1000
    rw_beta: float = 90.0

    def __post_init__(self) -> None:
        if self.cg_tol <= 0:
            raise GridError("cg tolerance must be positive")
        if self.gc_max_sweeps < 1:
            raise GridError("gc_max_sweeps must be >= 1")
        if self.rw_beta < 0:
            raise GridError("rw_beta must be non-negative")


def _ordered_face_shifts(ndim: int) -> list[tuple[int, int]]:
    """Face-neighbor (axis, step) pairs sorted by attacker linear-index delta.

    In row-major order the flattened delta of a -1 step on axis a is
    -stride(a), so sorting most-negative-first is: -1 steps from axis 0
    upward, then +1 steps from the last axis downward.
    """
    shifts = [(axis, -1) for axis in range(ndim)]
    shifts += [(axis, 1) for axis in range(ndim - 1, -1, -1)]
    return shifts


def growcut(
    grid: ImageGrid,
    seeds: SeedMask,
    strengths: StrengthMap,
    params: SolverParams | None = None,
    info: dict | None = None,
) -> LabelMap:
    """GrowCut cellular automaton seeded with the weighted mask.

    Neighbor q conquers p iff ``(1 - |C_p - C_q|) * theta_q > theta_p``; on
    conquest p takes q's label and the attack force as its new strength.
    Ties between equally strong attackers go to the lowest linear voxel
    index.  Sweeps are synchronous and stop at the first sweep with no
    conquest (or at the sweep cap, any remaining unlabeled voxels falling
    back to BG with a warning).
    """
    if params is None:
        params = SolverParams()
    if seeds.dims != grid.dims or strengths.dims != grid.dims:
        raise SegmentationError("seed/strength dims must match the grid")
    if seeds.fg_count == 0 or seeds.bg_count == 0:
        raise SegmentationError("GrowCut needs at least one FG and one BG seed")
    strengths.check_zero_on_unlabeled(seeds)

    values = grid.values
    labels = seeds.labels.copy()
    theta = strengths.weights.copy()
    shifts = _ordered_face_shifts(values.ndim)
    nshift = len(shifts)

    force = np.empty((nshift,) + values.shape, dtype=np.float64)
    att_label = np.empty((nshift,) + values.shape, dtype=np.uint8)

    sweeps = 0
    converged = False
    for _ in range(params.gc_max_sweeps):
        force.fill(-1.0)
        att_label.fill(UNLABELED)
        for i, (axis, step) in enumerate(shifts):
            dst = [slice(None)] * values.ndim
            src = [slice(None)] * values.ndim
            dst[axis] = slice(max(0, -step), values.shape[axis] - max(0, step))
            src[axis] = slice(max(0, step), values.shape[axis] - max(0, -step))
            dst_t, src_t = tuple(dst), tuple(src)
            g = 1.0 - np.abs(values[dst_t] - values[src_t])
            force[i][dst_t] = g * theta[src_t]
            att_label[i][dst_t] = labels[src_t]
        best = force.max(axis=0)
        winner = np.expand_dims(force.argmax(axis=0), 0)
        best_label = np.take_along_axis(att_label, winner, axis=0)[0]
        conquered = (best > theta) & (best_label != UNLABELED)
        sweeps += 1
        if not conquered.any():
            converged = True
            break
        labels = np.where(conquered, best_label, labels)
        theta = np.where(conquered, best, theta)

    warnings = []
    unlabeled = labels == UNLABELED
    if unlabeled.any():
        warnings.append(
            f"{int(unlabeled.sum())} voxels unreached by GrowCut; defaulted to BG"
        )
        labels = np.where(unlabeled, BG, labels)
    if not converged:
        warnings.append(f"GrowCut hit the sweep cap ({params.gc_max_sweeps})")
    if info is not None:
        info["sweeps"] = sweeps
        info["converged"] = converged
        info["warnings"] = warnings
    return LabelMap(labels.astype(np.uint8))


# ---------------------------------------------------------------------------
# Random Walker

def _lattice_edges(dims: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (i, j) of all face-adjacent voxel pairs, both per axis."""
    idx = np.arange(int(np.prod(dims))).reshape(dims)
    pairs_i, pairs_j = [], []
    for axis in range(len(dims)):
        lo = [slice(None)] * len(dims)
        hi = [slice(None)] * len(dims)
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        pairs_i.append(idx[tuple(lo)].ravel())
        pairs_j.append(idx[tuple(hi)].ravel())
    return np.concatenate(pairs_i), np.concatenate(pairs_j)


def _jacobi_pcg(
    A: sparse.csr_matrix,
    b: np.ndarray,
    rtol: float,
    max_iter: int,
) -> tuple[np.ndarray, int, float]:
    """Conjugate gradient with Jacobi preconditioning.

    Converges when both the relative residual ||b - Ax|| / ||b|| and the
    row-scaled residual ||D^-1 (b - Ax)||_inf / max(1, ||x||_inf) drop to
    rtol.  The second test guards rows whose coupling weights are many
    orders of magnitude below the dominant scale: their equations barely
    register in the plain residual norm, so without it the solver could
    report convergence while such voxels hold garbage.  The true residual
    is refreshed periodically to keep the recursion honest.
    """
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return np.zeros_like(b), 0, 0.0
    inv_diag = 1.0 / A.diagonal()

    def settled(r: np.ndarray, x: np.ndarray) -> bool:
        if float(np.linalg.norm(r)) > rtol * norm_b:
            return False
        scale = max(1.0, float(np.abs(x).max()))
        return float(np.abs(r * inv_diag).max()) <= rtol * scale

    x = np.zeros_like(b)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    gamma = float(r @ z)
    res = 1.0
    for it in range(1, max_iter + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise SolverError("CG breakdown (matrix not SPD?)", res, it)
        alpha = gamma / pAp
        x += alpha * p
        if it % 50 == 0:
            r = b - A @ x
        else:
            r -= alpha * Ap
        res = float(np.linalg.norm(r)) / norm_b
        if res <= rtol and settled(r, x):
            return x, it, res
        z = inv_diag * r
        gamma_new = float(r @ z)
        if gamma_new <= 0.0:
            r = b - A @ x
            res = float(np.linalg.norm(r)) / norm_b
            if settled(r, x):
                return x, it, res
            raise SolverError("CG stagnated (preconditioned residual vanished)", res, it)
        beta = gamma_new / gamma
        gamma = gamma_new
        p = z + beta * p
    raise SolverError(
        f"CG did not reach tol {rtol} in {max_iter} iterations (residual {res:.3e})",
        res,
        max_iter,
    )


def build_rw_system(
    grid: ImageGrid, seeds: SeedMask, beta: float
) -> tuple[sparse.csr_matrix, np.ndarray, np.ndarray, np.ndarray]:
    """Assemble the seeded Laplacian system.

    Returns (L_uu, b, unseeded indices, seed FG indicator over all voxels)
    with edge weights ``exp(-beta * (I_i - I_j)^2)`` on normalized
    intensities.
    """
    flat_labels = seeds.labels.ravel()
    intens = grid.values.ravel()
    n = intens.size
    ei, ej = _lattice_edges(grid.dims)
    w = np.exp(-beta * (intens[ei] - intens[ej]) ** 2)
    degree = np.zeros(n)
    np.add.at(degree, ei, w)
    np.add.at(degree, ej, w)
    diag = np.arange(n)
    lap = sparse.coo_matrix(
        (
            np.concatenate([-w, -w, degree]),
            (np.concatenate([ei, ej, diag]), np.concatenate([ej, ei, diag])),
        ),
        shape=(n, n),
    ).tocsr()
    unseeded = np.flatnonzero(flat_labels == UNLABELED)
    seeded = np.flatnonzero(flat_labels != UNLABELED)
    m = (flat_labels == FG).astype(np.float64)
    L_uu = lap[unseeded][:, unseeded].tocsr()
    b = -lap[unseeded][:, seeded] @ m[seeded]
    return L_uu, b, unseeded, m


def random_walker(
    grid: ImageGrid,
    seeds: SeedMask,
    params: SolverParams | None = None,
    info: dict | None = None,
) -> LabelMap:
    """Random Walker segmentation with hard seed boundary conditions.

    Solves the restricted Laplacian system for the probability that a walk
    first reaches an FG seed; labels follow the >= 0.5 rule.  Seed weights
    are not consulted: boundary values are hard 1/0.
    """
    if params is None:
        params = SolverParams()
    if seeds.dims != grid.dims:
        raise SegmentationError("seed dims must match the grid")
    if seeds.fg_count == 0 or seeds.bg_count == 0:
        raise SegmentationError("Random Walker needs at least one FG and one BG seed")

    L_uu, b, unseeded, m = build_rw_system(grid, seeds, params.rw_beta)
    p = m.copy()
    iterations, residual = 0, 0.0
    if unseeded.size:
        max_iter = params.cg_max_iter or 10 * grid.size
        x, iterations, residual = _jacobi_pcg(L_uu, b, params.cg_tol, max_iter)
        p[unseeded] = x
    if info is not None:
        info["cg_iterations"] = iterations
        info["residual"] = residual
        info["prob_min"] = float(p.min())
        info["prob_max"] = float(p.max())
    # Discrete maximum principle: probabilities live in [0, 1] up to solver
    # tolerance; clamp the float fringe.
    p = np.clip(p, 0.0, 1.0)
    return LabelMap.from_probability(p.reshape(grid.dims))


# ---------------------------------------------------------------------------
# Pipeline orchestration

class PipelineError(Exception):
    """A stage failure, tagged with the stage that raised it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.message = message


@dataclass
class PipelineResult:
    """Everything a run produces, kept for inspection and the UI."""

    label_map: LabelMap
    seeds: SeedMask
    strengths: StrengthMap
    report: SeedingReport
    saliency: SaliencyMap | None
    filtered: ImageGrid
    conflicts: int
    timings_ms: dict[str, float] = field(default_factory=dict)
    segmenter_info: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def run_segmenter(
    name: str,
    grid: ImageGrid,
    seeds: SeedMask,
    strengths: StrengthMap,
    params: SolverParams,
    info: dict,
) -> LabelMap:
    if name == "gc":
        return growcut(grid, seeds, strengths, params, info)
    if name == "rw":
        return random_walker(grid, seeds, params, info)
    raise SegmentationError(f"unknown segmenter {name!r}")


def segment(config: "PipelineConfig", grid: ImageGrid) -> PipelineResult:
    """Run the full automated pipeline: P -> S -> W -> M -> border merge -> segmenter."""
    timings: dict[str, float] = {}
    warnings: list[str] = []

    if config.invert:
        grid = grid.inverted()

    t0 = time.perf_counter()
    if config.preprocess:
        try:
            filtered = bilateral_filter(grid, config.bilateral)
        except GridError as exc:
            raise PipelineError("preprocess", str(exc)) from exc
    else:
        filtered = grid
    timings["preprocess"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    try:
        fg_mask, saliency, report = generate_seeds(filtered, config.seeding)
    except (SeedingError, GridError) as exc:
        raise PipelineError("seeding", str(exc)) from exc
    if fg_mask.fg_count == 0:
        message = report.warnings[0] if report.warnings else "empty FG seed set"
        raise PipelineError("seeding", message)
    timings["seeding"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    bg_weight = config.weight.bg_weight if config.weighting else 1.0
    try:
        if config.weighting:
            fg_strengths = weight_seeds(fg_mask, config.weight)
        else:
            fg_strengths = uniform_strengths(fg_mask, bg_weight)
    except GridError as exc:
        raise PipelineError("weighting", str(exc)) from exc
    timings["weighting"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    morphed = morph_fg(fg_mask, config.morph)
    if morphed.fg_count == 0:
        raise PipelineError("morphology", "empty seed set after morphology")
    if config.reweigh_after_morph and config.weighting:
        fg_weights = weight_seeds(morphed, config.weight).weights
    else:
        # Weights of eroded-away voxels are dropped.
        fg_weights = np.where(morphed.labels == FG, fg_strengths.weights, 0.0)
    timings["morphology"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    try:
        border = mask_border(grid.dims, config.border_thickness)
    except GridError as exc:
        raise PipelineError("border", str(exc)) from exc
    merged, conflicts = merge_seeds(morphed, border)
    if merged.fg_count == 0:
        raise PipelineError("border", "border BG seeds swallowed every FG seed")
    weights = np.zeros(grid.dims, dtype=np.float64)
    fg_sel = merged.labels == FG
    weights[fg_sel] = fg_weights[fg_sel]
    weights[merged.labels == BG] = bg_weight
    strengths = StrengthMap(weights)
    strengths.check_zero_on_unlabeled(merged)
    timings["merge"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    seg_info: dict = {}
    try:
        label_map = run_segmenter(
            config.segmenter, filtered, merged, strengths, config.solver, seg_info
        )
    except SolverError as exc:
        raise PipelineError("solver", str(exc)) from exc
    except (SegmentationError, GridError) as exc:
        raise PipelineError("segmenter", str(exc)) from exc
    timings["segment"] = (time.perf_counter() - t0) * 1000.0
    warnings.extend(report.warnings)
    warnings.extend(seg_info.get("warnings", []))

    return PipelineResult(
        label_map=label_map,
        seeds=merged,
        strengths=strengths,
        report=report,
        saliency=saliency,
        filtered=filtered,
        conflicts=conflicts,
        timings_ms=timings,
        segmenter_info=seg_info,
        warnings=warnings,
    )
