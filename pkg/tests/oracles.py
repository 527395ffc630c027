"""Independent brute-force oracles for the test suite.

Each oracle recomputes an operation's expected output by a different route
than the library (exhaustive scans, state-space enumeration, dense solves,
coordinate-set arithmetic) and deliberately shares no code with it.
"""

from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np

FACE_OFFSETS_2D = ((-1, 0), (1, 0), (0, -1), (0, 1))


def face_offsets(ndim: int):
    offs = []
    for axis in range(ndim):
        for step in (-1, 1):
            o = [0] * ndim
            o[axis] = step
            offs.append(tuple(o))
    return tuple(offs)


# ---------------------------------------------------------------------------
# Otsu: naive per-candidate recomputation (no cumulative sums)

def otsu_scan(values, bins: int = 256) -> tuple[int, float]:
    """Exhaustive scan over every candidate split; returns (bin, threshold).

    Per-candidate statistics are recomputed from scratch with running
    sums (left folds), so exact ties across empty bins collapse the same
    way in any implementation that accumulates left-to-right.
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    lo, hi = vals.min(), vals.max()
    hist, edges = np.histogram(vals, bins=bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    best_k, best_sb = 0, -1.0
    for k in range(bins):
        w0 = m0 = 0.0
        for i in range(k + 1):
            w0 += hist[i]
            m0 += hist[i] * centers[i]
        w1 = m1 = 0.0
        for i in range(k + 1, bins):
            w1 += hist[i]
            m1 += hist[i] * centers[i]
        if w0 == 0 or w1 == 0:
            sb = 0.0
        else:
            sb = w0 * w1 * (m0 / w0 - m1 / w1) ** 2
        if sb > best_sb:
            best_sb, best_k = sb, k
    return best_k, float(edges[best_k + 1])


# ---------------------------------------------------------------------------
# Exact minimum barrier distance by state-space search

def exact_mbd(values: np.ndarray) -> np.ndarray:
    """Exact MBD from the image border via BFS over (voxel, U, L) states."""
    dims = values.shape
    ndim = values.ndim
    offs = face_offsets(ndim)

    def is_border(coord):
        return any(
            dims[a] > 1 and coord[a] in (0, dims[a] - 1) for a in range(ndim)
        )

    best = {c: math.inf for c in itertools.product(*(range(d) for d in dims))}
    seen = set()
    queue = deque()
    for c in best:
        if is_border(c):
            iv = float(values[c])
            state = (c, iv, iv)
            seen.add(state)
            queue.append(state)
            best[c] = 0.0
    while queue:
        coord, hi, lo = queue.popleft()
        for off in offs:
            n = tuple(coord[a] + off[a] for a in range(ndim))
            if any(not 0 <= n[a] < dims[a] for a in range(ndim)):
                continue
            iv = float(values[n])
            nh, nl = max(hi, iv), min(lo, iv)
            state = (n, nh, nl)
            if state in seen:
                continue
            seen.add(state)
            queue.append(state)
            if nh - nl < best[n]:
                best[n] = nh - nl
    out = np.empty(dims)
    for c, v in best.items():
        out[c] = v
    return out


# ---------------------------------------------------------------------------
# Multi-source BFS Voronoi with lowest-linear-index tie-break

def bfs_voronoi(seed_labels: np.ndarray) -> np.ndarray:
    """Label every voxel by the seed wave reaching it first.

    Simultaneous arrivals resolve to the already-labeled face neighbor with
    the lowest linear index, matching GrowCut's attacker tie-break on a
    uniform image.
    """
    dims = seed_labels.shape
    offs = face_offsets(seed_labels.ndim)
    out = seed_labels.copy()
    labeled = seed_labels != 0
    frontier = sorted(
        np.ravel_multi_index(np.nonzero(labeled), dims).tolist()
    )
    while frontier:
        claims: dict[int, int] = {}
        for lin in frontier:  # ascending: first claim = lowest-index attacker
            coord = np.unravel_index(lin, dims)
            for off in offs:
                n = tuple(coord[a] + off[a] for a in range(len(dims)))
                if any(not 0 <= n[a] < dims[a] for a in range(len(dims))):
                    continue
                if labeled[n]:
                    continue
                nlin = int(np.ravel_multi_index(n, dims))
                if nlin not in claims:
                    claims[nlin] = int(out[coord])
        frontier = sorted(claims)
        for nlin, label in claims.items():
            coord = np.unravel_index(nlin, dims)
            out[coord] = label
            labeled[coord] = True
    return out


# ---------------------------------------------------------------------------
# Coordinate-set morphology

def erode_set(coords: set[tuple], dims) -> set[tuple]:
    """A voxel survives iff every face neighbor is in the set and in bounds."""
    offs = face_offsets(len(dims))
    out = set()
    for c in coords:
        ok = True
        for off in offs:
            n = tuple(c[a] + off[a] for a in range(len(dims)))
            if any(not 0 <= n[a] < dims[a] for a in range(len(dims))) or n not in coords:
                ok = False
                break
        if ok:
            out.add(c)
    return out


def dilate_set(coords: set[tuple], dims) -> set[tuple]:
    offs = face_offsets(len(dims))
    out = set(coords)
    for c in coords:
        for off in offs:
            n = tuple(c[a] + off[a] for a in range(len(dims)))
            if all(0 <= n[a] < dims[a] for a in range(len(dims))):
                out.add(n)
    return out


def open_set(coords: set[tuple], dims, iterations: int = 1) -> set[tuple]:
    out = set(coords)
    for _ in range(iterations):
        out = erode_set(out, dims)
    for _ in range(iterations):
        out = dilate_set(out, dims)
    return out


# ---------------------------------------------------------------------------
# Dense Random Walker solve (Gaussian elimination oracle)

def dense_rw(values: np.ndarray, seed_labels: np.ndarray, beta: float) -> np.ndarray:
    """FG probability per voxel from a dense direct solve."""
    dims = values.shape
    n = values.size
    flat = values.ravel()
    labels = seed_labels.ravel()
    lap = np.zeros((n, n))
    idx = np.arange(n).reshape(dims)
    for axis in range(values.ndim):
        lo = [slice(None)] * values.ndim
        hi = [slice(None)] * values.ndim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        for i, j in zip(idx[tuple(lo)].ravel(), idx[tuple(hi)].ravel()):
            w = math.exp(-beta * (flat[i] - flat[j]) ** 2)
            lap[i, j] -= w
            lap[j, i] -= w
            lap[i, i] += w
            lap[j, j] += w
    unseeded = np.flatnonzero(labels == 0)
    seeded = np.flatnonzero(labels != 0)
    m = (labels == 1).astype(np.float64)
    p = m.copy()
    if unseeded.size:
        A = lap[np.ix_(unseeded, unseeded)]
        b = -lap[np.ix_(unseeded, seeded)] @ m[seeded]
        p[unseeded] = np.linalg.solve(A, b)
    return p.reshape(dims)


# ---------------------------------------------------------------------------
# Plain Gaussian blur with the bilateral filter's spatial kernel

def gaussian_blur_ref(values: np.ndarray, sigma: float, radius: int) -> np.ndarray:
    num = np.zeros_like(values)
    den = np.zeros_like(values)
    for offset in itertools.product(range(-radius, radius + 1), repeat=values.ndim):
        w = math.exp(-sum(o * o for o in offset) / (2.0 * sigma * sigma))
        dst = tuple(
            slice(max(0, -o), values.shape[a] - max(0, o)) for a, o in enumerate(offset)
        )
        src = tuple(
            slice(max(0, o), values.shape[a] - max(0, -o)) for a, o in enumerate(offset)
        )
        num[dst] += w * values[src]
        den[dst] += w
    return num / den
