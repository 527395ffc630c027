"""Image ingestion and export.

2-D: binary PGM (P5), 8-bit or 16-bit big-endian samples per the Netpbm
specification.  3-D: the raw ``grid3d`` format: one ASCII header line
``G3D <dx> <dy> <dz> <bits>\\n`` followed by row-major little-endian
unsigned samples (x fastest, matching the internal last-axis-fastest
layout; internal array shape is ``(dz, dy, dx)``).

Masks and label maps are encoded FG=255, BG=128, UNLABELED=0.
"""

from __future__ import annotations

import numpy as np

from .grid import BG, FG, UNLABELED, ImageGrid, LabelMap, SeedMask, normalize_intensities

MASK_FG = 255
MASK_BG = 128
MASK_UNLABELED = 0


class FormatError(ValueError):
    """Raised on malformed or unsupported image payloads."""


def sniff_format(data: bytes) -> str | None:
    """Return 'pgm' or 'grid3d' for recognized payloads, else None."""
    if data[:2] == b"P5":
        return "pgm"
    if data[:4] == b"G3D ":
        return "grid3d"
    return None


# ---------------------------------------------------------------------------
# PGM (P5)

def _pgm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated integer tokens, honoring # comments.

    Returns the tokens and the offset one whitespace byte past the last one
    (the Netpbm single-whitespace separator before raster data).
    """
    tokens: list[int] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise FormatError("truncated PGM header")
        try:
            tokens.append(int(data[start:i]))
        except ValueError as exc:
            raise FormatError(f"bad PGM header token {data[start:i]!r}") from exc
    if i >= n:
        raise FormatError("PGM header not followed by raster data")
    return tokens, i + 1  # skip the single whitespace after maxval


def read_pgm(data: bytes) -> tuple[np.ndarray, int]:
    """Decode a binary PGM into a (height, width) uint array plus maxval."""
    if data[:2] != b"P5":
        raise FormatError("not a binary PGM (missing P5 magic)")
    (width, height, maxval), offset = _pgm_tokens(data[2:], 3)
    offset += 2
    if width < 1 or height < 1:
        raise FormatError(f"bad PGM dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise FormatError(f"bad PGM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    raster = data[offset : offset + count * dtype.itemsize]
    if len(raster) != count * dtype.itemsize:
        raise FormatError("PGM raster truncated")
    arr = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return arr.astype(np.uint16 if maxval > 255 else np.uint8), maxval


def write_pgm(arr: np.ndarray, maxval: int) -> bytes:
    if arr.ndim != 2:
        raise FormatError("PGM export requires a 2-D array")
    if not 0 < maxval < 65536:
        raise FormatError(f"bad PGM maxval {maxval}")
    height, width = arr.shape
    header = f"P5\n{width} {height}\n{maxval}\n".encode()
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    if arr.max(initial=0) > maxval:
        raise FormatError("sample exceeds maxval")
    return header + np.ascontiguousarray(arr.astype(dtype)).tobytes()


# ---------------------------------------------------------------------------
# grid3d

def read_grid3d(data: bytes) -> tuple[np.ndarray, int]:
    """Decode a grid3d payload into a (dz, dy, dx) uint array plus bit depth."""
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError("grid3d header line missing newline")
    parts = data[:nl].split()
    if len(parts) != 5 or parts[0] != b"G3D":
        raise FormatError("bad grid3d header")
    try:
        dx, dy, dz, bits = (int(p) for p in parts[1:])
    except ValueError as exc:
        raise FormatError("bad grid3d header field") from exc
    if min(dx, dy, dz) < 1:
        raise FormatError(f"bad grid3d dimensions {dx}x{dy}x{dz}")
    if bits not in (8, 16):
        raise FormatError(f"unsupported grid3d bit depth {bits}")
    dtype = np.dtype("<u2") if bits == 16 else np.dtype("u1")
    count = dx * dy * dz
    raster = data[nl + 1 : nl + 1 + count * dtype.itemsize]
    if len(raster) != count * dtype.itemsize:
        raise FormatError("grid3d raster truncated")
    arr = np.frombuffer(raster, dtype=dtype).reshape(dz, dy, dx)
    return arr.astype(np.uint16 if bits == 16 else np.uint8), bits


def write_grid3d(arr: np.ndarray, bits: int) -> bytes:
    if arr.ndim != 3:
        raise FormatError("grid3d export requires a 3-D array")
    if bits not in (8, 16):
        raise FormatError(f"unsupported grid3d bit depth {bits}")
    dz, dy, dx = arr.shape
    header = f"G3D {dx} {dy} {dz} {bits}\n".encode()
    dtype = np.dtype("<u2") if bits == 16 else np.dtype("u1")
    if arr.max(initial=0) >= (1 << bits):
        raise FormatError("sample exceeds bit depth")
    return header + np.ascontiguousarray(arr.astype(dtype)).tobytes()


# ---------------------------------------------------------------------------
# High-level grid / mask round-trips

def load_grid(data: bytes, spacing=None) -> ImageGrid:
    """Ingest a PGM or grid3d payload as a normalized ImageGrid."""
    kind = sniff_format(data)
    if kind == "pgm":
        arr, _ = read_pgm(data)
    elif kind == "grid3d":
        arr, _ = read_grid3d(data)
    else:
        raise FormatError("unsupported image format (expected PGM P5 or grid3d)")
    return normalize_intensities(arr, spacing)


def grid_to_bytes(grid: ImageGrid) -> bytes:
    """Export normalized intensities as 16-bit samples."""
    scaled = np.rint(grid.values * 65535.0).astype(np.uint16)
    if grid.ndim == 2:
        return write_pgm(scaled, 65535)
    return write_grid3d(scaled, 16)


def _encode_labels(labels: np.ndarray) -> np.ndarray:
    out = np.zeros(labels.shape, dtype=np.uint8)
    out[labels == FG] = MASK_FG
    out[labels == BG] = MASK_BG
    return out


def _decode_labels(arr: np.ndarray) -> np.ndarray:
    labels = np.zeros(arr.shape, dtype=np.uint8)
    labels[arr == MASK_FG] = FG
    labels[arr == MASK_BG] = BG
    bad = ~np.isin(arr, (MASK_FG, MASK_BG, MASK_UNLABELED))
    if bad.any():
        raise FormatError("mask payload contains values other than 0/128/255")
    return labels


def mask_to_bytes(mask: SeedMask) -> bytes:
    enc = _encode_labels(mask.labels)
    return write_pgm(enc, 255) if enc.ndim == 2 else write_grid3d(enc, 8)


def load_mask(data: bytes) -> SeedMask:
    kind = sniff_format(data)
    if kind == "pgm":
        arr, _ = read_pgm(data)
    elif kind == "grid3d":
        arr, _ = read_grid3d(data)
    else:
        raise FormatError("unsupported mask format")
    return SeedMask(_decode_labels(np.asarray(arr)))


def labelmap_to_bytes(label_map: LabelMap) -> bytes:
    enc = _encode_labels(label_map.labels)
    return write_pgm(enc, 255) if enc.ndim == 2 else write_grid3d(enc, 8)


def weights_to_bytes(weights: np.ndarray) -> bytes:
    """Export a [0,1] weight field as 16-bit samples."""
    scaled = np.rint(np.asarray(weights, dtype=np.float64) * 65535.0).astype(np.uint16)
    return write_pgm(scaled, 65535) if scaled.ndim == 2 else write_grid3d(scaled, 16)
