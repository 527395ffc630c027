"""Interactive refinement session service.

Exposes pipeline runs and scribble refinement over HTTP + JSON.  A session
holds the auto-seeded state plus an append-only scribble history; every
mutation re-runs the segmenter and bumps the revision by exactly one, and
replaying the history from the auto-seeded state always reproduces the
current seed mask.  Sessions are independent; mutations within one session
are serialized by a per-session lock.

Masks travel as base64 row-major byte fields (FG=255, BG=128, unlabeled=0);
artifact endpoints serve PGM / grid3d payloads.  Scribble voxels arrive as
``[x, y]`` or ``[x, y, z]`` with x the fastest axis and origin top-left.
"""

from __future__ import annotations

import base64
import json
import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse, Response

from .config import ConfigError, PipelineConfig, parse_config
from .evaluate import MetricsError, dice, seed_error
from .grid import BG, FG, GridError, ImageGrid, LabelMap, SeedMask, StrengthMap
from .gridio import (
    FormatError,
    labelmap_to_bytes,
    load_grid,
    load_mask,
    mask_to_bytes,
    sniff_format,
    weights_to_bytes,
)
from .segmenters import (
    PipelineError,
    SegmentationError,
    SolverError,
    run_segmenter,
    segment,
)

MAX_EXTENT_2D = 512
MAX_EXTENT_3D = 128

_LABEL_CODES = {"FG": FG, "BG": BG}


class ServiceError(Exception):
    def __init__(self, status: int, stage: str, message: str):
        super().__init__(message)
        self.status = status
        self.stage = stage
        self.message = message


@dataclass
class Stroke:
    label: int
    voxels: tuple[tuple[int, ...], ...]  # internal (slowest..fastest) order


@dataclass
class Session:
    id: str
    config: PipelineConfig
    grid: ImageGrid
    filtered: ImageGrid
    base_seeds: SeedMask
    base_strengths: StrengthMap
    saliency_scores: np.ndarray | None
    seeds: SeedMask
    strengths: StrengthMap
    labels: LabelMap
    report: dict
    conflicts: int
    truth: np.ndarray | None = None
    revision: int = 1
    history: list[Stroke] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def apply_strokes(self, strokes: list[Stroke]) -> tuple[SeedMask, StrengthMap]:
        """Rebuild seeds/strengths from the auto state plus given strokes."""
        labels = self.base_seeds.labels.copy()
        weights = self.base_strengths.weights.copy()
        for stroke in strokes:
            idx = tuple(np.array([v[a] for v in stroke.voxels]) for a in range(labels.ndim))
            labels[idx] = stroke.label
            weights[idx] = 1.0  # user hints are treated as certain
        return SeedMask(labels), StrengthMap(weights)

    def resegment(self, seeds: SeedMask, strengths: StrengthMap) -> LabelMap:
        info: dict = {}
        return run_segmenter(
            self.config.segmenter, self.filtered, seeds, strengths,
            self.config.solver, info,
        )


class SessionStore:
    def __init__(self, snapshot_dir: str | None = None):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self.snapshot_dir = Path(snapshot_dir) if snapshot_dir else None

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise ServiceError(404, "session", f"unknown session {session_id!r}")
        return session

    def snapshot(self, session: Session) -> None:
        """Write-through crash-recovery snapshot (optional)."""
        if self.snapshot_dir is None:
            return
        out = self.snapshot_dir / session.id
        out.mkdir(parents=True, exist_ok=True)
        (out / "seeds.bin").write_bytes(mask_to_bytes(session.seeds))
        (out / "label.bin").write_bytes(labelmap_to_bytes(session.labels))
        (out / "manifest.json").write_text(
            json.dumps(
                {
                    "id": session.id,
                    "revision": session.revision,
                    "config": session.config.to_string(),
                    "history_length": len(session.history),
                },
                indent=2,
            )
        )


def _b64(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr).tobytes()).decode("ascii")


def _mask_b64(mask: SeedMask) -> str:
    enc = np.zeros(mask.dims, dtype=np.uint8)
    enc[mask.labels == FG] = 255
    enc[mask.labels == BG] = 128
    return _b64(enc)


def _labels_b64(labels: LabelMap) -> str:
    enc = np.where(labels.labels == FG, 255, 128).astype(np.uint8)
    return _b64(enc)


def _wire_dims(dims: tuple[int, ...]) -> list[int]:
    return list(reversed(dims))  # internal slowest-first -> wire [dx, dy(, dz)]


def session_state(session: Session) -> dict:
    state = {
        "id": session.id,
        "revision": session.revision,
        "dims": _wire_dims(session.grid.dims),
        "config": session.config.to_string(),
        "fg_seeds": session.seeds.fg_count,
        "bg_seeds": session.seeds.bg_count,
        "seed_conflicts": session.conflicts,
        "history_length": len(session.history),
        "has_saliency": session.saliency_scores is not None,
        "seed_mask": _mask_b64(session.seeds),
        "label_map": _labels_b64(session.labels),
        "seeding_report": session.report,
        "warnings": list(session.warnings),
    }
    if session.truth is not None:
        metrics = {"dice": dice(session.labels.fg, session.truth)}
        try:
            metrics["fg_seed_error_rate"] = seed_error(session.seeds, session.truth)
        except MetricsError:
            metrics["fg_seed_error_rate"] = None
        state["metrics"] = metrics
    return state


def _check_size(dims: tuple[int, ...]) -> None:
    cap = MAX_EXTENT_2D if len(dims) == 2 else MAX_EXTENT_3D
    if max(dims) > cap:
        raise ServiceError(
            413, "ingest",
            f"image extent {max(dims)} exceeds the {cap} cap for {len(dims)}-D",
        )


def _parse_voxels(payload, dims: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    """Wire [x, y(, z)] coordinates -> internal (slowest..fastest) tuples."""
    if not isinstance(payload, list) or not payload:
        raise ServiceError(400, "scribble", "voxel list must be a non-empty array")
    ndim = len(dims)
    out = []
    for v in payload:
        if not isinstance(v, (list, tuple)) or len(v) != ndim:
            raise ServiceError(400, "scribble", f"voxel {v!r} must have {ndim} coordinates")
        try:
            coord = tuple(int(c) for c in reversed(v))
        except (TypeError, ValueError):
            raise ServiceError(400, "scribble", f"voxel {v!r} has non-integer coordinates")
        if any(c < 0 or c >= d for c, d in zip(coord, dims)):
            raise ServiceError(400, "scribble", f"voxel {v!r} is out of bounds")
        out.append(coord)
    return tuple(out)


def create_app(frontend_dir: str | None = None, snapshot_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="seedforge session service")
    store = SessionStore(snapshot_dir)
    app.state.store = store

    @app.exception_handler(ServiceError)
    async def service_error_handler(_req: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.status, "stage": exc.stage, "message": exc.message},
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    async def create_session(
        image: UploadFile = File(...),
        config: str = Form(...),
        truth: UploadFile | None = File(default=None),
    ):
        data = await image.read()
        if sniff_format(data) is None:
            raise ServiceError(415, "ingest", "unsupported image format (PGM P5 or grid3d)")
        try:
            grid = load_grid(data)
        except (FormatError, GridError) as exc:
            raise ServiceError(415, "ingest", str(exc))
        _check_size(grid.dims)
        try:
            cfg = parse_config(config)
        except ConfigError as exc:
            raise ServiceError(422, "config", str(exc))
        truth_mask = None
        if truth is not None:
            tdata = await truth.read()
            try:
                truth_mask = load_mask(tdata).labels == FG
            except FormatError as exc:
                raise ServiceError(415, "truth", str(exc))
            if truth_mask.shape != grid.dims:
                raise ServiceError(422, "truth", "truth dims do not match the image")
        try:
            result = segment(cfg, grid)
        except PipelineError as exc:
            raise ServiceError(422, exc.stage, exc.message)

        session = Session(
            id=secrets.token_hex(8),
            config=cfg,
            grid=grid,
            filtered=result.filtered,
            base_seeds=result.seeds,
            base_strengths=result.strengths,
            saliency_scores=None if result.saliency is None else result.saliency.scores,
            seeds=result.seeds,
            strengths=result.strengths,
            labels=result.label_map,
            report=result.report.to_json(),
            conflicts=result.conflicts,
            truth=truth_mask,
            warnings=list(result.warnings),
        )
        store.add(session)
        store.snapshot(session)
        return session_state(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return session_state(session)

    @app.post("/sessions/{session_id}/scribbles")
    async def add_scribble(session_id: str, request: Request):
        session = store.get(session_id)
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise ServiceError(400, "scribble", "body must be JSON")
        label_name = body.get("label")
        if label_name not in _LABEL_CODES:
            raise ServiceError(400, "scribble", "label must be 'FG' or 'BG'")
        voxels = _parse_voxels(body.get("voxels"), session.grid.dims)
        stroke = Stroke(label=_LABEL_CODES[label_name], voxels=voxels)
        with session.lock:
            seeds, strengths = session.apply_strokes(session.history + [stroke])
            try:
                labels = session.resegment(seeds, strengths)
            except (SegmentationError, SolverError, GridError) as exc:
                raise ServiceError(422, "segmenter", str(exc))
            session.history.append(stroke)
            session.seeds = seeds
            session.strengths = strengths
            session.labels = labels
            session.revision += 1
            store.snapshot(session)
            return session_state(session)

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str):
        session = store.get(session_id)
        with session.lock:
            if not session.history:
                raise ServiceError(409, "undo", "no scribbles to undo")
            remaining = session.history[:-1]
            seeds, strengths = session.apply_strokes(remaining)
            try:
                labels = session.resegment(seeds, strengths)
            except (SegmentationError, SolverError, GridError) as exc:
                raise ServiceError(422, "segmenter", str(exc))
            session.history = remaining
            session.seeds = seeds
            session.strengths = strengths
            session.labels = labels
            session.revision += 1
            store.snapshot(session)
            return session_state(session)

    @app.get("/sessions/{session_id}/artifacts/{kind}")
    def get_artifact(session_id: str, kind: str):
        session = store.get(session_id)
        with session.lock:
            if kind == "seed":
                payload = mask_to_bytes(session.seeds)
            elif kind == "strength":
                payload = weights_to_bytes(session.strengths.weights)
            elif kind == "label":
                payload = labelmap_to_bytes(session.labels)
            elif kind == "saliency":
                if session.saliency_scores is None:
                    raise ServiceError(404, "artifact", "this configuration has no saliency map")
                payload = weights_to_bytes(session.saliency_scores)
            elif kind == "image":
                from .gridio import grid_to_bytes

                payload = grid_to_bytes(session.grid)
            else:
                raise ServiceError(404, "artifact", f"unknown artifact {kind!r}")
        media = "image/x-portable-graymap" if session.grid.ndim == 2 else "application/octet-stream"
        return Response(content=payload, media_type=media)

    if frontend_dir and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="frontend")
    return app
