"""Command-line entry points: single runs, benchmark sweeps, service launch.

Exit codes: 0 success, 2 config/usage error, 3 I/O error, 4 seeding error,
5 solver error, 6 other pipeline failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, PipelineConfig, parse_config
from .evaluate import PhantomSpec, benchmark, make_phantom, write_report
from .grid import GridError
from .gridio import (
    FormatError,
    grid_to_bytes,
    labelmap_to_bytes,
    load_grid,
    mask_to_bytes,
    weights_to_bytes,
)
from .segmenters import PipelineError, PipelineResult, segment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SEEDING = 4
EXIT_SOLVER = 5
EXIT_PIPELINE = 6

_STAGE_EXIT_CODES = {
    "seeding": EXIT_SEEDING,
    "solver": EXIT_SOLVER,
}

MANIFEST_SCHEMA = 1


def _fail(code: int, message: str) -> int:
    print(f"seedforge: error: {message}", file=sys.stderr)
    return code


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--bilateral-sigma-spatial", type=float, dest="bilateral_sigma_spatial")
    parser.add_argument("--bilateral-sigma-range", type=float, dest="bilateral_sigma_range")
    parser.add_argument("--bilateral-radius", type=int, dest="bilateral_radius")
    parser.add_argument("--no-preprocess", action="store_true", help="skip stage P")
    parser.add_argument("--seed-method", choices=["otsu", "gmm", "mbd", "ft"], dest="seed_method")
    parser.add_argument("--gmm-k", type=int, dest="gmm_k")
    parser.add_argument("--mbd-passes", type=int, dest="mbd_passes")
    parser.add_argument("--top-fraction", type=float, dest="top_fraction")
    parser.add_argument("--weighting", choices=["on", "off"], dest="weighting_flag")
    parser.add_argument("--sigma-factor", type=float, dest="sigma_factor")
    parser.add_argument("--morph", choices=["open", "erode", "none"], dest="morph_flag")
    parser.add_argument("--morph-iters", type=int, dest="morph_iters")
    parser.add_argument("--segmenter", choices=["gc", "rw"], dest="segmenter")
    parser.add_argument("--rw-beta", type=float, dest="rw_beta")
    parser.add_argument("--rw-tol", type=float, dest="rw_tol")
    parser.add_argument("--gc-max-sweeps", type=int, dest="gc_max_sweeps")
    parser.add_argument("--border-thickness", type=int, dest="border_thickness")
    parser.add_argument("--reweigh-after-morph", action="store_true", default=None)
    parser.add_argument("--invert", action="store_true", default=None,
                        help="invert intensities (dark objects)")


def _overrides_from_args(args: argparse.Namespace) -> dict:
    morph_map = {"open": "opening", "erode": "erosion", "none": "none"}
    overrides = {
        "bilateral_sigma_spatial": args.bilateral_sigma_spatial,
        "bilateral_sigma_range": args.bilateral_sigma_range,
        "bilateral_radius": args.bilateral_radius,
        "seed_method": args.seed_method,
        "gmm_k": args.gmm_k,
        "mbd_passes": args.mbd_passes,
        "top_fraction": args.top_fraction,
        "sigma_factor": args.sigma_factor,
        "morph_iters": args.morph_iters,
        "segmenter": args.segmenter,
        "rw_beta": args.rw_beta,
        "rw_tol": args.rw_tol,
        "gc_max_sweeps": args.gc_max_sweeps,
        "border_thickness": args.border_thickness,
        "invert": args.invert,
        "reweigh_after_morph": args.reweigh_after_morph,
    }
    if args.no_preprocess:
        overrides["preprocess"] = False
    if args.weighting_flag is not None:
        overrides["weighting"] = args.weighting_flag == "on"
    if args.morph_flag is not None:
        overrides["morph_variant"] = morph_map[args.morph_flag]
    return overrides


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    text = args.config or ""
    overrides = _overrides_from_args(args)
    if not text:
        # Flag-only assembly still needs a seeding method and a segmenter.
        method = overrides.get("seed_method")
        segmenter = overrides.get("segmenter")
        if not method or not segmenter:
            raise ConfigError(
                "no --config given: --seed-method and --segmenter are required"
            )
        token = {"otsu": "So", "gmm": "Sg", "mbd": "Sm", "ft": "St"}[method]
        text = f"{token},{segmenter}"
    return parse_config(text, overrides)


def _artifact_ext(ndim: int) -> str:
    return ".pgm" if ndim == 2 else ".g3d"


def _collect_artifacts(result: PipelineResult) -> dict[str, bytes]:
    ext = _artifact_ext(result.label_map.labels.ndim)
    artifacts = {
        "label" + ext: labelmap_to_bytes(result.label_map),
        "seeds" + ext: mask_to_bytes(result.seeds),
        "strength" + ext: weights_to_bytes(result.strengths.weights),
    }
    if result.saliency is not None:
        artifacts["saliency" + ext] = weights_to_bytes(result.saliency.scores)
    return artifacts


def _build_manifest(
    config: PipelineConfig,
    input_path: str,
    input_sha256: str,
    result: PipelineResult,
    artifact_names: list[str],
) -> dict:
    return {
        "schema": MANIFEST_SCHEMA,
        "config": config.to_json(),
        "input": {"path": str(input_path), "sha256": input_sha256},
        "artifacts": sorted(artifact_names),
        "seeding_report": result.report.to_json(),
        "seed_conflicts": result.conflicts,
        "segmenter_info": {
            k: v for k, v in result.segmenter_info.items() if k != "warnings"
        },
        "warnings": list(result.warnings),
        "timings_ms": {k: round(v, 3) for k, v in result.timings_ms.items()},
    }


def _write_atomically(out_dir: Path, files: dict[str, bytes]) -> None:
    """All-or-nothing artifact emission: stage to temp names, then rename."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staged: list[tuple[Path, Path]] = []
    try:
        for name, payload in files.items():
            tmp = out_dir / f".{name}.tmp-{os.getpid()}"
            tmp.write_bytes(payload)
            staged.append((tmp, out_dir / name))
        for tmp, final in staged:
            os.replace(tmp, final)
    except OSError:
        for tmp, _ in staged:
            tmp.unlink(missing_ok=True)
        raise


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = _build_config(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    try:
        data = Path(args.input).read_bytes()
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read input: {exc}")
    try:
        grid = load_grid(data)
    except (FormatError, GridError) as exc:
        return _fail(EXIT_IO, f"cannot ingest input: {exc}")

    try:
        result = segment(config, grid)
    except PipelineError as exc:
        code = _STAGE_EXIT_CODES.get(exc.stage, EXIT_PIPELINE)
        return _fail(code, f"stage {exc.stage}: {exc.message}")

    artifacts = _collect_artifacts(result)
    manifest = _build_manifest(
        config,
        args.input,
        hashlib.sha256(data).hexdigest(),
        result,
        list(artifacts.keys()) + ["manifest.json"],
    )
    artifacts["manifest.json"] = (
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    ).encode()
    try:
        _write_atomically(Path(args.out), artifacts)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write artifacts: {exc}")
    if args.verbose:
        print(f"wrote {len(artifacts)} artifacts to {args.out}")
        for warning in result.warnings:
            print(f"warning: {warning}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        config_lines = [
            line.strip()
            for line in Path(args.configs).read_text().splitlines()
            if line.strip() and not line.strip().startswith("#")
        ]
        phantom_specs = json.loads(Path(args.phantoms).read_text())
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    except json.JSONDecodeError as exc:
        return _fail(EXIT_CONFIG, f"bad phantom file: {exc}")
    try:
        configs = [(line, parse_config(line)) for line in config_lines]
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    try:
        phantoms = [make_phantom(PhantomSpec.from_json(spec)) for spec in phantom_specs]
    except (GridError, KeyError) as exc:
        return _fail(EXIT_CONFIG, f"bad phantom descriptor: {exc}")
    if not configs or not phantoms:
        return _fail(EXIT_CONFIG, "need at least one config and one phantom")

    report = benchmark(configs, phantoms)
    try:
        csv_path, json_path = write_report(report, args.out)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    if args.verbose:
        print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    frontend = args.frontend
    if frontend is None and Path("frontend/dist").is_dir():
        frontend = "frontend/dist"
    app = create_app(frontend_dir=frontend, snapshot_dir=args.snapshots)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info" if args.verbose else "warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seedforge",
        description="Automated seed mask generation and seeded segmentation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="segment a single image")
    run.add_argument("--config", help="pipeline string, e.g. P,Sm,W,Me,gc")
    run.add_argument("--in", dest="input", required=True, help="input image (PGM or grid3d)")
    run.add_argument("--out", required=True, help="output artifact directory")
    run.add_argument("--verbose", action="store_true")
    _add_override_flags(run)
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="run configurations over phantoms")
    bench.add_argument("--configs", required=True, help="file with one pipeline string per line")
    bench.add_argument("--phantoms", required=True, help="JSON list of phantom descriptors")
    bench.add_argument("--out", required=True, help="report base path (emits .csv and .json)")
    bench.add_argument("--verbose", action="store_true")
    bench.set_defaults(func=cmd_bench)

    serve = sub.add_parser("serve", help="launch the refinement session service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--frontend", default=None, help="static frontend directory to mount")
    serve.add_argument("--snapshots", default=None, help="session snapshot directory")
    serve.add_argument("--verbose", action="store_true")
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
