"""Declarative pipeline configuration.

A pipeline is written as a comma-separated token string, e.g.
``P,Sm,W,Me,gc``: optional pre-filter ``P``, one seeding method
(``So``/``Sg``/``Sm``/``St``), optional weighting ``W``, optional
morphology (``Mo`` opening / ``Me`` erosion), and a segmenter
(``gc``/``rw``).  Tokens may appear in any order; serialization always
emits the canonical order above.  Numeric parameters ride along as typed
sub-configs and can be overridden by CLI flags.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .preprocess import BilateralParams
from .refine import MorphParams, WeightParams
from .seeding import SeedingParams
from .segmenters import SolverParams

_SEED_TOKENS = {"So": "otsu", "Sg": "gmm", "Sm": "mbd", "St": "ft"}
_SEED_NAMES = {v: k for k, v in _SEED_TOKENS.items()}
_MORPH_TOKENS = {"Mo": "opening", "Me": "erosion"}
_MORPH_NAMES = {v: k for k, v in _MORPH_TOKENS.items()}


class ConfigError(ValueError):
    """Raised on unparseable pipeline strings or invalid overrides."""


@dataclass(frozen=True)
class PipelineConfig:
    seeding: SeedingParams
    segmenter: str
    preprocess: bool = False
    weighting: bool = False
    bilateral: BilateralParams = field(default_factory=BilateralParams)
    weight: WeightParams = field(default_factory=WeightParams)
    morph: MorphParams = field(default_factory=MorphParams)
    solver: SolverParams = field(default_factory=SolverParams)
    border_thickness: int = 1
    invert: bool = False
    reweigh_after_morph: bool = False

    def to_string(self) -> str:
        """Canonical token form, omitting disabled stages."""
        tokens = []
        if self.preprocess:
            tokens.append("P")
        tokens.append(_SEED_NAMES[self.seeding.method])
        if self.weighting:
            tokens.append("W")
        if self.morph.variant != "none":
            tokens.append(_MORPH_NAMES[self.morph.variant])
        tokens.append(self.segmenter)
        return ",".join(tokens)

    def to_json(self) -> dict:
        return {
            "pipeline": self.to_string(),
            "preprocess": self.preprocess,
            "bilateral": {
                "sigma_spatial": self.bilateral.sigma_spatial,
                "sigma_range": self.bilateral.sigma_range,
                "radius": self.bilateral.radius,
            },
            "seeding": {
                "method": self.seeding.method,
                "bins": self.seeding.bins,
                "gmm_k": self.seeding.gmm_k,
                "gmm_max_iter": self.seeding.gmm_max_iter,
                "gmm_tol": self.seeding.gmm_tol,
                "mbd_passes": self.seeding.mbd_passes,
                "top_fraction": self.seeding.top_fraction,
            },
            "weighting": self.weighting,
            "weight": {
                "sigma_factor": self.weight.sigma_factor,
                "bg_weight": self.weight.bg_weight,
            },
            "morph": {"variant": self.morph.variant, "iterations": self.morph.iterations},
            "segmenter": self.segmenter,
            "solver": {
                "cg_tol": self.solver.cg_tol,
                "cg_max_iter": self.solver.cg_max_iter,
                "gc_max_sweeps": self.solver.gc_max_sweeps,
                "rw_beta": self.solver.rw_beta,
            },
            "border_thickness": self.border_thickness,
            "invert": self.invert,
            "reweigh_after_morph": self.reweigh_after_morph,
        }


def parse_config(text: str, overrides: dict | None = None) -> PipelineConfig:
    """Parse a pipeline string, then apply flag overrides.

    Rejects unknown tokens (with their position), duplicate stages, and
    pipelines missing a seeding method or segmenter.
    """
    preprocess = False
    weighting = False
    seed_method: str | None = None
    morph_variant = "none"
    segmenter: str | None = None

    tokens = [t.strip() for t in text.split(",")] if text.strip() else []
    for pos, token in enumerate(tokens):
        if token == "P":
            if preprocess:
                raise ConfigError(f"duplicate stage 'P' at token {pos}")
            preprocess = True
        elif token == "W":
            if weighting:
                raise ConfigError(f"duplicate stage 'W' at token {pos}")
            weighting = True
        elif token in _SEED_TOKENS:
            if seed_method is not None:
                raise ConfigError(f"duplicate seeding stage {token!r} at token {pos}")
            seed_method = _SEED_TOKENS[token]
        elif token in _MORPH_TOKENS:
            if morph_variant != "none":
                raise ConfigError(f"duplicate morphology stage {token!r} at token {pos}")
            morph_variant = _MORPH_TOKENS[token]
        elif token in ("gc", "rw"):
            if segmenter is not None:
                raise ConfigError(f"duplicate segmenter {token!r} at token {pos}")
            segmenter = token
        else:
            raise ConfigError(f"unknown token {token!r} at position {pos}")
    if seed_method is None:
        raise ConfigError("missing seeding method (one of So, Sg, Sm, St)")
    if segmenter is None:
        raise ConfigError("missing segmenter (gc or rw)")

    config = PipelineConfig(
        seeding=SeedingParams(method=seed_method),
        segmenter=segmenter,
        preprocess=preprocess,
        weighting=weighting,
        morph=MorphParams(variant=morph_variant),
    )
    if overrides:
        config = apply_overrides(config, overrides)
    return config


_OVERRIDE_TARGETS = {
    "bilateral_sigma_spatial": ("bilateral", "sigma_spatial", float),
    "bilateral_sigma_range": ("bilateral", "sigma_range", float),
    "bilateral_radius": ("bilateral", "radius", int),
    "seed_method": ("seeding", "method", str),
    "gmm_k": ("seeding", "gmm_k", int),
    "mbd_passes": ("seeding", "mbd_passes", int),
    "top_fraction": ("seeding", "top_fraction", float),
    "sigma_factor": ("weight", "sigma_factor", float),
    "bg_weight": ("weight", "bg_weight", float),
    "morph_variant": ("morph", "variant", str),
    "morph_iters": ("morph", "iterations", int),
    "rw_beta": ("solver", "rw_beta", float),
    "rw_tol": ("solver", "cg_tol", float),
    "gc_max_sweeps": ("solver", "gc_max_sweeps", int),
}

_TOP_LEVEL_OVERRIDES = {
    "preprocess": bool,
    "weighting": bool,
    "segmenter": str,
    "border_thickness": int,
    "invert": bool,
    "reweigh_after_morph": bool,
}


def apply_overrides(config: PipelineConfig, overrides: dict) -> PipelineConfig:
    for key, value in overrides.items():
        if value is None:
            continue
        if key in _TOP_LEVEL_OVERRIDES:
            config = replace(config, **{key: _TOP_LEVEL_OVERRIDES[key](value)})
        elif key in _OVERRIDE_TARGETS:
            attr, fieldname, cast = _OVERRIDE_TARGETS[key]
            sub = getattr(config, attr)
            config = replace(config, **{attr: replace(sub, **{fieldname: cast(value)})})
        else:
            raise ConfigError(f"unknown override {key!r}")
    return config
