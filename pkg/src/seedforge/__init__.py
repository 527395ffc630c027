"""seedforge: automated seed mask generation and seeded segmentation."""

__version__ = "0.1.0"

from .config import ConfigError, PipelineConfig, parse_config
from .evaluate import (
    Metrics,
    MetricsError,
    Phantom,
    PhantomSpec,
    XorShift64Star,
    benchmark,
    dice,
    make_phantom,
    seed_error,
)
from .grid import (
    BG,
    FG,
    UNLABELED,
    Connectivity,
    GridError,
    ImageGrid,
    LabelMap,
    SeedMask,
    StrengthMap,
    mask_border,
    merge_seeds,
    normalize_intensities,
)
from .preprocess import BilateralParams, bilateral_filter
from .refine import MorphParams, WeightParams, morph_fg, uniform_strengths, weight_seeds
from .seeding import (
    GmmModel,
    SaliencyMap,
    SeedingError,
    SeedingParams,
    SeedingReport,
    binarize_saliency,
    fit_gmm,
    generate_seeds,
    mbd_distances,
    otsu_threshold,
    saliency_ft,
    saliency_mbd,
    seed_gmm,
    seed_otsu,
)
from .segmenters import (
    PipelineError,
    PipelineResult,
    SegmentationError,
    SolverError,
    SolverParams,
    growcut,
    random_walker,
    segment,
)

__all__ = [
    "__version__",
    "BG",
    "FG",
    "UNLABELED",
    "BilateralParams",
    "ConfigError",
    "Connectivity",
    "GmmModel",
    "GridError",
    "ImageGrid",
    "LabelMap",
    "Metrics",
    "MetricsError",
    "MorphParams",
    "Phantom",
    "PhantomSpec",
    "PipelineConfig",
    "PipelineError",
    "PipelineResult",
    "SaliencyMap",
    "SeedMask",
    "SeedingError",
    "SeedingParams",
    "SeedingReport",
    "SegmentationError",
    "SolverError",
    "SolverParams",
    "StrengthMap",
    "WeightParams",
    "XorShift64Star",
    "benchmark",
    "bilateral_filter",
    "binarize_saliency",
    "dice",
    "fit_gmm",
    "generate_seeds",
    "growcut",
    "make_phantom",
    "mask_border",
    "mbd_distances",
    "merge_seeds",
    "morph_fg",
    "normalize_intensities",
    "otsu_threshold",
    "parse_config",
    "random_walker",
    "saliency_ft",
    "saliency_mbd",
    "seed_error",
    "seed_gmm",
    "seed_otsu",
    "segment",
    "uniform_strengths",
    "weight_seeds",
]
