"""Hierarchical temporal memory recognition: spatial pooler features,
Hebbian class maps and XOR template matching."""

__version__ = "0.1.0"

from .corpus import CorpusManifest, ManifestEntry, SplitSpec, load_manifest, split, synth_corpus
from .errors import (
    DimensionError,
    EmptyClassError,
    EmptyModelError,
    HtmError,
    InsufficientImagesError,
    ParseError,
    ValidationError,
)
from .experiment import (
    Architecture,
    ExperimentConfig,
    RunResult,
    compare_architectures,
    delta_sweep,
    run,
)
from .imaging import GrayImage, RgbImage, stddev_filter, to_grayscale
from .matcher import ScoreVector, classify, xor_score
from .spatial_pooler import FeatureMap, SpConfig, compute_overlap, extract, inhibit, init_synapses
from .temporal_memory import (
    BinaryClassMap,
    ClassMap,
    TmConfig,
    binarize,
    new_class_map,
    train_class,
    train_update,
)

__all__ = [
    "CorpusManifest",
    "ManifestEntry",
    "SplitSpec",
    "load_manifest",
    "split",
    "synth_corpus",
    "DimensionError",
    "EmptyClassError",
    "EmptyModelError",
    "HtmError",
    "InsufficientImagesError",
    "ParseError",
    "ValidationError",
    "Architecture",
    "ExperimentConfig",
    "RunResult",
    "compare_architectures",
    "delta_sweep",
    "run",
    "GrayImage",
    "RgbImage",
    "stddev_filter",
    "to_grayscale",
    "ScoreVector",
    "classify",
    "xor_score",
    "FeatureMap",
    "SpConfig",
    "compute_overlap",
    "extract",
    "inhibit",
    "init_synapses",
    "BinaryClassMap",
    "ClassMap",
    "TmConfig",
    "binarize",
    "new_class_map",
    "train_class",
    "train_update",
]
