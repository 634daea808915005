"""Class-map temporal memory.

One analog map per class accumulates feature maps with a symmetric Hebbian
update: every cell gains ``delta`` where the feature bit is set and loses
``delta`` where it is clear, with the postsynaptic activity held at one.
Weights are clamped to [0, 1]. After training, maps are binarized at
``sigma`` for matching.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from ._io import write_bytes
from .errors import DimensionError, EmptyClassError, ParseError
from .spatial_pooler import FeatureMap, to_spfm_bytes

HTMC_MAGIC = b"HTMC"
HTMC_VERSION = 1
_HTMC_HEADER = struct.Struct("<4sIIIII")


@dataclass(frozen=True)
class TmConfig:
    delta: float = 0.01
    sigma: float = 0.5
    init: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError(f"sigma must lie in [0, 1], got {self.sigma}")
        if not 0.0 <= self.init <= 1.0:
            raise ValueError(f"init must lie in [0, 1], got {self.init}")


@dataclass(frozen=True, eq=False)
class ClassMap:
    class_id: int
    weights: np.ndarray
    train_count: int = 0

    @property
    def cols_w(self) -> int:
        return self.weights.shape[1]

    @property
    def cols_h(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryClassMap:
    class_id: int
    bits: np.ndarray

    @property
    def cols_w(self) -> int:
        return self.bits.shape[1]

    @property
    def cols_h(self) -> int:
        return self.bits.shape[0]

    @classmethod
    def from_feature_map(cls, class_id: int, fm: FeatureMap) -> "BinaryClassMap":
        """Wrap a single feature map as a template (the pooler-only baseline)."""
        return cls(class_id, fm.bits)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def new_class_map(class_id: int, cols_w: int, cols_h: int, cfg: TmConfig) -> ClassMap:
    if cols_w < 1 or cols_h < 1:
        raise DimensionError(f"class map dimensions must be positive, got {cols_w}x{cols_h}")
    return ClassMap(class_id, _frozen(np.full((cols_h, cols_w), cfg.init)), 0)


def train_update(cmap: ClassMap, fm: FeatureMap, cfg: TmConfig) -> ClassMap:
    if fm.bits.shape != cmap.weights.shape:
        raise DimensionError(
            f"feature map {fm.cols_w}x{fm.cols_h} does not match class map "
            f"{cmap.cols_w}x{cmap.cols_h}"
        )
    step = np.where(fm.bits == 1, cfg.delta, -cfg.delta)
    weights = np.clip(cmap.weights + step, 0.0, 1.0)
    return replace(cmap, weights=_frozen(weights), train_count=cmap.train_count + 1)


def binarize(cmap: ClassMap, cfg: TmConfig) -> BinaryClassMap:
    return BinaryClassMap(cmap.class_id, _frozen((cmap.weights >= cfg.sigma).astype(np.uint8)))


def train_class(images, class_id: int, cfg: TmConfig) -> ClassMap:
    images = list(images)
    if not images:
        raise EmptyClassError(f"class {class_id} has no training feature maps")
    first = images[0]
    cmap = new_class_map(class_id, first.cols_w, first.cols_h, cfg)
    for fm in images:
        cmap = train_update(cmap, fm, cfg)
    return cmap


# --- persistence -----------------------------------------------------------


def to_htmc_bytes(cmap: ClassMap) -> bytes:
    header = _HTMC_HEADER.pack(
        HTMC_MAGIC, HTMC_VERSION, cmap.class_id, cmap.cols_w, cmap.cols_h, cmap.train_count
    )
    return header + cmap.weights.astype("<f8").tobytes()


def from_htmc_bytes(data: bytes, path=None) -> ClassMap:
    if len(data) < _HTMC_HEADER.size:
        raise ParseError("truncated HTMC header", path)
    magic, version, class_id, w, h, count = _HTMC_HEADER.unpack_from(data)
    if magic != HTMC_MAGIC:
        raise ParseError(f"bad magic {magic!r} (expected {HTMC_MAGIC!r})", path)
    if version != HTMC_VERSION:
        raise ParseError(f"unsupported HTMC version {version}", path)
    payload = data[_HTMC_HEADER.size :]
    if len(payload) != 8 * w * h:
        raise ParseError(f"HTMC payload has {len(payload)} bytes, expected {8 * w * h}", path)
    weights = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(h, w)
    if not np.all((weights >= 0.0) & (weights <= 1.0)):
        raise ParseError("class map weights outside [0, 1]", path)
    return ClassMap(class_id, _frozen(weights), count)


def write_class_map(path, cmap: ClassMap) -> None:
    write_bytes(path, to_htmc_bytes(cmap))


def read_class_map(path) -> ClassMap:
    with open(path, "rb") as fh:
        return from_htmc_bytes(fh.read(), path)


def write_binary_class_map(path, bmap: BinaryClassMap) -> None:
    """Export using the feature-map bit format."""
    write_bytes(path, to_spfm_bytes(bmap.bits))
