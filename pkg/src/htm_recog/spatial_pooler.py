"""Spatial Pooler: random binary synapses, column overlap and block inhibition.

The input raster is tiled into disjoint ``N x N`` receptive fields, one per
column. Each column owns an independent binary connectivity grid drawn from
a per-column random substream, so a whole pooler is reproducible from a
single seed. Overlap is the sum of connected pixel intensities; inhibition
keeps, inside every ``M x M`` block of columns, each column whose overlap
reaches the block maximum.
"""

from __future__ import annotations

import functools
import struct
from dataclasses import dataclass

import numpy as np

from ._io import write_bytes
from .errors import DimensionError, ParseError
from .imaging import GrayImage

SPFM_MAGIC = b"SPFM"
SPFM_VERSION = 1
_SPFM_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class SpConfig:
    n: int = 2
    m: int = 2
    gamma: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


@dataclass(frozen=True, eq=False)
class SynapseMatrix:
    bits: np.ndarray

    @property
    def n(self) -> int:
        return self.bits.shape[0]


@dataclass(frozen=True, eq=False)
class OverlapGrid:
    """Per-column overlap values, shape ``(cols_h, cols_w)``."""

    values: np.ndarray

    @property
    def cols_w(self) -> int:
        return self.values.shape[1]

    @property
    def cols_h(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Binary pooler output, one uint8 bit per column."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise DimensionError(f"feature bits must be 2-D, got shape {bits.shape}")
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("feature bits must be 0 or 1")
        bits = bits.astype(np.uint8, copy=True)
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    @property
    def cols_w(self) -> int:
        return self.bits.shape[1]

    @property
    def cols_h(self) -> int:
        return self.bits.shape[0]

    def __eq__(self, other):
        if not isinstance(other, FeatureMap):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    __hash__ = None


def column_rng(seed: int, column_index: int) -> np.random.Generator:
    """Independent PCG64 stream for one column."""
    return np.random.default_rng([seed, column_index])


def init_synapses(cfg: SpConfig, column_index: int) -> SynapseMatrix:
    weights = column_rng(cfg.seed, column_index).random((cfg.n, cfg.n))
    bits = (weights >= cfg.gamma).astype(np.uint8)
    bits.flags.writeable = False
    return SynapseMatrix(bits)


@functools.lru_cache(maxsize=64)
def _synapse_stack(cfg: SpConfig, count: int) -> np.ndarray:
    stack = np.stack([init_synapses(cfg, i).bits for i in range(count)])
    stack.flags.writeable = False
    return stack


def build_synapses(cfg: SpConfig, cols_w: int, cols_h: int) -> list[SynapseMatrix]:
    """One synapse matrix per column, in row-major column order."""
    return [SynapseMatrix(b) for b in _synapse_stack(cfg, cols_w * cols_h)]


def _column_grid(img: GrayImage, n: int) -> tuple[int, int]:
    if img.width % n or img.height % n:
        raise DimensionError(
            f"{img.width}x{img.height} image is not divisible into {n}x{n} columns"
        )
    return img.width // n, img.height // n


def _blocks(pixels: np.ndarray, n: int) -> np.ndarray:
    """Reshape ``(H, W)`` into ``(H/n, W/n, n, n)`` receptive fields."""
    h, w = pixels.shape
    return pixels.reshape(h // n, n, w // n, n).swapaxes(1, 2)


def _overlap(img: GrayImage, n: int, stack: np.ndarray) -> OverlapGrid:
    blocks = _blocks(img.pixels, n)
    ch, cw = blocks.shape[:2]
    conn = stack.reshape(ch, cw, n, n)
    values = (blocks * conn).sum(axis=(2, 3))
    return OverlapGrid(values)


def compute_overlap(img: GrayImage, cfg: SpConfig, synapses) -> OverlapGrid:
    cols_w, cols_h = _column_grid(img, cfg.n)
    synapses = list(synapses)
    if len(synapses) != cols_w * cols_h:
        raise DimensionError(
            f"expected {cols_w * cols_h} synapse matrices, got {len(synapses)}"
        )
    for s in synapses:
        if s.bits.shape != (cfg.n, cfg.n):
            raise DimensionError(f"synapse matrix of shape {s.bits.shape}, expected {cfg.n}x{cfg.n}")
    stack = np.stack([s.bits for s in synapses])
    return _overlap(img, cfg.n, stack)


def inhibit(grid: OverlapGrid, m: int) -> FeatureMap:
    """Keep every column whose overlap equals the maximum of its ``m x m`` block."""
    ch, cw = grid.values.shape
    if ch % m or cw % m:
        raise DimensionError(
            f"{cw}x{ch} column grid is not divisible into {m}x{m} inhibition blocks"
        )
    blocks = grid.values.reshape(ch // m, m, cw // m, m)
    theta = blocks.max(axis=(1, 3), keepdims=True)
    winners = blocks >= theta
    return FeatureMap(winners.reshape(ch, cw))


def extract(img: GrayImage, cfg: SpConfig) -> FeatureMap:
    cols_w, cols_h = _column_grid(img, cfg.n)
    if cols_w % cfg.m or cols_h % cfg.m:
        raise DimensionError(
            f"{cols_w}x{cols_h} column grid is not divisible into "
            f"{cfg.m}x{cfg.m} inhibition blocks"
        )
    stack = _synapse_stack(cfg, cols_w * cols_h)
    return inhibit(_overlap(img, cfg.n, stack), cfg.m)


# --- serialization ---------------------------------------------------------


def to_pbm_bytes(bits: np.ndarray) -> bytes:
    """Binary PBM (``P4``); a set bit is written as a black pixel."""
    bits = np.asarray(bits, dtype=np.uint8)
    h, w = bits.shape
    rows = np.packbits(bits, axis=1)
    return b"P4\n%d %d\n" % (w, h) + rows.tobytes()


def to_spfm_bytes(bits: np.ndarray) -> bytes:
    """Header (magic, version, cols_w, cols_h) then MSB-first packed row-major bits."""
    bits = np.asarray(bits, dtype=np.uint8)
    h, w = bits.shape
    header = _SPFM_HEADER.pack(SPFM_MAGIC, SPFM_VERSION, w, h)
    return header + np.packbits(bits.ravel()).tobytes()


def from_spfm_bytes(data: bytes, path=None) -> np.ndarray:
    if len(data) < _SPFM_HEADER.size:
        raise ParseError("truncated SPFM header", path)
    magic, version, w, h = _SPFM_HEADER.unpack_from(data)
    if magic != SPFM_MAGIC:
        raise ParseError(f"bad magic {magic!r} (expected {SPFM_MAGIC!r})", path)
    if version != SPFM_VERSION:
        raise ParseError(f"unsupported SPFM version {version}", path)
    payload = data[_SPFM_HEADER.size :]
    needed = (w * h + 7) // 8
    if len(payload) != needed:
        raise ParseError(f"SPFM payload has {len(payload)} bytes, expected {needed}", path)
    flat = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), count=w * h)
    return flat.reshape(h, w)


def write_pbm(path, fm: FeatureMap) -> None:
    write_bytes(path, to_pbm_bytes(fm.bits))


def write_spfm(path, bits: np.ndarray) -> None:
    write_bytes(path, to_spfm_bytes(bits))


def read_spfm(path) -> FeatureMap:
    with open(path, "rb") as fh:
        return FeatureMap(from_spfm_bytes(fh.read(), path))

