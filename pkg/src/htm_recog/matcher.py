"""XOR pattern matching of feature maps against binarized class maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EmptyModelError


@dataclass(frozen=True)
class ScoreVector:
    """Mismatch counts in class-map order, as ``(class_id, score)`` pairs."""

    entries: tuple[tuple[int, int], ...]

    @property
    def scores(self) -> list[int]:
        return [s for _, s in self.entries]

    @property
    def best(self) -> int:
        return min(self.scores)

    @property
    def is_tie(self) -> bool:
        return self.scores.count(self.best) > 1

    def margin(self) -> int:
        """Gap between the best and runner-up score (0 on ties or one class)."""
        ordered = sorted(self.scores)
        return ordered[1] - ordered[0] if len(ordered) > 1 else 0

    def as_dict(self) -> dict[int, int]:
        return dict(self.entries)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a bit grid row-major into little-endian uint64 words, zero padded."""
    flat = np.packbits(np.asarray(bits, dtype=np.uint8).ravel())
    pad = (-flat.size) % 8
    if pad:
        flat = np.concatenate([flat, np.zeros(pad, dtype=np.uint8)])
    return flat.view("<u8")


def _hamming(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.bitwise_count(pack_bits(a) ^ pack_bits(b)).sum())


def xor_score(cmap, fm) -> int:
    """Hamming distance between a class map's bits and a feature map's bits."""
    if cmap.bits.shape != fm.bits.shape:
        raise DimensionError(
            f"cannot compare {cmap.bits.shape[1]}x{cmap.bits.shape[0]} class map with "
            f"{fm.bits.shape[1]}x{fm.bits.shape[0]} feature map"
        )
    return _hamming(cmap.bits, fm.bits)


def _prepare(maps):
    maps = sorted(maps, key=lambda m: m.class_id)
    if not maps:
        raise EmptyModelError("no class maps to classify against")
    shape = maps[0].bits.shape
    for m in maps:
        if m.bits.shape != shape:
            raise DimensionError(
                f"class map {m.class_id} has shape {m.bits.shape}, expected {shape}"
            )
    return maps, shape, np.stack([pack_bits(m.bits) for m in maps])


def _score(fm, maps, shape, packed) -> tuple[int, ScoreVector]:
    if fm.bits.shape != shape:
        raise DimensionError(f"feature map shape {fm.bits.shape} does not match class maps {shape}")
    scores = np.bitwise_count(packed ^ pack_bits(fm.bits)).sum(axis=1)
    winner = int(np.argmin(scores))
    vector = ScoreVector(tuple((m.class_id, int(s)) for m, s in zip(maps, scores)))
    return maps[winner].class_id, vector


def classify(fm, maps) -> tuple[int, ScoreVector]:
    """Return the class with the fewest mismatches and the full score vector.

    Ties go to the lowest class id; the vector is ordered by class id.
    """
    return _score(fm, *_prepare(maps))


def classify_many(fms, maps) -> list[tuple[int, ScoreVector]]:
    """:func:`classify` over many feature maps, packing the class maps once."""
    prepared = _prepare(maps)
    return [_score(fm, *prepared) for fm in fms]
