"""Labeled corpora: manifest files, session splits and a synthetic generator.

A manifest is UTF-8 text with one tab-separated record per line::

    class_id  label  session  index  path

Lines starting with ``#`` and blank lines are ignored. ``label`` names the
class and may carry a per-image category after a colon, e.g.
``m-001:scarf``; the class part must agree across a class's lines. Paths
are relative to the manifest's directory unless absolute.
"""

from __future__ import annotations

import os
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientImagesError, ParseError, ValidationError
from .imaging import GrayImage, load_gray, write_pgm

MANIFEST_NAME = "manifest.tsv"


@dataclass(frozen=True)
class ManifestEntry:
    class_id: int
    session: int
    index: int
    path: str
    category: str | None = None


@dataclass(frozen=True)
class CorpusManifest:
    classes: tuple[tuple[int, str], ...]
    entries: tuple[ManifestEntry, ...]
    root: Path | None = field(default=None, compare=False)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        if p.is_absolute() or self.root is None:
            return p
        return self.root / p

    def label_of(self, class_id: int) -> str:
        return dict(self.classes)[class_id]


@dataclass(frozen=True)
class SplitSpec:
    train_per_class: int = 13
    test_per_class: int = 13
    train_session: int = 1
    test_session: int = 2

    def __post_init__(self):
        if self.train_per_class < 1 or self.test_per_class < 1:
            raise ValueError("per-class image counts must be >= 1")
        if self.train_session not in (1, 2) or self.test_session not in (1, 2):
            raise ValueError("sessions must be 1 or 2")


def _split_label(raw: str) -> tuple[str, str | None]:
    name, sep, category = raw.partition(":")
    return name, (category if sep else None)


def parse_manifest(text: str, path=None, root: Path | None = None) -> CorpusManifest:
    labels: dict[int, tuple[str, int]] = {}
    entries: list[ManifestEntry] = []
    seen_paths: dict[str, int] = {}
    seen_slots: dict[tuple[int, int, int], int] = {}

    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.rstrip("\r").split("\t")
        if len(fields) != 5:
            raise ParseError(f"expected 5 tab-separated fields, found {len(fields)}", path, lineno)
        raw_id, raw_label, raw_session, raw_index, rel = fields
        try:
            class_id, session, index = int(raw_id), int(raw_session), int(raw_index)
        except ValueError:
            raise ParseError("class_id, session and index must be integers", path, lineno) from None
        if class_id < 0:
            raise ValidationError(f"negative class_id {class_id}", path, lineno)
        if session not in (1, 2):
            raise ValidationError(f"session must be 1 or 2, got {session}", path, lineno)
        if not rel:
            raise ValidationError("empty path", path, lineno)
        if rel in seen_paths:
            raise ValidationError(
                f"duplicate path {rel!r} (first seen on line {seen_paths[rel]})", path, lineno
            )
        slot = (class_id, session, index)
        if slot in seen_slots:
            raise ValidationError(
                f"duplicate index {index} for class {class_id} session {session} "
                f"(first seen on line {seen_slots[slot]})",
                path,
                lineno,
            )
        name, category = _split_label(raw_label)
        if class_id in labels and labels[class_id][0] != name:
            raise ValidationError(
                f"class {class_id} labelled {name!r}, but {labels[class_id][0]!r} "
                f"on line {labels[class_id][1]}",
                path,
                lineno,
            )
        labels.setdefault(class_id, (name, lineno))
        seen_paths[rel] = lineno
        seen_slots[slot] = lineno
        entries.append(ManifestEntry(class_id, session, index, rel, category))

    ids = sorted(labels)
    if ids != list(range(len(ids))):
        missing = sorted(set(range(max(ids, default=-1) + 1)) - set(ids))
        raise ValidationError(
            f"class ids must be dense from 0; missing {missing[:10]}", path, None
        )
    classes = tuple((cid, labels[cid][0]) for cid in ids)
    return CorpusManifest(classes, tuple(entries), root)


def load_manifest(path) -> CorpusManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8 ({exc.reason})", path) from None
    return parse_manifest(text, path, root=path.parent)


def format_manifest(manifest: CorpusManifest) -> str:
    labels = dict(manifest.classes)
    lines = ["# class_id\tlabel\tsession\tindex\tpath"]
    for e in manifest.entries:
        label = labels[e.class_id]
        if e.category is not None:
            label = f"{label}:{e.category}"
        lines.append(f"{e.class_id}\t{label}\t{e.session}\t{e.index}\t{e.path}")
    return "\n".join(lines) + "\n"


def write_manifest(path, manifest: CorpusManifest) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_manifest(manifest), encoding="utf-8")


def _session_entries(manifest: CorpusManifest, session: int):
    by_class = defaultdict(list)
    for e in manifest.entries:
        if e.session == session:
            by_class[e.class_id].append(e)
    for lst in by_class.values():
        lst.sort(key=lambda e: e.index)
    return by_class


def _take(manifest, session, count):
    by_class = _session_entries(manifest, session)
    out = []
    for cid, _ in manifest.classes:
        available = by_class.get(cid, [])
        if len(available) < count:
            raise InsufficientImagesError(cid, session, count, len(available))
        out.extend(available[:count])
    return out


def split(manifest: CorpusManifest, spec: SplitSpec):
    """Return ``(train, test)`` entry lists: the first images by index per class."""
    train = _take(manifest, spec.train_session, spec.train_per_class)
    test = _take(manifest, spec.test_session, spec.test_per_class)
    return train, test


def synth_corpus(num_classes, per_session, width, height, noise, seed):
    """Generate a two-session corpus of noisy copies of per-class random patterns.

    Each class gets a uniform random 8-bit base pattern. Every image copies
    it and replaces each pixel, independently with probability ``noise``, by
    a fresh uniform random value. Returns ``(manifest, images)`` where
    ``images`` maps manifest paths to :class:`GrayImage`.
    """
    if num_classes < 1 or per_session < 1 or width < 1 or height < 1:
        raise ValueError("class count, images per session and dimensions must be positive")
    if not 0.0 <= noise <= 1.0:
        raise ValueError(f"noise must lie in [0, 1], got {noise}")
    rng = np.random.default_rng(seed)
    classes = []
    entries = []
    images = {}
    for cid in range(num_classes):
        label = f"class{cid:03d}"
        classes.append((cid, label))
        base = rng.integers(0, 256, size=(height, width), dtype=np.uint8)
        for session in (1, 2):
            for index in range(1, per_session + 1):
                replace = rng.random((height, width)) < noise
                fresh = rng.integers(0, 256, size=(height, width), dtype=np.uint8)
                pixels = np.where(replace, fresh, base)
                rel = f"{label}/s{session}_{index:02d}.pgm"
                entries.append(ManifestEntry(cid, session, index, rel))
                images[rel] = GrayImage.from_uint8(pixels)
    return CorpusManifest(tuple(classes), tuple(entries)), images


def write_corpus(out_dir, manifest: CorpusManifest, images) -> Path:
    """Write every image as PGM plus ``manifest.tsv``; return the manifest path."""
    out_dir = Path(out_dir)
    for e in manifest.entries:
        write_pgm(out_dir / e.path, images[e.path])
    target = out_dir / MANIFEST_NAME
    write_manifest(target, manifest)
    return target


class ImageSource:
    """Loads gray images for manifest entries, from memory or from disk."""

    def __init__(self, manifest: CorpusManifest, images=None):
        self.manifest = manifest
        self.images = images

    def __call__(self, entry: ManifestEntry) -> GrayImage:
        if self.images is not None and entry.path in self.images:
            return self.images[entry.path]
        return load_gray(os.fspath(self.manifest.resolve(entry)))
