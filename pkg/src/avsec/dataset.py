"""Clip registry, class taxonomy, and fold bookkeeping for ESC-50-shaped datasets.

The manifest CSV (``filename,fold,target,category,class_name``) is the source
of truth; filename parsing exists only as a consistency check against the
``{fold}-{source}-{take}-{target}.wav`` naming convention.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, NamedTuple

import numpy as np

from .errors import DataError

MANIFEST_COLUMNS = ("filename", "fold", "target", "category", "class_name")

#: The 20-action vocabulary used for all released ESC-50 action ratings.
#: The order is canonical: it fixes the index of every 20-dim vector in the
#: system and must never be permuted.
DEFAULT_ACTIONS = (
    "dripping", "splashing", "pouring", "breaking", "calling",
    "rolling", "scraping", "exhaling", "vibrating", "ringing",
    "groaning", "gasping", "singing", "tapping", "wailing",
    "crumpling", "blowing", "exploding", "rotating", "sizzling",
)

#: Broad category of each ESC-50 target decade (targets 0-9, 10-19, ...).
ESC50_BROAD_CATEGORIES = (
    "animals",
    "natural soundscapes and water sounds",
    "human non-speech sounds",
    "interior and domestic sounds",
    "exterior and urban noises",
)


@dataclass(frozen=True)
class ActionTaxonomy:
    """Ordered action vocabulary; the order is the vector-indexing contract."""

    actions: tuple[str, ...] = DEFAULT_ACTIONS

    def __post_init__(self) -> None:
        if len(self.actions) != 20:
            raise DataError(f"taxonomy must have exactly 20 actions, got {len(self.actions)}")
        if len(set(self.actions)) != len(self.actions):
            raise DataError("taxonomy actions must be unique")

    def __len__(self) -> int:
        return len(self.actions)

    def index(self, action: str) -> int:
        try:
            return self.actions.index(action)
        except ValueError:
            raise DataError(f"unknown action {action!r}") from None


@dataclass(frozen=True)
class ClipMeta:
    clip_id: str
    filename: str
    fold: int
    target: int
    class_name: str
    category: str

    def __post_init__(self) -> None:
        if self.fold not in (1, 2, 3, 4, 5):
            raise DataError(f"clip {self.clip_id!r}: fold must be in 1..5, got {self.fold}")
        if not 0 <= self.target <= 49:
            raise DataError(f"clip {self.clip_id!r}: target must be in 0..49, got {self.target}")


class ParsedName(NamedTuple):
    clip_id: str
    fold: int
    target: int


def parse_clip_filename(name: str) -> ParsedName:
    """Parse ``{fold}-{source}-{take}-{target}.wav`` into (clip_id, fold, target).

    The clip id is the filename itself. Raises :class:`DataError` naming the
    offending token on any malformed input.
    """
    stem = name[:-4] if name.lower().endswith(".wav") else name
    tokens = stem.split("-")
    if len(tokens) != 4:
        raise DataError(f"filename {name!r}: expected 4 dash-separated tokens, got {len(tokens)}")
    try:
        fold = int(tokens[0])
    except ValueError:
        raise DataError(f"filename {name!r}: fold token {tokens[0]!r} is not an integer") from None
    try:
        target = int(tokens[3])
    except ValueError:
        raise DataError(f"filename {name!r}: target token {tokens[3]!r} is not an integer") from None
    return ParsedName(clip_id=name, fold=fold, target=target)


class FoldedDataset:
    """Immutable collection of clips with class labels and 5-fold assignments."""

    def __init__(self, clips: Iterable[ClipMeta]):
        self.clips: tuple[ClipMeta, ...] = tuple(clips)
        self.by_id: dict[str, ClipMeta] = {}
        for clip in self.clips:
            if clip.clip_id in self.by_id:
                raise DataError(f"duplicate clip {clip.clip_id!r}")
            self.by_id[clip.clip_id] = clip
        names: dict[int, str] = {}
        for clip in self.clips:
            prev = names.setdefault(clip.target, clip.class_name)
            if prev != clip.class_name:
                raise DataError(
                    f"target {clip.target} maps to both {prev!r} and {clip.class_name!r}"
                )
        self.class_names: dict[int, str] = names

    def __len__(self) -> int:
        return len(self.clips)

    def __iter__(self):
        return iter(self.clips)

    @property
    def clip_ids(self) -> list[str]:
        return [c.clip_id for c in self.clips]

    @property
    def targets(self) -> np.ndarray:
        return np.array([c.target for c in self.clips], dtype=np.int64)

    @property
    def folds(self) -> np.ndarray:
        return np.array([c.fold for c in self.clips], dtype=np.int64)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def present_folds(self) -> list[int]:
        return sorted({c.fold for c in self.clips})

    def clips_in_fold(self, fold: int) -> list[ClipMeta]:
        return [c for c in self.clips if c.fold == fold]

    def subset(self, keep: Callable[[ClipMeta], bool]) -> "FoldedDataset":
        """Filtered copy; fold membership of surviving clips is unchanged."""
        return FoldedDataset(c for c in self.clips if keep(c))

    def without_classes(self, targets: Iterable[int]) -> "FoldedDataset":
        dropped = set(targets)
        unknown = dropped - set(self.class_names)
        if unknown:
            raise DataError(f"cannot remove absent classes: {sorted(unknown)}")
        if len(self.class_names) - len(dropped) < 2:
            raise DataError("removing these classes leaves fewer than 2 classes")
        return self.subset(lambda c: c.target not in dropped)

    def validate_balance(self, clips_per_class: int = 40) -> None:
        """Check the full-manifest invariants: equal class sizes and per-fold balance."""
        per_class = Counter(c.target for c in self.clips)
        for target, count in sorted(per_class.items()):
            if count != clips_per_class:
                raise DataError(
                    f"class {target} ({self.class_names[target]!r}) has {count} clips, "
                    f"expected {clips_per_class}"
                )
        per_fold_class = Counter((c.fold, c.target) for c in self.clips)
        expected = clips_per_class // len(self.present_folds())
        for key, count in sorted(per_fold_class.items()):
            if count != expected:
                raise DataError(f"(fold, class) {key} has {count} clips, expected {expected}")

    def check_filename_consistency(self) -> None:
        """Cross-check manifest rows against the filename convention."""
        for clip in self.clips:
            parsed = parse_clip_filename(clip.filename)
            if parsed.fold != clip.fold or parsed.target != clip.target:
                raise DataError(
                    f"clip {clip.clip_id!r}: filename says fold={parsed.fold} "
                    f"target={parsed.target}, manifest says fold={clip.fold} target={clip.target}"
                )


def load_manifest(path: str | Path) -> FoldedDataset:
    """Load the manifest CSV (``filename,fold,target,category,class_name``)."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file, expected a manifest header")
        missing = [c for c in MANIFEST_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise DataError(f"{path}: missing manifest columns {missing}")
        clips = []
        for lineno, row in enumerate(reader, start=2):
            try:
                fold = int(row["fold"])
                target = int(row["target"])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            try:
                clips.append(
                    ClipMeta(
                        clip_id=row["filename"],
                        filename=row["filename"],
                        fold=fold,
                        target=target,
                        class_name=row["class_name"],
                        category=row["category"],
                    )
                )
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return FoldedDataset(clips)


def load_esc50_meta(path: str | Path) -> FoldedDataset:
    """Adapter for the published ESC-50 ``meta/esc50.csv`` layout.

    That file names the 50 classes in its ``category`` column and carries no
    broad-category column; the broad category is recovered from the target
    decade (0-9 animals, 10-19 natural, ...).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"filename", "fold", "target", "category"} <= set(
            reader.fieldnames
        ):
            raise DataError(f"{path}: not an ESC-50 meta file")
        clips = [
            ClipMeta(
                clip_id=row["filename"],
                filename=row["filename"],
                fold=int(row["fold"]),
                target=int(row["target"]),
                class_name=row["category"],
                category=ESC50_BROAD_CATEGORIES[int(row["target"]) // 10],
            )
            for row in reader
        ]
    return FoldedDataset(clips)


def write_manifest(path: str | Path, dataset: FoldedDataset) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for clip in dataset.clips:
            writer.writerow([clip.filename, clip.fold, clip.target, clip.category, clip.class_name])
