"""Feature vectors, normalization, fusion, and the on-disk feature container.

Feature kinds are tagged: ``av`` (20-d graded ratings), ``logmel`` (n_mels-d
temporal means), ``embedding`` (externally computed, typically 6144-d or
512-d), or a ``fused(...)`` concatenation whose tag records each part's
normalization recipe so a result is reproducible from its tag alone.
"""

from __future__ import annotations

import csv
import logging
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, LeakageError

log = logging.getLogger(__name__)

CONTAINER_MAGIC = b"AVSEC1"
ATOMIC_KINDS = ("av", "logmel", "embedding")


@dataclass(frozen=True)
class FusionPart:
    """One block of a fused feature: its kind, width, and normalization recipe."""

    kind: str
    dim: int
    standardize: bool = True
    l2: bool = False

    def tag(self) -> str:
        steps = []
        if self.standardize:
            steps.append("std")
        if self.l2:
            steps.append("l2")
        return f"{self.kind}:{self.dim}:{'+'.join(steps) if steps else 'raw'}"

    @staticmethod
    def parse(tag: str) -> "FusionPart":
        m = re.fullmatch(r"([a-z0-9_]+):(\d+):([a-z0-9+]+)", tag)
        if not m:
            raise DataError(f"bad fusion part tag {tag!r}")
        steps = set(m.group(3).split("+"))
        unknown = steps - {"std", "l2", "raw"}
        if unknown:
            raise DataError(f"bad fusion part tag {tag!r}: unknown steps {sorted(unknown)}")
        return FusionPart(
            kind=m.group(1),
            dim=int(m.group(2)),
            standardize="std" in steps,
            l2="l2" in steps,
        )


@dataclass(frozen=True)
class FusedKind:
    parts: tuple[FusionPart, ...]

    @property
    def dim(self) -> int:
        return sum(p.dim for p in self.parts)

    def tag(self) -> str:
        return "fused(" + "|".join(p.tag() for p in self.parts) + ")"

    @staticmethod
    def parse(tag: str) -> "FusedKind":
        m = re.fullmatch(r"fused\((.+)\)", tag)
        if not m:
            raise DataError(f"bad fused kind tag {tag!r}")
        return FusedKind(tuple(FusionPart.parse(p) for p in m.group(1).split("|")))


@dataclass
class FeatureVector:
    clip_id: str
    kind: str | FusedKind
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise DataError(f"feature {self.clip_id!r}: values must be a vector")
        if not np.all(np.isfinite(self.values)):
            raise DataError(f"feature {self.clip_id!r}: non-finite values")
        if isinstance(self.kind, FusedKind) and self.kind.dim != self.values.size:
            raise DataError(
                f"feature {self.clip_id!r}: fused kind says {self.kind.dim} dims, "
                f"vector has {self.values.size}"
            )
        if self.kind == "av" and self.values.size != 20:
            raise DataError(
                f"feature {self.clip_id!r}: av vectors are 20-dim, got {self.values.size}"
            )

    @property
    def kind_tag(self) -> str:
        return self.kind.tag() if isinstance(self.kind, FusedKind) else self.kind


def l2_normalize(x: np.ndarray, eps: float = 1e-12, return_flags: bool = False):
    """Scale rows (or the single vector) to unit L2 norm.

    Rows with norm <= eps pass through unchanged; their positions are
    reported via ``return_flags`` and a log warning.
    """
    x = np.asarray(x, dtype=np.float64)
    vector = x.ndim == 1
    X = x[None, :] if vector else x
    norms = np.linalg.norm(X, axis=1)
    zero = norms <= eps
    if zero.any():
        log.warning("l2_normalize: %d zero-norm row(s) left unnormalized", int(zero.sum()))
    out = X / np.where(zero, 1.0, norms)[:, None]
    if vector:
        out, zero = out[0], bool(zero[0])
    if return_flags:
        return out, zero
    return out


@dataclass
class Standardizer:
    """Per-dimension mean/scale fitted on training folds only.

    ``fitted_on`` records the folds of the fit set; ``assert_safe_for`` is the
    apply-time leakage check. Zero-variance dims get scale 1 and are flagged
    in ``degenerate`` so the transform never emits NaN.
    """

    means: np.ndarray
    scales: np.ndarray
    fitted_on: frozenset[int]
    degenerate: np.ndarray

    def assert_safe_for(self, test_folds: Iterable[int]) -> None:
        overlap = self.fitted_on & set(test_folds)
        if overlap:
            raise LeakageError(
                f"standardizer was fitted on folds {sorted(self.fitted_on)} but is being "
                f"applied to test folds {sorted(overlap)}"
            )


def fit_standardizer(X: np.ndarray, folds: Iterable[int]) -> Standardizer:
    """Fit population mean/std per dimension on training-fold rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("fit_standardizer needs a nonempty 2-D fit set")
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    degenerate = scales == 0.0
    if degenerate.any():
        log.warning("fit_standardizer: %d zero-variance dim(s)", int(degenerate.sum()))
    scales = np.where(degenerate, 1.0, scales)
    return Standardizer(
        means=means, scales=scales, fitted_on=frozenset(folds), degenerate=degenerate
    )


def apply_standardizer(s: Standardizer, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != s.means.size:
        raise DataError(f"standardizer is {s.means.size}-dim, input is {x.shape[-1]}-dim")
    return (x - s.means) / s.scales


def fuse(parts: Sequence[FeatureVector], recipes: Sequence[FusionPart] | None = None) -> FeatureVector:
    """Concatenate per-clip feature blocks in order, recording each recipe.

    The caller is responsible for having applied each part's normalization
    already (fold-aware standardization lives in the evaluation harness);
    this records what was done so the fused tag is self-describing.
    """
    if not parts:
        raise DataError("fuse needs at least one part")
    clip_ids = {p.clip_id for p in parts}
    if len(clip_ids) != 1:
        raise DataError(f"fuse: parts belong to different clips {sorted(clip_ids)}")
    if recipes is None:
        recipes = [
            FusionPart(kind=p.kind_tag, dim=p.values.size, standardize=False, l2=False)
            for p in parts
        ]
    if len(recipes) != len(parts):
        raise DataError("fuse: one recipe per part required")
    for part, recipe in zip(parts, recipes):
        if recipe.dim != part.values.size:
            raise DataError(
                f"fuse: recipe says {recipe.dim} dims for {recipe.kind!r}, "
                f"part has {part.values.size}"
            )
    values = np.concatenate([p.values for p in parts])
    return FeatureVector(clip_id=parts[0].clip_id, kind=FusedKind(tuple(recipes)), values=values)


# ---------------------------------------------------------------------------
# On-disk container: magic, u32 dim, u32 count, then (u16 id-len, id, dim f32)
# records, all little-endian. A feature-kind tag may trail the records.
# ---------------------------------------------------------------------------


def write_feature_file(
    path: str | Path,
    ids: Sequence[str],
    matrix: np.ndarray,
    kind: str | None = None,
) -> None:
    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise DataError("write_feature_file: matrix rows must match ids")
    dim = matrix.shape[1]
    with Path(path).open("wb") as fh:
        fh.write(CONTAINER_MAGIC)
        fh.write(struct.pack("<II", dim, len(ids)))
        for clip_id, row in zip(ids, matrix):
            encoded = clip_id.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise DataError(f"clip id too long: {clip_id[:40]!r}...")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(row.astype("<f4").tobytes())
        if kind is not None:
            encoded = kind.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)


def read_feature_file(path: str | Path) -> tuple[list[str], np.ndarray, str | None]:
    """Read the binary container; returns (ids, float32 matrix, kind tag or None)."""
    path = Path(path)
    data = path.read_bytes()
    if not data.startswith(CONTAINER_MAGIC):
        raise DataError(f"{path}: bad magic, not a feature container")
    off = len(CONTAINER_MAGIC)
    if len(data) < off + 8:
        raise DataError(f"{path}: truncated header")
    dim, count = struct.unpack_from("<II", data, off)
    off += 8
    ids: list[str] = []
    rows = np.empty((count, dim), dtype=np.float32)
    for i in range(count):
        if len(data) < off + 2:
            raise DataError(f"{path}: truncated at record {i}")
        (id_len,) = struct.unpack_from("<H", data, off)
        off += 2
        if len(data) < off + id_len + 4 * dim:
            raise DataError(f"{path}: truncated at record {i}")
        ids.append(data[off : off + id_len].decode("utf-8"))
        off += id_len
        rows[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=off)
        off += 4 * dim
    kind = None
    if off < len(data):
        (tag_len,) = struct.unpack_from("<H", data, off)
        off += 2
        if len(data) != off + tag_len:
            raise DataError(f"{path}: trailing bytes after kind tag")
        kind = data[off : off + tag_len].decode("utf-8")
    return ids, rows, kind


def _read_feature_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty feature CSV") from None
        if not header or header[0] != "clip_id":
            raise DataError(f"{path}: feature CSV must start with a clip_id column")
        dim = len(header) - 1
        ids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != dim + 1:
                raise DataError(f"{path}:{lineno}: expected {dim + 1} fields, got {len(row)}")
            ids.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return ids, np.asarray(rows, dtype=np.float32).reshape(len(ids), dim)


def load_embeddings(path: str | Path, expected_dim: int | None = None) -> dict[str, FeatureVector]:
    """Load precomputed embeddings from the binary container or its CSV fallback.

    Validates dimension (when ``expected_dim`` given), rejects duplicate clip
    ids and non-finite values.
    """
    path = Path(path)
    with path.open("rb") as fh:
        is_binary = fh.read(len(CONTAINER_MAGIC)) == CONTAINER_MAGIC
    if is_binary:
        ids, matrix, kind = read_feature_file(path)
    else:
        ids, matrix = _read_feature_csv(path)
        kind = None
    if expected_dim is not None and matrix.shape[1] != expected_dim:
        raise DataError(
            f"{path}: expected {expected_dim}-dim vectors, file has {matrix.shape[1]}-dim"
        )
    if not np.all(np.isfinite(matrix)):
        raise DataError(f"{path}: embeddings contain non-finite values")
    if len(set(ids)) != len(ids):
        seen, dup = set(), None
        for i in ids:
            if i in seen:
                dup = i
                break
            seen.add(i)
        raise DataError(f"{path}: duplicate clip id {dup!r}")
    kind = kind or "embedding"
    return {
        clip_id: FeatureVector(clip_id=clip_id, kind=kind, values=row.astype(np.float64))
        for clip_id, row in zip(ids, matrix)
    }


def validate_coverage(features: Mapping[str, object], clip_ids: Iterable[str], what: str) -> None:
    """Fail if any manifest clip lacks a feature."""
    missing = [cid for cid in clip_ids if cid not in features]
    if missing:
        raise DataError(
            f"{what}: {len(missing)} manifest clip(s) have no vector "
            f"(first missing: {missing[0]!r})"
        )
