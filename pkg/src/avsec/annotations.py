"""Raw rating ingestion, spam filtering, agreement measurement, and action vectors.

One :class:`ActionRating` is a single annotator's 20-score Likert judgment of
one clip. Three surviving ratings per clip are summed elementwise into a
graded :class:`ActionVector` (values 0-12); a binary variant thresholds the
0-1 rescaled values at 0.5.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import ActionTaxonomy
from .errors import DataError, NumericError

log = logging.getLogger(__name__)

LIKERT_POINTS = 5  # scores 0..4
RATERS_PER_CLIP = 3
GRADED_MAX = 4 * RATERS_PER_CLIP  # 12

#: Landis-Koch interpretation bands, as (upper bound, label); kappa <= bound.
KAPPA_BANDS = (
    (0.0, "poor"),
    (0.20, "slight"),
    (0.40, "fair"),
    (0.60, "moderate"),
    (0.80, "substantial"),
    (1.0, "almost-perfect"),
)


@dataclass(frozen=True)
class ActionRating:
    clip_id: str
    annotator_id: str
    scores: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.scores) != 20:
            raise DataError(
                f"rating ({self.annotator_id!r}, {self.clip_id!r}): expected 20 scores, "
                f"got {len(self.scores)}"
            )
        for s in self.scores:
            if not isinstance(s, (int, np.integer)) or not 0 <= s <= 4:
                raise DataError(
                    f"rating ({self.annotator_id!r}, {self.clip_id!r}): score {s!r} not in 0..4"
                )


@dataclass(frozen=True)
class ActionVector:
    clip_id: str
    values: tuple[float, ...]
    scale: str  # "graded" | "unit" | "binary"

    def __post_init__(self) -> None:
        if len(self.values) != 20:
            raise DataError(f"AV {self.clip_id!r}: expected 20 values, got {len(self.values)}")
        if self.scale == "graded":
            lo, hi = 0.0, float(GRADED_MAX)
        elif self.scale in ("unit", "binary"):
            lo, hi = 0.0, 1.0
        else:
            raise DataError(f"AV {self.clip_id!r}: unknown scale {self.scale!r}")
        for v in self.values:
            if not lo <= v <= hi:
                raise DataError(f"AV {self.clip_id!r}: value {v} outside [{lo}, {hi}]")
        if self.scale == "binary" and any(v not in (0.0, 1.0) for v in self.values):
            raise DataError(f"AV {self.clip_id!r}: binary values must be 0 or 1")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


def high_score_fraction(rating: ActionRating) -> float:
    """Fraction of the 20 actions this rating scored 3 or 4."""
    return sum(1 for s in rating.scores if s >= 3) / 20.0


def reject_spammers(
    ratings: Sequence[ActionRating],
    majority_fraction: float = 0.8,
    global_mode: bool = False,
) -> tuple[list[ActionRating], list[tuple[str, str]]]:
    """Drop ratings whose high-score fraction reaches ``majority_fraction``.

    A rating is spam-flagged when (count of scores >= 3) / 20 >= the
    threshold. By default only the flagged (annotator, clip) rating is
    discarded; with ``global_mode`` every rating from a flagged annotator is
    discarded dataset-wide.

    Returns (kept ratings, discarded (annotator_id, clip_id) pairs).
    """
    if not 0.5 < majority_fraction <= 1.0:
        raise DataError(f"majority_fraction must be in (0.5, 1.0], got {majority_fraction}")
    flagged = [r for r in ratings if high_score_fraction(r) >= majority_fraction]
    if global_mode:
        bad_annotators = {r.annotator_id for r in flagged}
        discarded = [r for r in ratings if r.annotator_id in bad_annotators]
    else:
        bad_pairs = {(r.annotator_id, r.clip_id) for r in flagged}
        discarded = [r for r in ratings if (r.annotator_id, r.clip_id) in bad_pairs]
    discarded_keys = {(r.annotator_id, r.clip_id) for r in discarded}
    kept = [r for r in ratings if (r.annotator_id, r.clip_id) not in discarded_keys]
    return kept, sorted(discarded_keys)


def build_action_vector(clip_id: str, ratings: Sequence[ActionRating]) -> ActionVector:
    """Sum exactly 3 ratings for one clip into a graded AV."""
    if len(ratings) != RATERS_PER_CLIP:
        raise DataError(
            f"clip {clip_id!r}: need exactly {RATERS_PER_CLIP} ratings, got {len(ratings)}"
        )
    for r in ratings:
        if r.clip_id != clip_id:
            raise DataError(f"rating for {r.clip_id!r} mixed into clip {clip_id!r}")
    total = np.sum([r.scores for r in ratings], axis=0)
    return ActionVector(clip_id=clip_id, values=tuple(float(v) for v in total), scale="graded")


@dataclass
class BuildReport:
    """What happened to clips that did not have exactly 3 surviving ratings."""

    rescaled: dict[str, int]  # clip_id -> surviving rater count
    excluded: dict[str, int]


def build_action_vectors(
    ratings: Sequence[ActionRating],
    short_policy: str = "rescale",
) -> tuple[dict[str, ActionVector], BuildReport]:
    """Group ratings by clip and build one graded AV per clip.

    Clips with fewer than 3 surviving ratings are handled per ``short_policy``:
    ``rescale`` multiplies the k-rater sum by 3/k, ``exclude`` drops the clip,
    ``strict`` raises. More than 3 ratings for one clip is always an error.
    """
    if short_policy not in ("rescale", "exclude", "strict"):
        raise DataError(f"unknown short_policy {short_policy!r}")
    by_clip: dict[str, list[ActionRating]] = {}
    for r in ratings:
        by_clip.setdefault(r.clip_id, []).append(r)
    avs: dict[str, ActionVector] = {}
    report = BuildReport(rescaled={}, excluded={})
    for clip_id in sorted(by_clip):
        group = by_clip[clip_id]
        if len(group) > RATERS_PER_CLIP:
            raise DataError(f"clip {clip_id!r}: {len(group)} ratings, expected at most 3")
        if len(group) == RATERS_PER_CLIP:
            avs[clip_id] = build_action_vector(clip_id, group)
            continue
        if short_policy == "strict":
            raise DataError(f"clip {clip_id!r}: only {len(group)} surviving ratings")
        if short_policy == "exclude":
            report.excluded[clip_id] = len(group)
            continue
        k = len(group)
        total = np.sum([r.scores for r in group], axis=0) * (RATERS_PER_CLIP / k)
        avs[clip_id] = ActionVector(
            clip_id=clip_id, values=tuple(float(v) for v in total), scale="graded"
        )
        report.rescaled[clip_id] = k
    if report.rescaled or report.excluded:
        log.warning(
            "AV build: %d clips rescaled, %d excluded for missing ratings",
            len(report.rescaled),
            len(report.excluded),
        )
    return avs, report


def to_unit(av: ActionVector) -> ActionVector:
    """Rescale a graded AV to 0-1 by dividing by the graded maximum (12)."""
    if av.scale != "graded":
        raise DataError(f"AV {av.clip_id!r}: to_unit expects graded scale, got {av.scale!r}")
    return replace(av, values=tuple(v / GRADED_MAX for v in av.values), scale="unit")


def quantize_av(av: ActionVector, threshold: float = 0.5) -> ActionVector:
    """Binarize a graded AV: 1 where value/12 >= threshold, else 0."""
    if av.scale != "graded":
        raise DataError(f"AV {av.clip_id!r}: quantize expects graded scale, got {av.scale!r}")
    values = tuple(1.0 if v / GRADED_MAX >= threshold else 0.0 for v in av.values)
    return replace(av, values=values, scale="binary")


def av_sparsity(avs: Iterable[ActionVector]) -> float:
    """Mean number of nonzero dims per AV."""
    counts = [sum(1 for v in av.values if v != 0.0) for av in avs]
    if not counts:
        raise DataError("av_sparsity: empty AV list")
    return float(np.mean(counts))


# ---------------------------------------------------------------------------
# Inter-annotator agreement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgreementReport:
    kappa: float
    n_items: int
    n_raters: int
    n_categories: int
    interpretation: str


def interpret_kappa(kappa: float) -> str:
    if kappa < 0:
        return "poor"
    for bound, label in KAPPA_BANDS[1:]:
        if kappa <= bound:
            return label
    return "almost-perfect"


def fleiss_kappa(table: np.ndarray, n_raters: int) -> AgreementReport:
    """Fleiss' kappa over an item x category count matrix.

    Every row must sum to ``n_raters``. When expected chance agreement is 1
    (all mass in one category), kappa is defined as 1 if observed agreement
    is also perfect and an error otherwise.
    """
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] < 2 or table.shape[1] < 2:
        raise DataError(f"agreement table must be >= 2x2, got shape {table.shape}")
    n_items, n_categories = table.shape
    row_sums = table.sum(axis=1)
    bad = np.nonzero(row_sums != n_raters)[0]
    if bad.size:
        raise DataError(
            f"agreement table row {bad[0]} sums to {row_sums[bad[0]]:g}, expected {n_raters}"
        )
    if n_raters < 2:
        raise DataError("fleiss_kappa needs at least 2 raters")

    p_item = ((table**2).sum(axis=1) - n_raters) / (n_raters * (n_raters - 1))
    p_obs = p_item.mean()
    p_cat = table.sum(axis=0) / (n_items * n_raters)
    p_chance = float((p_cat**2).sum())
    if p_chance >= 1.0:
        if p_obs >= 1.0:
            kappa = 1.0
        else:
            raise NumericError("chance agreement is 1 but observed agreement is not; kappa undefined")
    else:
        kappa = float((p_obs - p_chance) / (1.0 - p_chance))
    return AgreementReport(
        kappa=kappa,
        n_items=n_items,
        n_raters=n_raters,
        n_categories=n_categories,
        interpretation=interpret_kappa(kappa),
    )


def ratings_to_tables(
    ratings: Sequence[ActionRating],
    taxonomy: ActionTaxonomy,
    group: str = "pooled",
) -> dict[str, np.ndarray]:
    """Turn ratings into Fleiss count tables over the 5 Likert categories.

    Items are (clip, action) cells; only cells rated by the full rater
    complement are kept. ``group`` selects one pooled table, one table per
    action (items = clips), or one table per clip (items = actions).
    """
    if group not in ("pooled", "per_action", "per_clip"):
        raise DataError(f"unknown grouping {group!r}")
    by_clip: dict[str, list[ActionRating]] = {}
    for r in ratings:
        by_clip.setdefault(r.clip_id, []).append(r)
    rows: list[tuple[str, int, np.ndarray]] = []  # (clip, action index, category counts)
    for clip_id in sorted(by_clip):
        group_ratings = by_clip[clip_id]
        if len(group_ratings) != RATERS_PER_CLIP:
            continue
        scores = np.array([r.scores for r in group_ratings])  # (3, 20)
        for a in range(len(taxonomy)):
            counts = np.bincount(scores[:, a], minlength=LIKERT_POINTS)
            rows.append((clip_id, a, counts))
    if not rows:
        raise DataError("no fully-rated clips to measure agreement on")
    if group == "pooled":
        return {"pooled": np.stack([c for _, _, c in rows])}
    if group == "per_action":
        return {
            taxonomy.actions[a]: np.stack([c for _, ai, c in rows if ai == a])
            for a in range(len(taxonomy))
        }
    clip_ids = sorted({cid for cid, _, _ in rows})
    return {cid: np.stack([c for ci, _, c in rows if ci == cid]) for cid in clip_ids}


def agreement_report(
    ratings: Sequence[ActionRating],
    taxonomy: ActionTaxonomy,
    group: str = "pooled",
) -> dict[str, AgreementReport]:
    tables = ratings_to_tables(ratings, taxonomy, group=group)
    return {key: fleiss_kappa(tab, RATERS_PER_CLIP) for key, tab in tables.items()}


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------


def ratings_header(taxonomy: ActionTaxonomy) -> list[str]:
    return ["clip_id", "annotator_id", *taxonomy.actions]


def format_ratings_csv(ratings: Sequence[ActionRating], taxonomy: ActionTaxonomy) -> str:
    """CSV text with rows sorted by (clip_id, annotator_id); byte-stable."""
    ordered = sorted(ratings, key=lambda r: (r.clip_id, r.annotator_id))
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(ratings_header(taxonomy))
    for r in ordered:
        writer.writerow([r.clip_id, r.annotator_id, *r.scores])
    return buffer.getvalue()


def write_ratings_csv(
    path: str | Path, ratings: Sequence[ActionRating], taxonomy: ActionTaxonomy
) -> None:
    Path(path).write_text(format_ratings_csv(ratings, taxonomy), encoding="utf-8", newline="")


def load_ratings_csv(path: str | Path, taxonomy: ActionTaxonomy) -> list[ActionRating]:
    """Load the annotation CSV; the header's action names must match the taxonomy."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty annotations file") from None
        expected = ratings_header(taxonomy)
        if header != expected:
            raise DataError(
                f"{path}: header does not match taxonomy; got {header[:4]}..., "
                f"expected {expected[:4]}..."
            )
        ratings = []
        seen: set[tuple[str, str]] = set()
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 22:
                raise DataError(f"{path}:{lineno}: expected 22 fields, got {len(row)}")
            try:
                scores = tuple(int(v) for v in row[2:])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            key = (row[1], row[0])
            if key in seen:
                raise DataError(f"{path}:{lineno}: duplicate rating for {key}")
            seen.add(key)
            try:
                ratings.append(ActionRating(clip_id=row[0], annotator_id=row[1], scores=scores))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return ratings


def _format_value(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_avs_csv(path: str | Path, avs: Mapping[str, ActionVector]) -> None:
    """Export AVs as ``clip_id,scale,v1..v20``, sorted by clip_id; byte-stable."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["clip_id", "scale", *[f"v{i}" for i in range(1, 21)]])
        for clip_id in sorted(avs):
            av = avs[clip_id]
            writer.writerow([av.clip_id, av.scale, *[_format_value(v) for v in av.values]])


def load_avs_csv(path: str | Path) -> dict[str, ActionVector]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty AV file") from None
        if header[:2] != ["clip_id", "scale"] or len(header) != 22:
            raise DataError(f"{path}: unexpected AV header")
        avs: dict[str, ActionVector] = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 22:
                raise DataError(f"{path}:{lineno}: expected 22 fields, got {len(row)}")
            clip_id, scale = row[0], row[1]
            if clip_id in avs:
                raise DataError(f"{path}:{lineno}: duplicate AV for {clip_id!r}")
            try:
                values = tuple(float(v) for v in row[2:])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            avs[clip_id] = ActionVector(clip_id=clip_id, values=values, scale=scale)
    return avs
