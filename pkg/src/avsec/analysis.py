"""Class-level action-vector structure and clustering.

Averaging the graded AVs within each class yields one row per class whose
high-rated actions characterize it; an action "dominates" a row when it sits
at least one standard deviation above the row mean. K-means over all clip AVs
groups sound events by shared actions regardless of their class labels.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .annotations import ActionVector
from .dataset import ActionTaxonomy, FoldedDataset
from .errors import DataError

log = logging.getLogger(__name__)


@dataclass
class ClassAvMatrix:
    matrix: np.ndarray  # (n_classes, 20) class-mean graded AVs
    class_order: list[int]
    class_names: list[str]
    actions: tuple[str, ...]


def class_average_avs(
    dataset: FoldedDataset,
    avs: Mapping[str, ActionVector],
    taxonomy: ActionTaxonomy | None = None,
) -> ClassAvMatrix:
    """Per-class arithmetic mean of the graded clip AVs."""
    taxonomy = taxonomy or ActionTaxonomy()
    classes = sorted(dataset.class_names)
    rows = []
    for cls in classes:
        clip_ids = [c.clip_id for c in dataset.clips if c.target == cls]
        if not clip_ids:
            raise DataError(f"class {cls} has no clips")
        vectors = []
        for cid in clip_ids:
            if cid not in avs:
                raise DataError(f"clip {cid!r} has no action vector")
            av = avs[cid]
            if av.scale != "graded":
                raise DataError(f"clip {cid!r}: class averages need graded AVs, got {av.scale!r}")
            vectors.append(av.as_array())
        rows.append(np.mean(vectors, axis=0))
    return ClassAvMatrix(
        matrix=np.vstack(rows),
        class_order=classes,
        class_names=[dataset.class_names[c] for c in classes],
        actions=taxonomy.actions,
    )


def dominant_actions(row: np.ndarray, taxonomy: ActionTaxonomy | None = None) -> list[str]:
    """Actions rated at least one standard deviation above the row mean.

    The spread is the population standard deviation over the 20 entries, so a
    constant row (sigma 0) dominates nothing.
    """
    taxonomy = taxonomy or ActionTaxonomy()
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (len(taxonomy),):
        raise DataError(f"expected a {len(taxonomy)}-dim row, got shape {row.shape}")
    sigma = row.std()
    if sigma == 0.0:
        return []
    threshold = row.mean() + sigma
    return [taxonomy.actions[i] for i in np.nonzero(row >= threshold)[0]]


@dataclass
class ClusterResult:
    k: int
    assignments: np.ndarray  # (n,) cluster index per clip
    centroids: np.ndarray  # (k, dim)
    inertia: float
    iterations: int
    inertia_history: list[float]  # one value per Lloyd iteration, non-increasing
    labels: list[list[str]] | None = None  # dominant actions per cluster


def _plusplus_seed(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: new centers drawn proportionally to squared distance."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:  # all remaining points coincide with a center
            centers[i] = X[rng.integers(n)]
            continue
        centers[i] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((X - centers[i]) ** 2).sum(axis=1))
    return centers


def kmeans(
    X: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
) -> ClusterResult:
    """Lloyd's algorithm with k-means++ seeding; deterministic for a seed.

    Converges when assignments stop changing (a fixed point) or at
    ``max_iter``. An emptied cluster is re-seeded from the point farthest
    from its assigned centroid, which cannot increase the inertia.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("kmeans expects a nonempty (n, dim) matrix")
    n = X.shape[0]
    if not 1 <= k <= n:
        raise DataError(f"k must be in 1..{n}, got {k}")
    rng = np.random.default_rng(seed)
    centroids = _plusplus_seed(X, k, rng)
    assignments = np.full(n, -1, dtype=np.int64)
    iterations = 0
    history: list[float] = []
    for iterations in range(1, max_iter + 1):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assignments = d2.argmin(axis=1)
        for cluster in range(k):
            members = new_assignments == cluster
            if members.any():
                centroids[cluster] = X[members].mean(axis=0)
            else:
                farthest = d2[np.arange(n), new_assignments].argmax()
                centroids[cluster] = X[farthest]
                new_assignments[farthest] = cluster
        history.append(float(((X - centroids[new_assignments]) ** 2).sum()))
        if np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
    inertia = float(((X - centroids[assignments]) ** 2).sum())
    return ClusterResult(
        k=k,
        assignments=assignments,
        centroids=centroids,
        inertia=inertia,
        iterations=iterations,
        inertia_history=history,
    )


def label_clusters(
    result: ClusterResult, taxonomy: ActionTaxonomy | None = None
) -> ClusterResult:
    """Attach each centroid's dominant actions as the cluster label."""
    taxonomy = taxonomy or ActionTaxonomy()
    result.labels = [dominant_actions(c, taxonomy) for c in result.centroids]
    return result


def write_class_avs_csv(path: str | Path, matrix: ClassAvMatrix) -> None:
    """Class-by-action mean matrix, one row per class."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["class_name", *matrix.actions])
        for name, row in zip(matrix.class_names, matrix.matrix):
            writer.writerow([name, *[f"{v:.6g}" for v in row]])


def write_clusters_csv(
    path: str | Path,
    clip_ids: Sequence[str],
    result: ClusterResult,
    avs: np.ndarray,
) -> None:
    """Per-clip cluster assignments plus the AV dims, for external plotting."""
    if len(clip_ids) != len(result.assignments) or len(clip_ids) != avs.shape[0]:
        raise DataError("clip ids, assignments, and AV rows must align")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["clip_id", "cluster", *[f"v{i}" for i in range(1, avs.shape[1] + 1)]])
        for cid, cluster, row in zip(clip_ids, result.assignments, avs):
            writer.writerow([cid, int(cluster), *[f"{v:.6g}" for v in row]])
