"""Synthetic ESC-shaped fixtures for demos and plumbing tests.

Generates a fold-balanced clip registry, class-structured ratings (each class
prefers a few actions), class-centroid embeddings, and per-class tone WAVs.
Nothing here imitates real data; it only exercises the pipeline end to end.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .annotations import ActionRating
from .dataset import ActionTaxonomy, ClipMeta, FoldedDataset

BROAD = ("animals", "natural", "human", "interior", "exterior")


def synthetic_dataset(
    n_classes: int = 10, clips_per_class: int = 10, n_folds: int = 5
) -> FoldedDataset:
    """Fold-balanced dataset with ESC-style filenames."""
    if clips_per_class % n_folds:
        raise ValueError("clips_per_class must divide evenly into folds")
    clips = []
    source = 10000
    for target in range(n_classes):
        for i in range(clips_per_class):
            fold = 1 + i % n_folds
            name = f"{fold}-{source}-A-{target}.wav"
            source += 1
            clips.append(
                ClipMeta(
                    clip_id=name,
                    filename=name,
                    fold=fold,
                    target=target,
                    class_name=f"class_{target:02d}",
                    category=BROAD[target % len(BROAD)],
                )
            )
    return FoldedDataset(clips)


def class_action_profile(target: int, taxonomy: ActionTaxonomy, rng: np.random.Generator):
    """Two or three preferred actions per class, stable across calls."""
    profile_rng = np.random.default_rng(1000 + target)
    n_pref = int(profile_rng.integers(2, 4))
    return profile_rng.choice(len(taxonomy), size=n_pref, replace=False)


def synthetic_ratings(
    dataset: FoldedDataset,
    taxonomy: ActionTaxonomy | None = None,
    seed: int = 0,
    raters_per_clip: int = 3,
) -> list[ActionRating]:
    """Three plausible ratings per clip: high on the class's preferred actions."""
    taxonomy = taxonomy or ActionTaxonomy()
    rng = np.random.default_rng(seed)
    ratings = []
    for clip in dataset.clips:
        preferred = class_action_profile(clip.target, taxonomy, rng)
        for r in range(raters_per_clip):
            scores = np.zeros(20, dtype=np.int64)
            scores[preferred] = rng.integers(2, 5, size=len(preferred))
            # occasional faint off-profile score
            stray = rng.integers(0, 20)
            if stray not in preferred and rng.random() < 0.3:
                scores[stray] = rng.integers(1, 3)
            ratings.append(
                ActionRating(
                    clip_id=clip.clip_id,
                    annotator_id=f"rater_{r}_{clip.fold}",
                    scores=tuple(int(s) for s in scores),
                )
            )
    return ratings


def synthetic_embeddings(
    dataset: FoldedDataset, dim: int = 64, seed: int = 0, noise: float = 0.5
) -> dict[str, np.ndarray]:
    """Class-centroid embeddings plus Gaussian noise: separable but not trivial."""
    rng = np.random.default_rng(seed)
    centroids = {
        target: np.random.default_rng(2000 + target).normal(size=dim)
        for target in dataset.class_names
    }
    return {
        clip.clip_id: centroids[clip.target] + noise * rng.normal(size=dim)
        for clip in dataset.clips
    }


def write_synthetic_wavs(
    dataset: FoldedDataset,
    audio_dir: str | Path,
    rate: int = 22050,
    duration: float = 0.5,
    seed: int = 0,
) -> None:
    """One WAV per clip: a class-specific tone plus a little noise."""
    audio_dir = Path(audio_dir)
    audio_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    t = np.arange(int(rate * duration)) / rate
    for clip in dataset.clips:
        freq = 220.0 * (1 + clip.target)
        signal = 0.5 * np.sin(2 * np.pi * freq * t) + 0.01 * rng.normal(size=t.size)
        wavfile.write(audio_dir / clip.filename, rate, (signal * 32767).astype(np.int16))
