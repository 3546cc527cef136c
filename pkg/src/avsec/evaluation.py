"""Predefined-fold cross-validation harness, repeated runs, and ablations.

Each present fold serves once as the test set; standardizers are fitted on
the training folds only and checked for leakage when applied. Overall
accuracy is computed across all test folds (trace of the pooled confusion
matrix over its total), and every run can be appended to a JSON-lines results
ledger from which the accuracy table is regenerated.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import mlp as mlp_mod
from . import svm as svm_mod
from .annotations import ActionVector, GRADED_MAX
from .dataset import FoldedDataset
from .errors import DataError, LeakageError
from .features import (
    FeatureVector,
    FusedKind,
    FusionPart,
    Standardizer,
    apply_standardizer,
    fit_standardizer,
    l2_normalize,
)

log = logging.getLogger(__name__)

#: recipe token -> feature kind stored in containers
KIND_BY_TOKEN = {"av": "av", "logmel": "logmel", "ae": "embedding"}

#: canonical report row order (accuracy table shape)
REPORT_ROWS = ("logmel", "av", "ae", "ae+logmel", "av+logmel", "av+ae", "av+ae+logmel")


@dataclass(frozen=True)
class Recipe:
    """Which feature blocks are fused, and each block's normalization steps."""

    tokens: tuple[str, ...]
    standardize: tuple[bool, ...]
    l2: tuple[bool, ...]

    @property
    def name(self) -> str:
        return "+".join(self.tokens)

    def fused_kind(self, dims: Sequence[int]) -> FusedKind:
        return FusedKind(
            tuple(
                FusionPart(kind=KIND_BY_TOKEN[t], dim=d, standardize=s, l2=l)
                for t, d, s, l in zip(self.tokens, dims, self.standardize, self.l2)
            )
        )


def parse_recipe(spec: str, l2_override: bool | None = None) -> Recipe:
    """Parse ``av+ae``-style recipe strings.

    Every block is standardized; blocks are additionally L2-normalized unless
    the recipe is exactly the embedding+AV fusion, which skips that step by
    default. ``l2_override`` forces the flag either way.
    """
    tokens = tuple(t.strip() for t in spec.lower().split("+") if t.strip())
    if not tokens:
        raise DataError(f"empty feature recipe {spec!r}")
    unknown = [t for t in tokens if t not in KIND_BY_TOKEN]
    if unknown:
        raise DataError(f"unknown feature token(s) {unknown} in recipe {spec!r}")
    if len(set(tokens)) != len(tokens):
        raise DataError(f"repeated feature token in recipe {spec!r}")
    if l2_override is None:
        l2 = set(tokens) != {"av", "ae"}
    else:
        l2 = l2_override
    return Recipe(
        tokens=tokens,
        standardize=tuple(True for _ in tokens),
        l2=tuple(l2 for _ in tokens),
    )


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str  # "svm" | "dnn"
    C: float = 35.0
    loss: str = "squared_hinge"
    lr: float = 0.008
    epochs: int = 100
    batch_size: int = 32
    hidden_sizes: tuple[int, ...] = mlp_mod.DEFAULT_HIDDEN_SIZES

    def __post_init__(self) -> None:
        if self.kind not in ("svm", "dnn"):
            raise DataError(f"classifier kind must be 'svm' or 'dnn', got {self.kind!r}")

    def echo(self) -> dict:
        if self.kind == "svm":
            return {"kind": "svm", "C": self.C, "loss": self.loss}
        return {
            "kind": "dnn",
            "lr": self.lr,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "hidden_sizes": list(self.hidden_sizes),
        }

    @property
    def deterministic(self) -> bool:
        return self.kind == "svm"


@dataclass
class CvResult:
    per_fold_accuracy: list[float]
    overall_accuracy: float
    confusion: np.ndarray  # rows true class, cols predicted, ordered by class_order
    class_order: list[int]
    fold_order: list[int]
    run_seed: int
    recipe: str
    classifier: dict


@dataclass
class RepeatedRunSummary:
    n_runs: int
    mean_accuracy: float
    std_accuracy: float
    runs: list[CvResult]


def feature_matrix(
    dataset: FoldedDataset,
    vectors: Mapping[str, "np.ndarray | FeatureVector | ActionVector"],
    what: str = "features",
) -> np.ndarray:
    """Stack per-clip vectors into an (n_clips, dim) matrix in dataset order."""
    rows = []
    for clip in dataset.clips:
        try:
            v = vectors[clip.clip_id]
        except KeyError:
            raise DataError(f"{what}: no vector for manifest clip {clip.clip_id!r}") from None
        if isinstance(v, FeatureVector):
            v = v.values
        elif isinstance(v, ActionVector):
            v = v.as_array()
        rows.append(np.asarray(v, dtype=np.float64))
    dims = {r.size for r in rows}
    if len(dims) > 1:
        raise DataError(f"{what}: inconsistent vector dimensions {sorted(dims)}")
    return np.vstack(rows) if rows else np.empty((0, 0))


def verify_leakage_free(fit_ids: Iterable[str], test_ids: Iterable[str]) -> None:
    """Raise if any test clip appears in a fit set."""
    overlap = set(fit_ids) & set(test_ids)
    if overlap:
        raise LeakageError(
            f"{len(overlap)} clip(s) appear in both fit and test sets "
            f"(e.g. {sorted(overlap)[0]!r})"
        )


def _check_features(dataset: FoldedDataset, features: Mapping[str, np.ndarray], recipe: Recipe):
    for token in recipe.tokens:
        if token not in features:
            raise DataError(f"recipe {recipe.name!r} needs {token!r} features, none supplied")
        mat = features[token]
        if mat.shape[0] != len(dataset):
            raise DataError(
                f"{token!r} feature matrix has {mat.shape[0]} rows for {len(dataset)} clips"
            )
        if not np.all(np.isfinite(mat)):
            raise DataError(f"{token!r} feature matrix contains non-finite values")


def _fit_block_standardizers(
    recipe: Recipe,
    features: Mapping[str, np.ndarray],
    train_mask: np.ndarray,
    train_folds: Iterable[int],
) -> dict[str, Standardizer]:
    stds = {}
    for token, do_std in zip(recipe.tokens, recipe.standardize):
        if do_std:
            stds[token] = fit_standardizer(features[token][train_mask], train_folds)
    return stds


def _transform_blocks(
    recipe: Recipe,
    features: Mapping[str, np.ndarray],
    stds: Mapping[str, Standardizer],
    mask: np.ndarray,
    test_folds: Iterable[int] = (),
) -> np.ndarray:
    blocks = []
    test_folds = list(test_folds)
    for token, do_std, do_l2 in zip(recipe.tokens, recipe.standardize, recipe.l2):
        block = features[token][mask]
        if do_std:
            if test_folds:
                stds[token].assert_safe_for(test_folds)
            block = apply_standardizer(stds[token], block)
        if do_l2:
            block = l2_normalize(block)
        blocks.append(block)
    return np.hstack(blocks)


def _train_classifier(spec: ClassifierSpec, X: np.ndarray, y: np.ndarray, seed: int):
    if spec.kind == "svm":
        return svm_mod.train_linear_svm(X, y, C=spec.C, loss=spec.loss)
    cfg = mlp_mod.TrainConfig(
        lr=spec.lr, epochs=spec.epochs, batch_size=spec.batch_size, seed=seed
    )
    model, _ = mlp_mod.train_mlp(X, y, cfg, hidden_sizes=spec.hidden_sizes)
    return model


def _predict(model, X: np.ndarray) -> np.ndarray:
    if isinstance(model, svm_mod.LinearSvmModel):
        return svm_mod.predict_svm(model, X)[0]
    return mlp_mod.predict_mlp(model, X)[0]


def run_cv(
    dataset: FoldedDataset,
    features: Mapping[str, np.ndarray],
    recipe: Recipe,
    classifier: ClassifierSpec,
    seed: int = 0,
) -> CvResult:
    """One cross-validation pass: every present fold is the test set once."""
    _check_features(dataset, features, recipe)
    folds = dataset.present_folds()
    if len(folds) < 2:
        raise DataError("cross-validation needs at least 2 folds")
    fold_arr = dataset.folds
    targets = dataset.targets
    classes = sorted(dataset.class_names)
    class_pos = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    clip_ids = np.array(dataset.clip_ids)

    per_fold = []
    for fold_idx, test_fold in enumerate(folds):
        test_mask = fold_arr == test_fold
        train_mask = ~test_mask
        verify_leakage_free(clip_ids[train_mask], clip_ids[test_mask])
        train_folds = [f for f in folds if f != test_fold]

        stds = _fit_block_standardizers(recipe, features, train_mask, train_folds)
        X_train = _transform_blocks(recipe, features, stds, train_mask)
        X_test = _transform_blocks(recipe, features, stds, test_mask, test_folds=[test_fold])

        model = _train_classifier(classifier, X_train, targets[train_mask], seed * 5 + fold_idx)
        pred = _predict(model, X_test)
        true = targets[test_mask]
        per_fold.append(float((pred == true).mean()))
        for t, p in zip(true, pred):
            confusion[class_pos[int(t)], class_pos[int(p)]] += 1

    overall = float(np.trace(confusion) / confusion.sum())
    return CvResult(
        per_fold_accuracy=per_fold,
        overall_accuracy=overall,
        confusion=confusion,
        class_order=classes,
        fold_order=folds,
        run_seed=seed,
        recipe=recipe.name,
        classifier=classifier.echo(),
    )


def _cv_task(payload) -> CvResult:
    dataset, features, recipe, classifier, seed = payload
    return run_cv(dataset, features, recipe, classifier, seed=seed)


def _run_many(
    dataset: FoldedDataset,
    features: Mapping[str, np.ndarray],
    recipe: Recipe,
    classifier: ClassifierSpec,
    n: int,
    base_seed: int,
    jobs: int = 1,
) -> RepeatedRunSummary:
    runs: list[CvResult | None] = [None] * n
    if jobs > 1 and n > 1:
        # runs are independently seeded, so parallel execution changes nothing
        import concurrent.futures

        payloads = [(dataset, dict(features), recipe, classifier, base_seed + i) for i in range(n)]
        with concurrent.futures.ProcessPoolExecutor(max_workers=min(jobs, n)) as pool:
            futures = {pool.submit(_cv_task, p): i for i, p in enumerate(payloads)}
            for future in concurrent.futures.as_completed(futures):
                i = futures[future]
                try:
                    runs[i] = future.result()
                except Exception as exc:
                    raise type(exc)(f"run {i} (seed {base_seed + i}): {exc}") from exc
    else:
        for i in range(n):
            try:
                runs[i] = run_cv(dataset, features, recipe, classifier, seed=base_seed + i)
            except Exception as exc:
                raise type(exc)(f"run {i} (seed {base_seed + i}): {exc}") from exc
    accs = np.array([r.overall_accuracy for r in runs])
    return RepeatedRunSummary(
        n_runs=n,
        mean_accuracy=float(accs.mean()),
        std_accuracy=float(accs.std()),  # population sigma over the runs
        runs=runs,
    )


def repeated_runs(
    dataset: FoldedDataset,
    features: Mapping[str, np.ndarray],
    recipe: Recipe,
    classifier: ClassifierSpec,
    n: int = 10,
    base_seed: int = 0,
    jobs: int = 1,
) -> RepeatedRunSummary:
    """n full CV passes with seeds base_seed + run index; mean and sigma."""
    if n < 2:
        raise DataError(f"repeated_runs needs n >= 2, got {n}")
    return _run_many(dataset, features, recipe, classifier, n, base_seed, jobs=jobs)


def evaluate(
    dataset: FoldedDataset,
    features: Mapping[str, np.ndarray],
    recipe: Recipe,
    classifier: ClassifierSpec,
    n_runs: int = 1,
    base_seed: int = 0,
    jobs: int = 1,
) -> RepeatedRunSummary:
    """Run CV once or repeatedly; a single deterministic run reports sigma 0."""
    if n_runs < 1:
        raise DataError(f"n_runs must be >= 1, got {n_runs}")
    return _run_many(dataset, features, recipe, classifier, n_runs, base_seed, jobs=jobs)


@dataclass
class AblationResult:
    full: RepeatedRunSummary
    reduced: RepeatedRunSummary
    removed_targets: list[int]
    removed_names: list[str]


def subset_features(
    features: Mapping[str, np.ndarray], dataset: FoldedDataset, sub: FoldedDataset
) -> dict[str, np.ndarray]:
    """Row-align feature matrices built for ``dataset`` to the subset ``sub``."""
    index = {cid: i for i, cid in enumerate(dataset.clip_ids)}
    rows = np.array([index[cid] for cid in sub.clip_ids])
    return {token: mat[rows] for token, mat in features.items()}


def ablate_classes(
    dataset: FoldedDataset,
    features: Mapping[str, np.ndarray],
    removed_targets: Iterable[int],
    recipe: Recipe,
    classifier: ClassifierSpec,
    n_runs: int = 1,
    base_seed: int = 0,
) -> AblationResult:
    """Paired CV on the full class set and on the set minus ``removed_targets``."""
    removed = sorted(set(removed_targets))
    reduced_ds = dataset.without_classes(removed) if removed else dataset
    reduced_feats = subset_features(features, dataset, reduced_ds) if removed else features
    full = _run_many(dataset, features, recipe, classifier, n_runs, base_seed)
    reduced = _run_many(reduced_ds, reduced_feats, recipe, classifier, n_runs, base_seed)
    return AblationResult(
        full=full,
        reduced=reduced,
        removed_targets=removed,
        removed_names=[dataset.class_names[t] for t in removed],
    )


def rank_classes_by_action(
    dataset: FoldedDataset, av_matrix: np.ndarray, action_index: int, top: int = 11
) -> list[int]:
    """The ``top`` classes whose class-mean AV is highest in one action dim.

    This operationalizes "the classes dominated by one vocal-tract action" as
    data, not a hard-coded list; ties break by class index.
    """
    targets = dataset.targets
    classes = sorted(dataset.class_names)
    means = np.array(
        [av_matrix[targets == c, action_index].mean() for c in classes]
    )
    order = np.lexsort((classes, -means))
    return [classes[i] for i in order[:top]]


def quantization_ablation(
    dataset: FoldedDataset,
    av_matrix: np.ndarray,
    other_features: Mapping[str, np.ndarray],
    recipe: Recipe,
    classifier: ClassifierSpec,
    n_runs: int = 1,
    base_seed: int = 0,
    threshold: float = 0.5,
) -> tuple[RepeatedRunSummary, RepeatedRunSummary]:
    """Same recipe and seeds with graded vs. binarized AVs; returns (graded, binary)."""
    if "av" not in recipe.tokens:
        raise DataError("quantization ablation needs a recipe that includes 'av'")
    binary = (av_matrix / GRADED_MAX >= threshold).astype(np.float64)
    graded_features = dict(other_features, av=av_matrix)
    binary_features = dict(other_features, av=binary)
    graded = _run_many(dataset, graded_features, recipe, classifier, n_runs, base_seed)
    quantized = _run_many(dataset, binary_features, recipe, classifier, n_runs, base_seed)
    return graded, quantized


@dataclass(frozen=True)
class ConfusionPair:
    true_name: str
    predicted_name: str
    count: int


def confusion_report(result: CvResult, class_names: Mapping[int, str]) -> list[ConfusionPair]:
    """Off-diagonal confusion cells, largest first."""
    pairs = []
    for i, true_cls in enumerate(result.class_order):
        for j, pred_cls in enumerate(result.class_order):
            if i != j and result.confusion[i, j] > 0:
                pairs.append(
                    ConfusionPair(
                        true_name=class_names[true_cls],
                        predicted_name=class_names[pred_cls],
                        count=int(result.confusion[i, j]),
                    )
                )
    return sorted(pairs, key=lambda p: (-p.count, p.true_name, p.predicted_name))


# ---------------------------------------------------------------------------
# Results ledger (JSON lines) and the accuracy table
# ---------------------------------------------------------------------------


def result_record(result: CvResult, include_confusion: bool = True) -> dict:
    record = {
        "recipe": result.recipe,
        "classifier": result.classifier,
        "run_seed": result.run_seed,
        "per_fold_accuracy": result.per_fold_accuracy,
        "overall_accuracy": result.overall_accuracy,
        "fold_order": result.fold_order,
    }
    if include_confusion:
        record["class_order"] = result.class_order
        record["confusion"] = result.confusion.tolist()
    return record


def append_results(path: str | Path, results: Iterable[CvResult], include_confusion: bool = True) -> None:
    with Path(path).open("a", encoding="utf-8") as fh:
        for result in results:
            fh.write(json.dumps(result_record(result, include_confusion)) + "\n")


def load_results(path: str | Path) -> list[dict]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: bad ledger line ({exc})") from None
    return records


def summarize_records(records: Sequence[dict]) -> dict[tuple[str, str], tuple[float, float, int]]:
    """(recipe, classifier kind) -> (mean accuracy, sigma, n runs)."""
    groups: dict[tuple[str, str], list[float]] = {}
    for rec in records:
        key = (rec["recipe"], rec["classifier"]["kind"])
        groups.setdefault(key, []).append(rec["overall_accuracy"])
    return {
        key: (float(np.mean(accs)), float(np.std(accs)), len(accs))
        for key, accs in groups.items()
    }


def format_table(records: Sequence[dict], fmt: str = "table") -> str:
    """Accuracy table over the canonical recipe rows and both classifiers."""
    summary = summarize_records(records)
    rows = [r for r in REPORT_ROWS if any(key[0] == r for key in summary)]
    rows += sorted({key[0] for key in summary} - set(REPORT_ROWS))

    def cell(recipe: str, kind: str) -> str:
        if (recipe, kind) not in summary:
            return "-"
        mean, std, n = summary[(recipe, kind)]
        if n > 1:
            return f"{100 * mean:.2f}% (sigma={100 * std:.2f}%, n={n})"
        return f"{100 * mean:.2f}%"

    if fmt == "csv":
        lines = ["input_features,linear_svm,dnn"]
        lines += [f"{r},{cell(r, 'svm')},{cell(r, 'dnn')}" for r in rows]
        return "\n".join(lines) + "\n"
    if fmt != "table":
        raise DataError(f"unknown report format {fmt!r}")
    name_w = max([len("input features")] + [len(r) for r in rows])
    svm_cells = [cell(r, "svm") for r in rows]
    dnn_cells = [cell(r, "dnn") for r in rows]
    svm_w = max([len("linear SVM")] + [len(c) for c in svm_cells])
    dnn_w = max([len("DNN")] + [len(c) for c in dnn_cells])
    lines = [
        f"{'input features':<{name_w}}  {'linear SVM':>{svm_w}}  {'DNN':>{dnn_w}}",
        "-" * (name_w + svm_w + dnn_w + 4),
    ]
    for r, s, d in zip(rows, svm_cells, dnn_cells):
        lines.append(f"{r:<{name_w}}  {s:>{svm_w}}  {d:>{dnn_w}}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Train-once pipeline (model file = classifier + fitted standardizers)
# ---------------------------------------------------------------------------


@dataclass
class TrainedPipeline:
    recipe: Recipe
    standardizers: dict[str, Standardizer]
    model: "svm_mod.LinearSvmModel | mlp_mod.MlpModel"
    classifier: ClassifierSpec
    train_folds: list[int]

    def transform(self, features: Mapping[str, np.ndarray], test_folds: Iterable[int] = ()) -> np.ndarray:
        n = next(iter(features.values())).shape[0]
        mask = np.ones(n, dtype=bool)
        return _transform_blocks(self.recipe, features, self.standardizers, mask, test_folds)

    def predict(self, features: Mapping[str, np.ndarray], test_folds: Iterable[int] = ()) -> np.ndarray:
        return _predict(self.model, self.transform(features, test_folds))


def train_pipeline(
    dataset: FoldedDataset,
    features: Mapping[str, np.ndarray],
    recipe: Recipe,
    classifier: ClassifierSpec,
    train_folds: Iterable[int] | None = None,
    seed: int = 0,
) -> TrainedPipeline:
    """Fit standardizers and a classifier on the given folds (default: all)."""
    _check_features(dataset, features, recipe)
    folds = list(train_folds) if train_folds is not None else dataset.present_folds()
    mask = np.isin(dataset.folds, folds)
    if not mask.any():
        raise DataError(f"no clips in training folds {folds}")
    stds = _fit_block_standardizers(recipe, features, mask, folds)
    X = _transform_blocks(recipe, features, stds, mask)
    model = _train_classifier(classifier, X, dataset.targets[mask], seed)
    return TrainedPipeline(
        recipe=recipe,
        standardizers=stds,
        model=model,
        classifier=classifier,
        train_folds=folds,
    )


def save_pipeline(path: str | Path, pipe: TrainedPipeline) -> None:
    meta = {
        "format_version": 1,
        "recipe": {
            "tokens": list(pipe.recipe.tokens),
            "standardize": list(pipe.recipe.standardize),
            "l2": list(pipe.recipe.l2),
        },
        "classifier": pipe.classifier.echo(),
        "train_folds": pipe.train_folds,
        "std_tokens": sorted(pipe.standardizers),
        "model_kind": pipe.classifier.kind,
    }
    arrays: dict[str, np.ndarray] = {
        "meta": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    }
    for token, s in pipe.standardizers.items():
        arrays[f"std_{token}_means"] = s.means
        arrays[f"std_{token}_scales"] = s.scales
        arrays[f"std_{token}_degenerate"] = s.degenerate
        arrays[f"std_{token}_folds"] = np.array(sorted(s.fitted_on), dtype=np.int64)
    if pipe.classifier.kind == "svm":
        model: svm_mod.LinearSvmModel = pipe.model
        arrays["svm_weights"] = model.weights
        arrays["svm_biases"] = model.biases
        arrays["svm_classes"] = model.classes
        meta["svm"] = {"C": model.C, "loss": model.loss}
    else:
        model: mlp_mod.MlpModel = pipe.model
        arrays["mlp_classes"] = model.classes
        for i, (W, b) in enumerate(zip(model.weights, model.biases)):
            arrays[f"mlp_W{i}"] = W
            arrays[f"mlp_b{i}"] = b
        meta["mlp"] = {
            "n_layers": len(model.weights),
            "seed": model.config.seed,
            "dtype": model.config.dtype,
        }
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    with Path(path).open("wb") as fh:
        np.savez(fh, **arrays)


def load_pipeline(path: str | Path) -> TrainedPipeline:
    with np.load(Path(path)) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        recipe = Recipe(
            tokens=tuple(meta["recipe"]["tokens"]),
            standardize=tuple(meta["recipe"]["standardize"]),
            l2=tuple(meta["recipe"]["l2"]),
        )
        echo = meta["classifier"]
        if echo["kind"] == "svm":
            spec = ClassifierSpec(kind="svm", C=echo["C"], loss=echo["loss"])
            model = svm_mod.LinearSvmModel(
                weights=data["svm_weights"],
                biases=data["svm_biases"],
                C=echo["C"],
                classes=data["svm_classes"],
                loss=echo["loss"],
            )
        else:
            spec = ClassifierSpec(
                kind="dnn",
                lr=echo["lr"],
                epochs=echo["epochs"],
                batch_size=echo["batch_size"],
                hidden_sizes=tuple(echo["hidden_sizes"]),
            )
            n_layers = meta["mlp"]["n_layers"]
            model = mlp_mod.MlpModel(
                weights=[data[f"mlp_W{i}"] for i in range(n_layers)],
                biases=[data[f"mlp_b{i}"] for i in range(n_layers)],
                classes=data["mlp_classes"],
                config=mlp_mod.TrainConfig(
                    lr=echo["lr"],
                    epochs=echo["epochs"],
                    batch_size=echo["batch_size"],
                    seed=meta["mlp"]["seed"],
                    dtype=meta["mlp"].get("dtype", "float32"),
                ),
            )
        stds = {}
        for token in meta["std_tokens"]:
            stds[token] = Standardizer(
                means=data[f"std_{token}_means"],
                scales=data[f"std_{token}_scales"],
                fitted_on=frozenset(int(f) for f in data[f"std_{token}_folds"]),
                degenerate=data[f"std_{token}_degenerate"],
            )
        return TrainedPipeline(
            recipe=recipe,
            standardizers=stds,
            model=model,
            classifier=spec,
            train_folds=[int(f) for f in meta["train_folds"]],
        )
