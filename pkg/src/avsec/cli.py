"""Command-line entry point.

Subcommands: extract-features, build-avs, train, evaluate, ablate, cluster,
report, serve. Option resolution order is flag > AVSEC_* environment variable
> --config YAML file > built-in default. Every artifact-producing command
writes a ``<out>.run.json`` echo with the resolved parameters and SHA-256
hashes of its file inputs, and outputs are written atomically (no partial
files on failure).

Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__, analysis, annotations, dsp, evaluation, features, service
from .dataset import ActionTaxonomy, FoldedDataset, load_manifest
from .errors import DataError, LeakageError, NumericError

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


# ---------------------------------------------------------------- option plumbing


class Options:
    """flag > env > config-file > default resolution for one parsed command."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file_values: dict = {}
        if getattr(args, "config", None):
            loaded = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
            if not isinstance(loaded, dict):
                raise DataError(f"{args.config}: config must be a mapping")
            self.file_values = loaded
        self.resolved: dict = {}

    def get(self, name: str, default=None, cast=None, required: bool = False):
        value = getattr(self.args, name.replace("-", "_"), None)
        if value is None:
            value = os.environ.get(f"AVSEC_{name.replace('-', '_').upper()}")
        if value is None:
            value = self.file_values.get(name.replace("-", "_"))
        if value is None:
            value = default
        if value is None and required:
            raise DataError(f"missing required option --{name}")
        if value is not None and cast is not None and not isinstance(value, cast):
            value = cast(value)
        self.resolved[name] = str(value) if isinstance(value, Path) else value
        return value

    def flag(self, name: str) -> bool:
        value = getattr(self.args, name.replace("-", "_"), False)
        if not value:
            env = os.environ.get(f"AVSEC_{name.replace('-', '_').upper()}")
            value = env is not None and env.lower() in ("1", "true", "yes")
        if not value:
            value = bool(self.file_values.get(name.replace("-", "_"), False))
        self.resolved[name] = bool(value)
        return bool(value)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _require_file(path_value, what: str) -> Path:
    path = Path(path_value)
    if not path.is_file():
        raise DataError(f"{what} file not found: {path}")
    return path


def write_run_echo(out: Path, command: str, opts: Options, inputs: list[Path]) -> None:
    echo = {
        "command": command,
        "version": __version__,
        "parameters": opts.resolved,
        "inputs": {str(p): _sha256(p) for p in inputs if p.is_file()},
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    Path(str(out) + ".run.json").write_text(json.dumps(echo, indent=2) + "\n", encoding="utf-8")


class _AtomicOutput:
    """Write to <out>.tmp, rename into place on success, delete on failure."""

    def __init__(self, out: Path):
        self.final = Path(out)
        self.tmp = Path(str(out) + ".tmp")

    def __enter__(self) -> Path:
        self.final.parent.mkdir(parents=True, exist_ok=True)
        return self.tmp

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            os.replace(self.tmp, self.final)
        elif self.tmp.exists():
            self.tmp.unlink()


# ------------------------------------------------------------- feature assembly


def _vectors_from_container(path: Path, expected_dim: int | None = None) -> dict[str, np.ndarray]:
    loaded = features.load_embeddings(path, expected_dim=expected_dim)
    return {cid: fv.values for cid, fv in loaded.items()}


def _av_matrix(dataset: FoldedDataset, avs_path: Path) -> np.ndarray:
    avs = annotations.load_avs_csv(avs_path)
    for av in avs.values():
        if av.scale != "graded":
            raise DataError(f"{avs_path}: expected graded AVs, found scale {av.scale!r}")
    return evaluation.feature_matrix(dataset, avs, "action vectors")


def assemble_features(
    dataset: FoldedDataset,
    recipe: evaluation.Recipe,
    avs_path: Path | None,
    logmel_path: Path | None,
    embeddings_path: Path | None,
    embedding_dim: int | None = None,
) -> tuple[dict[str, np.ndarray], list[Path]]:
    """Load and align every feature block the recipe needs; fail fast if one is missing."""
    sources = {"av": avs_path, "logmel": logmel_path, "ae": embeddings_path}
    flags = {"av": "--avs", "logmel": "--logmel", "ae": "--embeddings"}
    matrices: dict[str, np.ndarray] = {}
    inputs: list[Path] = []
    for token in recipe.tokens:
        if sources[token] is None:
            raise DataError(f"recipe {recipe.name!r} needs {flags[token]}")
        path = _require_file(sources[token], f"{token} features")
        inputs.append(path)
        if token == "av":
            matrices[token] = _av_matrix(dataset, path)
        else:
            vectors = _vectors_from_container(
                path, expected_dim=embedding_dim if token == "ae" else None
            )
            matrices[token] = evaluation.feature_matrix(dataset, vectors, f"{token} features")
    return matrices, inputs


def _classifier_spec(opts: Options) -> evaluation.ClassifierSpec:
    kind = opts.get("classifier", required=True)
    if kind not in ("svm", "dnn"):
        raise DataError(f"--classifier must be svm or dnn, got {kind!r}")
    return evaluation.ClassifierSpec(
        kind=kind,
        C=opts.get("C", 35.0, float),
        loss=opts.get("svm-loss", "squared_hinge"),
        lr=opts.get("lr", 0.008, float),
        epochs=opts.get("epochs", 100, int),
        batch_size=opts.get("batch-size", 32, int),
    )


def _load_dataset(opts: Options) -> tuple[FoldedDataset, Path]:
    manifest = _require_file(opts.get("manifest", required=True), "manifest")
    return load_manifest(manifest), manifest


# ------------------------------------------------------------------ subcommands


def _extract_one(item: tuple[str, str, dsp.DspConfig]) -> tuple[str, np.ndarray]:
    clip_id, path, cfg = item
    return clip_id, dsp.logmel_feature_from_file(path, cfg)


def cmd_extract_features(args: argparse.Namespace) -> int:
    opts = Options(args)
    dataset, manifest = _load_dataset(opts)
    audio_dir = Path(opts.get("audio-dir", required=True))
    if not audio_dir.is_dir():
        raise DataError(f"audio directory not found: {audio_dir}")
    out = Path(opts.get("out", required=True))
    jobs = opts.get("jobs", 1, int)
    dsp_cfg_path = opts.get("dsp-config")
    if dsp_cfg_path:
        raw = yaml.safe_load(Path(dsp_cfg_path).read_text(encoding="utf-8")) or {}
        try:
            cfg = dsp.DspConfig(**raw)
        except TypeError as exc:
            raise DataError(f"{dsp_cfg_path}: {exc}") from None
    else:
        cfg = dsp.DspConfig()

    missing = [c.filename for c in dataset.clips if not (audio_dir / c.filename).is_file()]
    if missing:
        raise DataError(f"{len(missing)} audio file(s) missing (first: {missing[0]})")

    items = [(c.clip_id, str(audio_dir / c.filename), cfg) for c in dataset.clips]
    results: dict[str, np.ndarray] = {}
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            for clip_id, vec in pool.map(_extract_one, items, chunksize=8):
                results[clip_id] = vec
    else:
        for item in items:
            clip_id, vec = _extract_one(item)
            results[clip_id] = vec
    ordered_ids = sorted(results)  # deterministic output ordering by clip id
    matrix = np.vstack([results[cid] for cid in ordered_ids]).astype(np.float32)
    with _AtomicOutput(out) as tmp:
        features.write_feature_file(tmp, ordered_ids, matrix, kind="logmel")
    write_run_echo(out, "extract-features", opts, [manifest] + ([Path(dsp_cfg_path)] if dsp_cfg_path else []))
    print(f"extracted log-mel features for {len(ordered_ids)} clips -> {out}")
    return EXIT_OK


def cmd_build_avs(args: argparse.Namespace) -> int:
    opts = Options(args)
    annotations_path = _require_file(opts.get("annotations", required=True), "annotations")
    out = Path(opts.get("out", required=True))
    taxonomy = ActionTaxonomy()
    ratings = annotations.load_ratings_csv(annotations_path, taxonomy)
    majority = opts.get("majority-fraction", 0.8, float)
    global_mode = opts.flag("global-rejection")
    kept, discarded = annotations.reject_spammers(ratings, majority, global_mode=global_mode)
    avs, report = annotations.build_action_vectors(
        kept, short_policy=opts.get("short-policy", "rescale")
    )
    with _AtomicOutput(out) as tmp:
        annotations.write_avs_csv(tmp, avs)
    write_run_echo(out, "build-avs", opts, [annotations_path])
    print(
        f"built {len(avs)} action vectors from {len(kept)} ratings "
        f"({len(discarded)} spam-discarded, {len(report.rescaled)} rescaled, "
        f"{len(report.excluded)} excluded)"
    )
    if avs:
        print(f"mean nonzero dims per AV: {annotations.av_sparsity(avs.values()):.2f}")
    if opts.flag("report-agreement"):
        reports = annotations.agreement_report(kept, taxonomy, group="pooled")
        rep = reports["pooled"]
        print(
            f"agreement (pooled, {rep.n_items} items x {rep.n_raters} raters): "
            f"kappa={rep.kappa:.4f} ({rep.interpretation})"
        )
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    opts = Options(args)
    dataset, manifest = _load_dataset(opts)
    recipe = evaluation.parse_recipe(opts.get("recipe", required=True))
    out = Path(opts.get("out", required=True))
    feats, inputs = assemble_features(
        dataset,
        recipe,
        opts.get("avs", cast=Path),
        opts.get("logmel", cast=Path),
        opts.get("embeddings", cast=Path),
        opts.get("embedding-dim", cast=int),
    )
    spec = _classifier_spec(opts)
    folds_arg = opts.get("train-folds")
    train_folds = (
        [int(f) for f in str(folds_arg).split(",")] if folds_arg is not None else None
    )
    pipe = evaluation.train_pipeline(
        dataset, feats, recipe, spec, train_folds=train_folds, seed=opts.get("seed", 0, int)
    )
    with _AtomicOutput(out) as tmp:
        evaluation.save_pipeline(tmp, pipe)
    write_run_echo(out, "train", opts, [manifest] + inputs)
    print(f"trained {spec.kind} on recipe {recipe.name!r}, folds {pipe.train_folds} -> {out}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    opts = Options(args)
    dataset, manifest = _load_dataset(opts)
    recipe = evaluation.parse_recipe(opts.get("recipe", required=True))
    spec = _classifier_spec(opts)
    runs = opts.get("runs", 1, int)
    seed = opts.get("seed", 0, int)
    out = opts.get("out")
    feats, inputs = assemble_features(
        dataset,
        recipe,
        opts.get("avs", cast=Path),
        opts.get("logmel", cast=Path),
        opts.get("embeddings", cast=Path),
        opts.get("embedding-dim", cast=int),
    )
    summary = evaluation.evaluate(
        dataset, feats, recipe, spec, n_runs=runs, base_seed=seed, jobs=opts.get("jobs", 1, int)
    )
    if out:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        evaluation.append_results(out, summary.runs)
        write_run_echo(out, "evaluate", opts, [manifest] + inputs)
    sigma = f" sigma={100 * summary.std_accuracy:.2f}%" if summary.n_runs > 1 else ""
    print(
        f"{recipe.name} + {spec.kind}: overall accuracy "
        f"{100 * summary.mean_accuracy:.2f}%{sigma} over {summary.n_runs} run(s)"
    )
    for run in summary.runs:
        folds = ", ".join(f"{100 * a:.1f}%" for a in run.per_fold_accuracy)
        print(f"  seed {run.run_seed}: {100 * run.overall_accuracy:.2f}% (folds: {folds})")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    opts = Options(args)
    kind = opts.get("kind", required=True)
    dataset, manifest = _load_dataset(opts)
    spec = _classifier_spec(opts)
    runs = opts.get("runs", 1, int)
    seed = opts.get("seed", 0, int)
    out = opts.get("out")

    if kind == "classes":
        recipe = evaluation.parse_recipe(opts.get("recipe", required=True))
        feats, inputs = assemble_features(
            dataset,
            recipe,
            opts.get("avs", cast=Path),
            opts.get("logmel", cast=Path),
            opts.get("embeddings", cast=Path),
            opts.get("embedding-dim", cast=int),
        )
        classes_arg = opts.get("classes", "auto")
        if classes_arg == "auto":
            if opts.get("avs") is None:
                raise DataError("--classes auto needs --avs to rank classes by an action")
            av_matrix = _av_matrix(dataset, Path(opts.get("avs")))
            action = opts.get("action", "calling")
            action_index = ActionTaxonomy().index(action)
            removed = evaluation.rank_classes_by_action(
                dataset, av_matrix, action_index, top=opts.get("top", 11, int)
            )
            print(
                f"auto-selected {len(removed)} classes ranked by {action!r}: "
                + ", ".join(dataset.class_names[t] for t in removed)
            )
        else:
            removed = [int(t) for t in str(classes_arg).split(",")]
        result = evaluation.ablate_classes(
            dataset, feats, removed, recipe, spec, n_runs=runs, base_seed=seed
        )
        print(
            f"full {dataset.n_classes}-class accuracy: "
            f"{100 * result.full.mean_accuracy:.2f}%"
        )
        print(
            f"reduced {dataset.n_classes - len(removed)}-class accuracy: "
            f"{100 * result.reduced.mean_accuracy:.2f}% "
            f"(delta {100 * (result.reduced.mean_accuracy - result.full.mean_accuracy):+.2f} points)"
        )
        arms = [("full", result.full), ("reduced", result.reduced)]
    elif kind == "quantization":
        recipe = evaluation.parse_recipe(opts.get("recipe", "av+ae"))
        feats, inputs = assemble_features(
            dataset,
            recipe,
            opts.get("avs", cast=Path),
            opts.get("logmel", cast=Path),
            opts.get("embeddings", cast=Path),
            opts.get("embedding-dim", cast=int),
        )
        av_matrix = feats["av"]
        other = {t: m for t, m in feats.items() if t != "av"}
        graded, binary = evaluation.quantization_ablation(
            dataset, av_matrix, other, recipe, spec, n_runs=runs, base_seed=seed
        )
        print(f"graded AVs:  {100 * graded.mean_accuracy:.2f}%")
        print(
            f"binary AVs:  {100 * binary.mean_accuracy:.2f}% "
            f"(drop {100 * (graded.mean_accuracy - binary.mean_accuracy):.2f} points)"
        )
        arms = [("graded", graded), ("binary", binary)]
    else:
        raise DataError(f"--kind must be 'classes' or 'quantization', got {kind!r}")

    if out:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("a", encoding="utf-8") as fh:
            for arm, summary in arms:
                for run in summary.runs:
                    record = evaluation.result_record(run, include_confusion=False)
                    record["ablation"] = {"kind": kind, "arm": arm}
                    fh.write(json.dumps(record) + "\n")
        write_run_echo(out, "ablate", opts, [manifest] + inputs)
    return EXIT_OK


def cmd_cluster(args: argparse.Namespace) -> int:
    opts = Options(args)
    avs_path = _require_file(opts.get("avs", required=True), "action vectors")
    out = Path(opts.get("out", required=True))
    k = opts.get("k", 8, int)
    seed = opts.get("seed", 0, int)
    taxonomy = ActionTaxonomy()
    avs = annotations.load_avs_csv(avs_path)
    clip_ids = sorted(avs)
    matrix = np.vstack([avs[cid].as_array() for cid in clip_ids])
    result = analysis.label_clusters(analysis.kmeans(matrix, k=k, seed=seed), taxonomy)
    with _AtomicOutput(out) as tmp:
        analysis.write_clusters_csv(tmp, clip_ids, result, matrix)
    inputs = [avs_path]
    print(f"k={k} clustering of {len(clip_ids)} AVs: inertia {result.inertia:.1f}")
    for i, label in enumerate(result.labels):
        size = int((result.assignments == i).sum())
        print(f"  cluster {i} ({size} clips): {' + '.join(label) if label else '(none)'}")
    class_avs_out = opts.get("class-avs-out")
    if class_avs_out:
        manifest_path = _require_file(opts.get("manifest", required=True), "manifest")
        inputs.append(manifest_path)
        dataset = load_manifest(manifest_path)
        class_matrix = analysis.class_average_avs(dataset, avs, taxonomy)
        with _AtomicOutput(Path(class_avs_out)) as tmp:
            analysis.write_class_avs_csv(tmp, class_matrix)
        print(f"class-average AV matrix -> {class_avs_out}")
    write_run_echo(out, "cluster", opts, inputs)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    opts = Options(args)
    results_path = _require_file(opts.get("in", required=True), "results ledger")
    fmt = opts.get("format", "table")
    records = [r for r in evaluation.load_results(results_path) if "ablation" not in r]
    table = evaluation.format_table(records, fmt=fmt)
    out = opts.get("out")
    if out:
        Path(out).write_text(table, encoding="utf-8")
        print(f"report -> {out}")
    else:
        print(table, end="")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    opts = Options(args)
    config = service.load_service_config(
        getattr(args, "config", None),
        manifest=opts.get("manifest"),
        audio_dir=opts.get("audio-dir"),
        data_dir=opts.get("data-dir"),
        campaign_id=opts.get("campaign-id"),
        raters_per_clip=opts.get("raters-per-clip", cast=int),
        lease_seconds=opts.get("lease-seconds", cast=float),
        host=opts.get("host"),
        port=opts.get("port", cast=int),
        ui_dir=opts.get("ui-dir"),
    )
    _require_file(config.manifest, "manifest")
    service.run_service(config)
    return EXIT_OK


# ----------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avsec",
        description="Action-vector sound event classification pipeline",
    )
    parser.add_argument("--version", action="version", version=f"avsec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, *flags: str):
        p = sub.add_parser(name)
        p.set_defaults(func=func)
        p.add_argument("--config", help="YAML config file (flags and env override it)")
        for flag in flags:
            if flag in ("global-rejection", "report-agreement"):
                p.add_argument(f"--{flag}", action="store_true")
            else:
                p.add_argument(f"--{flag}")
        return p

    add("extract-features", cmd_extract_features, "manifest", "audio-dir", "out", "dsp-config", "jobs")
    add(
        "build-avs",
        cmd_build_avs,
        "annotations",
        "out",
        "majority-fraction",
        "short-policy",
        "global-rejection",
        "report-agreement",
    )
    add(
        "train",
        cmd_train,
        "manifest", "recipe", "classifier", "out", "avs", "logmel", "embeddings",
        "embedding-dim", "train-folds", "seed", "C", "lr", "epochs", "batch-size", "svm-loss",
    )
    add(
        "evaluate",
        cmd_evaluate,
        "manifest", "recipe", "classifier", "runs", "seed", "out", "avs", "logmel",
        "embeddings", "embedding-dim", "C", "lr", "epochs", "batch-size", "svm-loss", "jobs",
    )
    add(
        "ablate",
        cmd_ablate,
        "kind", "manifest", "recipe", "classifier", "runs", "seed", "out", "avs",
        "logmel", "embeddings", "embedding-dim", "classes", "action", "top",
        "C", "lr", "epochs", "batch-size", "svm-loss",
    )
    add("cluster", cmd_cluster, "avs", "k", "seed", "out", "class-avs-out", "manifest")
    add("report", cmd_report, "in", "format", "out")
    add(
        "serve",
        cmd_serve,
        "manifest", "audio-dir", "data-dir", "campaign-id", "raters-per-clip",
        "lease-seconds", "host", "port", "ui-dir",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("AVSEC_LOG_LEVEL", "WARNING"))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, LeakageError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
