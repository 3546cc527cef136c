"""Acceptance gate.

The property suite needs no external data and must finish in under a minute.
The accuracy criteria need the published 2000-clip dataset, its released
action ratings, and (for embedding rows) a precomputed 6144-d embedding file;
point the environment at them to enable those tests:

    AVSEC_ESC50_META    published meta CSV (or AVSEC_MANIFEST for our format)
    AVSEC_ESC50_AUDIO   directory of the 2000 WAV files
    AVSEC_ANNOTATIONS   action-rating CSV (clip_id,annotator_id,<20 actions>)
    AVSEC_EMBEDDINGS    6144-d embedding container or CSV
    AVSEC_ACCEPT_RUNS   repeated-run count for the heavy DNN criteria (default 3)

Each criterion prints one PASS line; a failed assertion marks it FAILED.
"""

import os
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from avsec.analysis import kmeans
from avsec.annotations import (
    ActionVector,
    av_sparsity,
    build_action_vectors,
    fleiss_kappa,
    load_avs_csv,
    load_ratings_csv,
    quantize_av,
    reject_spammers,
    write_avs_csv,
)
from avsec.dataset import ActionTaxonomy, load_esc50_meta, load_manifest
from avsec.errors import LeakageError
from avsec.evaluation import (
    ClassifierSpec,
    ablate_classes,
    evaluate,
    feature_matrix,
    parse_recipe,
    quantization_ablation,
    rank_classes_by_action,
    repeated_runs,
    verify_leakage_free,
)
from avsec.features import apply_standardizer, fit_standardizer
from avsec.mlp import TrainConfig, init_mlp, mlp_backward
from avsec.svm import predict_svm, train_linear_svm
from avsec.synth import synthetic_dataset

TAX = ActionTaxonomy()


@contextmanager
def criterion(name: str):
    start = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE FAILED: {name}")
        raise
    print(f"ACCEPTANCE PASS: {name} ({time.monotonic() - start:.1f}s)")


# ---------------------------------------------------------------------------
# Property suite: runs with no external data, total budget < 1 minute.
# ---------------------------------------------------------------------------


class TestPropertySuite:
    def test_mlp_gradients_match_finite_differences(self):
        with criterion("MLP analytic gradients match central finite differences (rel 1e-4)"):
            rng = np.random.default_rng(0)
            weights, biases, _ = init_mlp(6, 3, TrainConfig(seed=0), hidden_sizes=(5, 4, 3))
            X = rng.normal(size=(5, 6))
            labels = rng.integers(0, 3, size=5)
            w_grads, b_grads, _ = mlp_backward(weights, biases, X, labels)

            def loss_now():
                from avsec.mlp import _forward, _loss_from_logp

                _, logp = _forward(weights, biases, X)
                return _loss_from_logp(logp, labels)

            h = 1e-5
            worst = 0.0
            for layer in range(len(weights)):
                for grads, params in ((w_grads, weights), (b_grads, biases)):
                    flat = params[layer].reshape(-1)
                    for idx in rng.choice(flat.size, size=min(15, flat.size), replace=False):
                        orig = flat[idx]
                        flat[idx] = orig + h
                        up = loss_now()
                        flat[idx] = orig - h
                        down = loss_now()
                        flat[idx] = orig
                        fd = (up - down) / (2 * h)
                        an = grads[layer].reshape(-1)[idx]
                        rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
                        worst = max(worst, rel)
            assert worst < 1e-4

    def test_svm_separable_and_xor_bound(self):
        with criterion("SVM: 100% on separable toys, brute-force bound on XOR"):
            X = np.array([[-1.0], [1.0]])
            model = train_linear_svm(X, np.array([0, 1]), C=35.0)
            assert np.array_equal(predict_svm(model, X)[0], [0, 1])

            # orthogonal class centers: separable for a one-vs-rest argmax
            rng = np.random.default_rng(1)
            centers = np.eye(3) * 4.0
            blobs = np.vstack([centers[c] + rng.normal(0, 0.3, size=(10, 3)) for c in range(3)])
            labels = np.repeat(np.arange(3), 10)
            model = train_linear_svm(blobs, labels, C=35.0)
            assert (predict_svm(model, blobs)[0] == labels).mean() == 1.0

            xor_X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
            xor_y = np.array([0, 1, 1, 0])
            model = train_linear_svm(xor_X, xor_y, C=35.0)
            # 0.75 = best linear separator accuracy, from a brute-force sweep
            assert (predict_svm(model, xor_X)[0] == xor_y).mean() <= 0.75

    def test_standardizer_moments(self):
        with criterion("standardizer output: |mean| < 1e-9, variance 1 +- 1e-9"):
            rng = np.random.default_rng(2)
            X = rng.normal(size=(300, 8)) * rng.uniform(0.1, 9.0, size=8) + rng.normal(size=8)
            s = fit_standardizer(X, folds=[1, 2, 3, 4])
            out = apply_standardizer(s, X)
            assert np.abs(out.mean(axis=0)).max() < 1e-9
            assert np.abs(out.var(axis=0) - 1.0).max() < 1e-9

    def test_fold_partition(self):
        with criterion("fold partition is disjoint and covers the clip set"):
            dataset = synthetic_dataset(n_classes=10, clips_per_class=10)
            folds = dataset.present_folds()
            fold_sets = [set(c.clip_id for c in dataset.clips_in_fold(f)) for f in folds]
            assert set().union(*fold_sets) == set(dataset.clip_ids)
            assert sum(len(s) for s in fold_sets) == len(dataset)

    def test_leakage_guard_trips(self):
        with criterion("leakage guard trips on a deliberately corrupted split"):
            with pytest.raises(LeakageError):
                verify_leakage_free(["a", "b", "shared"], ["shared", "c"])
            s = fit_standardizer(np.zeros((4, 2)), folds=[1, 2, 3, 4, 5])
            with pytest.raises(LeakageError):
                s.assert_safe_for([5])

    def test_fleiss_kappa_oracle(self):
        with criterion("Fleiss kappa matches the hand oracle within 1e-6"):
            table = np.array(
                [
                    [0, 0, 0, 0, 14],
                    [0, 2, 6, 4, 2],
                    [0, 0, 3, 5, 6],
                    [0, 3, 9, 2, 0],
                    [2, 2, 8, 1, 1],
                    [7, 7, 0, 0, 0],
                    [3, 2, 6, 3, 0],
                    [2, 5, 3, 2, 2],
                    [6, 5, 2, 1, 0],
                    [0, 2, 2, 3, 7],
                ]
            )
            # 0.2099307044 computed beforehand with an exact-fraction oracle
            assert abs(fleiss_kappa(table, 14).kappa - 0.2099307044) < 1e-6

    def test_kmeans_inertia_and_blob_recovery(self):
        with criterion("k-means: non-increasing inertia, exact recovery of two blobs"):
            rng = np.random.default_rng(3)
            X = rng.normal(size=(120, 6))
            hist = kmeans(X, k=4, seed=0).inertia_history
            assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))

            a = rng.normal(0, 0.05, size=(40, 20))
            b = rng.normal(0, 0.05, size=(40, 20)) + 8.0
            result = kmeans(np.vstack([a, b]), k=2, seed=0)
            assert len(set(result.assignments[:40])) == 1
            assert len(set(result.assignments[40:])) == 1
            assert result.assignments[0] != result.assignments[-1]

    def test_quantize_boundary_exact(self):
        with criterion("quantize boundary: 6/12 -> 1 and 5/12 -> 0, exactly"):
            six = ActionVector("c", tuple([6.0] + [0.0] * 19), "graded")
            five = ActionVector("c", tuple([5.0] + [0.0] * 19), "graded")
            assert quantize_av(six).values[0] == 1.0
            assert quantize_av(five).values[0] == 0.0

    def test_av_round_trip_bit_identical(self, tmp_path):
        with criterion("AV build/export/ingest round trip is bit-identical"):
            from avsec.synth import synthetic_ratings

            dataset = synthetic_dataset(n_classes=5, clips_per_class=5)
            avs, _ = build_action_vectors(synthetic_ratings(dataset, seed=4))
            first = tmp_path / "avs words.csv"
            write_avs_csv(first, avs)
            reloaded = load_avs_csv(first)
            assert reloaded == avs
            second = tmp_path / "again.csv"
            write_avs_csv(second, reloaded)
            assert first.read_bytes() == second.read_bytes()


# ---------------------------------------------------------------------------
# Data-dependent criteria: the published dataset, ratings, and embeddings.
# ---------------------------------------------------------------------------


def _env_path(key: str) -> Path | None:
    value = os.environ.get(key)
    return Path(value) if value else None


def _load_real_dataset():
    meta = _env_path("AVSEC_ESC50_META")
    manifest = _env_path("AVSEC_MANIFEST")
    if meta is not None:
        return load_esc50_meta(meta)
    if manifest is not None:
        return load_manifest(manifest)
    return None


N_HEAVY_RUNS = int(os.environ.get("AVSEC_ACCEPT_RUNS", "3"))
N_JOBS = os.cpu_count() or 1

needs_annotations = pytest.mark.skipif(
    os.environ.get("AVSEC_ANNOTATIONS") is None
    or (os.environ.get("AVSEC_ESC50_META") is None and os.environ.get("AVSEC_MANIFEST") is None),
    reason="set AVSEC_ESC50_META (or AVSEC_MANIFEST) and AVSEC_ANNOTATIONS to run",
)
needs_audio = pytest.mark.skipif(
    os.environ.get("AVSEC_ESC50_AUDIO") is None,
    reason="set AVSEC_ESC50_AUDIO to run",
)
needs_embeddings = pytest.mark.skipif(
    os.environ.get("AVSEC_EMBEDDINGS") is None,
    reason="set AVSEC_EMBEDDINGS to run",
)


@pytest.fixture(scope="module")
def real_data():
    dataset = _load_real_dataset()
    if dataset is None:
        pytest.skip("no dataset configured")
    dataset.validate_balance(clips_per_class=40)
    ratings = load_ratings_csv(_env_path("AVSEC_ANNOTATIONS"), TAX)
    kept, _ = reject_spammers(ratings)
    avs, _ = build_action_vectors(kept, short_policy="rescale")
    av_matrix = feature_matrix(dataset, avs, "action vectors")
    return dataset, avs, av_matrix


@pytest.fixture(scope="module")
def real_embeddings(real_data):
    from avsec.features import load_embeddings

    dataset, _, _ = real_data
    emb = load_embeddings(_env_path("AVSEC_EMBEDDINGS"), expected_dim=6144)
    return feature_matrix(dataset, emb, "embeddings")


@needs_annotations
class TestDataCriteria:
    def test_av_sparsity(self, real_data):
        with criterion("mean nonzero AV dims = 6 +- 1 over all graded AVs"):
            _, avs, _ = real_data
            assert len(avs) == 2000
            sparsity = av_sparsity(avs.values())
            assert 5.0 <= sparsity <= 7.0, f"sparsity {sparsity:.2f}"

    def test_av_svm_accuracy(self, real_data):
        with criterion("AV + linear SVM: 48.25% +- 2.0 points, < 1 minute"):
            dataset, _, av_matrix = real_data
            start = time.monotonic()
            summary = evaluate(
                dataset, {"av": av_matrix}, parse_recipe("av"), ClassifierSpec(kind="svm")
            )
            elapsed = time.monotonic() - start
            acc = 100 * summary.mean_accuracy
            assert abs(acc - 48.25) <= 2.0, f"accuracy {acc:.2f}%"
            assert elapsed < 60, f"took {elapsed:.0f}s"

    def test_av_dnn_accuracy(self, real_data):
        with criterion("AV + DNN, 10 runs: mean 51.81% +- 2.5, sigma <= 1.0, < 10 min"):
            dataset, _, av_matrix = real_data
            start = time.monotonic()
            summary = repeated_runs(
                dataset,
                {"av": av_matrix},
                parse_recipe("av"),
                ClassifierSpec(kind="dnn"),
                n=10,
                jobs=N_JOBS,
            )
            elapsed = time.monotonic() - start
            mean = 100 * summary.mean_accuracy
            sigma = 100 * summary.std_accuracy
            assert abs(mean - 51.81) <= 2.5, f"mean {mean:.2f}%"
            assert sigma <= 1.0, f"sigma {sigma:.2f}%"
            assert elapsed < 600, f"took {elapsed:.0f}s"

    @needs_audio
    def test_logmel_accuracies(self, real_data, tmp_path):
        with criterion("log-mel: SVM 30.70% +- 4.0 and DNN 34.00% +- 4.0, < 15 min"):
            from avsec.dsp import DspConfig, logmel_feature_from_file

            dataset, _, _ = real_data
            audio_dir = _env_path("AVSEC_ESC50_AUDIO")
            start = time.monotonic()
            cfg = DspConfig()
            vectors = {
                c.clip_id: logmel_feature_from_file(audio_dir / c.filename, cfg)
                for c in dataset.clips
            }
            logmel = feature_matrix(dataset, vectors, "logmel")
            svm_summary = evaluate(
                dataset, {"logmel": logmel}, parse_recipe("logmel"), ClassifierSpec(kind="svm")
            )
            svm_acc = 100 * svm_summary.mean_accuracy
            dnn_summary = evaluate(
                dataset,
                {"logmel": logmel},
                parse_recipe("logmel"),
                ClassifierSpec(kind="dnn"),
                n_runs=N_HEAVY_RUNS,
                jobs=N_JOBS,
            )
            dnn_acc = 100 * dnn_summary.mean_accuracy
            elapsed = time.monotonic() - start
            assert abs(svm_acc - 30.70) <= 4.0, f"SVM {svm_acc:.2f}%"
            assert abs(dnn_acc - 34.00) <= 4.0, f"DNN {dnn_acc:.2f}%"
            assert elapsed < 900, f"took {elapsed:.0f}s"

    @needs_embeddings
    def test_embedding_accuracies(self, real_data, real_embeddings):
        with criterion("AE DNN 81.46% +- 2.0; AV+AE DNN 88.00% +- 2.0; gain >= 4 points"):
            dataset, _, av_matrix = real_data
            feats = {"av": av_matrix, "ae": real_embeddings}
            ae_summary = evaluate(
                dataset, feats, parse_recipe("ae"), ClassifierSpec(kind="dnn"),
                n_runs=N_HEAVY_RUNS, jobs=N_JOBS,
            )
            fused_summary = evaluate(
                dataset, feats, parse_recipe("av+ae"), ClassifierSpec(kind="dnn"),
                n_runs=N_HEAVY_RUNS, jobs=N_JOBS,
            )
            ae_acc = 100 * ae_summary.mean_accuracy
            fused_acc = 100 * fused_summary.mean_accuracy
            assert abs(ae_acc - 81.46) <= 2.0, f"AE {ae_acc:.2f}%"
            assert abs(fused_acc - 88.00) <= 2.0, f"AV+AE {fused_acc:.2f}%"
            assert fused_acc - ae_acc >= 4.0, f"gain {fused_acc - ae_acc:.2f}"

    @needs_embeddings
    def test_quantization_ablation(self, real_data, real_embeddings):
        with criterion("binary-AV+AE DNN trails graded-AV+AE DNN by >= 3 points"):
            dataset, _, av_matrix = real_data
            graded, binary = quantization_ablation(
                dataset,
                av_matrix,
                {"ae": real_embeddings},
                parse_recipe("av+ae"),
                ClassifierSpec(kind="dnn"),
                n_runs=N_HEAVY_RUNS,
            )
            drop = 100 * (graded.mean_accuracy - binary.mean_accuracy)
            assert drop >= 3.0, f"drop {drop:.2f} points"

    def test_calling_class_ablation_av(self, real_data):
        with criterion("removing the 11 calling classes lifts AV accuracy by 4-9 points"):
            dataset, _, av_matrix = real_data
            removed = rank_classes_by_action(
                dataset, av_matrix, TAX.index("calling"), top=11
            )
            result = ablate_classes(
                dataset,
                {"av": av_matrix},
                removed,
                parse_recipe("av"),
                ClassifierSpec(kind="dnn"),
                n_runs=N_HEAVY_RUNS,
            )
            delta = 100 * (result.reduced.mean_accuracy - result.full.mean_accuracy)
            assert 4.0 <= delta <= 9.0, f"delta {delta:.2f} points"

    @needs_embeddings
    def test_calling_class_ablation_ae(self, real_data, real_embeddings):
        with criterion("removing those classes moves AE accuracy by <= 2.5 points"):
            dataset, _, av_matrix = real_data
            removed = rank_classes_by_action(
                dataset, av_matrix, TAX.index("calling"), top=11
            )
            result = ablate_classes(
                dataset,
                {"ae": real_embeddings},
                removed,
                parse_recipe("ae"),
                ClassifierSpec(kind="dnn"),
                n_runs=N_HEAVY_RUNS,
            )
            delta = 100 * abs(result.reduced.mean_accuracy - result.full.mean_accuracy)
            assert delta <= 2.5, f"moved {delta:.2f} points"
