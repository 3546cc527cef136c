"""Cross-validated classification and the accuracy table.

Builds a synthetic fold-balanced dataset, evaluates action vectors,
embeddings, and their fusion with both classifiers, and regenerates the
accuracy table from the results ledger.
"""

import tempfile
from pathlib import Path

from avsec.annotations import build_action_vectors
from avsec.evaluation import (
    ClassifierSpec,
    append_results,
    evaluate,
    feature_matrix,
    format_table,
    load_results,
    parse_recipe,
)
from avsec.synth import synthetic_dataset, synthetic_embeddings, synthetic_ratings

dataset = synthetic_dataset(n_classes=10, clips_per_class=10)
avs, _ = build_action_vectors(synthetic_ratings(dataset, seed=3))
features = {
    "av": feature_matrix(dataset, avs, "avs"),
    "ae": feature_matrix(dataset, synthetic_embeddings(dataset, dim=32, seed=4), "embeddings"),
}

svm = ClassifierSpec(kind="svm")
dnn = ClassifierSpec(kind="dnn", epochs=80, hidden_sizes=(64, 32, 16))

ledger = Path(tempfile.mkdtemp()) / "results.jsonl"
for recipe_name in ("av", "ae", "av+ae"):
    recipe = parse_recipe(recipe_name)
    l2_note = "standardize only" if not any(recipe.l2) else "standardize + L2"
    print(f"recipe {recipe_name!r} ({l2_note})")
    for spec, runs in ((svm, 1), (dnn, 3)):
        summary = evaluate(dataset, features, recipe, spec, n_runs=runs)
        sigma = f" sigma={100 * summary.std_accuracy:.2f}%" if runs > 1 else ""
        print(f"  {spec.kind}: {100 * summary.mean_accuracy:.2f}%{sigma}")
        append_results(ledger, summary.runs, include_confusion=False)

print("\naccuracy table regenerated from the ledger:\n")
print(format_table(load_results(ledger)))
