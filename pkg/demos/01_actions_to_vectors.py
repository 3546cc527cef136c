"""From raw Likert ratings to action vectors.

Walks the annotation pipeline on a synthetic campaign: spam rejection,
inter-annotator agreement, graded AV construction, quantization, and the
sparsity statistic.
"""

from avsec.annotations import (
    ActionRating,
    agreement_report,
    av_sparsity,
    build_action_vectors,
    quantize_av,
    reject_spammers,
)
from avsec.dataset import ActionTaxonomy
from avsec.synth import synthetic_dataset, synthetic_ratings

taxonomy = ActionTaxonomy()
dataset = synthetic_dataset(n_classes=10, clips_per_class=10)
ratings = synthetic_ratings(dataset, taxonomy, seed=7)
print(f"{len(ratings)} ratings for {len(dataset)} clips, 3 raters each")

# plant a spammer who marks everything "very likely"
spam = [
    ActionRating(clip_id=c.clip_id, annotator_id="spammy", scores=(4,) * 20)
    for c in dataset.clips[:5]
]
kept, discarded = reject_spammers(ratings + spam, majority_fraction=0.8)
print(f"rejection: {len(discarded)} (annotator, clip) pairs discarded "
      f"({len(kept)} ratings kept)")

reports = agreement_report(kept, taxonomy, group="pooled")
rep = reports["pooled"]
print(f"agreement over {rep.n_items} (clip, action) items: "
      f"kappa={rep.kappa:.3f} -> {rep.interpretation}")

avs, build_report = build_action_vectors(kept, short_policy="rescale")
print(f"built {len(avs)} graded AVs "
      f"({len(build_report.rescaled)} rescaled, {len(build_report.excluded)} excluded)")

clip_id = dataset.clip_ids[0]
av = avs[clip_id]
nonzero = [(taxonomy.actions[i], v) for i, v in enumerate(av.values) if v]
print(f"\n{clip_id} graded AV (nonzero dims): {nonzero}")
print(f"quantized: {[int(v) for v in quantize_av(av).values]}")
print(f"\nmean nonzero dims per AV: {av_sparsity(avs.values()):.2f} of 20")
