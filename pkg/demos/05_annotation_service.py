"""The annotation service, end to end and in process.

Stands up a toy campaign, drives three annotator sessions through
assignment and submission over the HTTP API, and ingests the exported CSV
back into action vectors.
"""

import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from avsec.annotations import build_action_vectors, load_ratings_csv
from avsec.dataset import ActionTaxonomy, write_manifest
from avsec.service import ServiceConfig, create_app
from avsec.synth import synthetic_dataset, write_synthetic_wavs

root = Path(tempfile.mkdtemp())
dataset = synthetic_dataset(n_classes=1, clips_per_class=3, n_folds=3)
write_manifest(root / "manifest.csv", dataset)
write_synthetic_wavs(dataset, root / "audio", duration=0.2)

config = ServiceConfig(
    manifest=root / "manifest.csv",
    audio_dir=root / "audio",
    data_dir=root / "data",
    campaign_id="demo",
)
client = TestClient(create_app(config))

for session in ("alice", "bob", "carol"):
    client.post(
        "/api/campaign/demo/session",
        json={"session": session, "checklist": {"headphones": True, "fluent_english": True}},
    )
    while True:
        task = client.get("/api/campaign/demo/next", params={"session": session}).json()
        if task["done"]:
            break
        audio = client.get(task["audio_url"])
        scores = [0] * 20
        scores[hash((session, task["clip_id"])) % 20] = 3
        ack = client.post(
            "/api/campaign/demo/submit",
            json={"session": session, "clip_id": task["clip_id"], "scores": scores},
        ).json()
        print(f"{session} rated {task['clip_id']} "
              f"({len(audio.content)} audio bytes served)")

progress = client.get("/api/campaign/demo/progress").json()
print(f"\nprogress: {progress['coverage']} complete={progress['complete']}")

csv_text = client.get("/api/campaign/demo/export.csv").text
export_path = root / "export.csv"
export_path.write_text(csv_text, newline="")
avs, _ = build_action_vectors(load_ratings_csv(export_path, ActionTaxonomy()))
print(f"export ingested back into {len(avs)} action vectors:")
for clip_id, av in avs.items():
    print(f"  {clip_id}: nonzero dims {[i for i, v in enumerate(av.values) if v]}")
