"""HTTP service that serves clips to annotators and collects Likert ratings.

Clips are assigned with short leases so no clip is handed to more sessions
than it still needs; submissions go to an append-only JSON-lines log that is
replayed on startup, making acknowledged ratings durable across restarts.
Class labels never appear in any payload: annotators get the clip id, an
audio URL, the rating prompt, and the 20 actions.
"""

# note: no `from __future__ import annotations` here; FastAPI must see real
# annotation objects for the request models defined inside create_app.

import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import yaml

from .annotations import ActionRating, RATERS_PER_CLIP, format_ratings_csv, reject_spammers
from .dataset import ActionTaxonomy, FoldedDataset, load_manifest
from .errors import DataError

log = logging.getLogger(__name__)

RATING_PROMPT = (
    "For each action below, judge how likely it is to have produced "
    "at least part of the sound event."
)
SCALE_ANCHORS = {"0": "very unlikely", "4": "very likely"}


class SubmissionConflict(Exception):
    """A different rating already exists for this (annotator, clip), or the clip is full."""


class ValidationFailure(Exception):
    """Submitted scores are not a valid 20-score Likert rating."""


@dataclass(frozen=True)
class ServiceConfig:
    manifest: Path
    audio_dir: Path
    data_dir: Path
    campaign_id: str = "default"
    raters_per_clip: int = RATERS_PER_CLIP
    lease_seconds: float = 300.0
    host: str = "127.0.0.1"
    port: int = 8008
    ui_dir: Path | None = None


ENV_KEYS = {
    "manifest": "AVSEC_MANIFEST",
    "audio_dir": "AVSEC_AUDIO_DIR",
    "data_dir": "AVSEC_DATA_DIR",
    "campaign_id": "AVSEC_CAMPAIGN",
    "raters_per_clip": "AVSEC_RATERS",
    "lease_seconds": "AVSEC_LEASE_SECONDS",
    "host": "AVSEC_HOST",
    "port": "AVSEC_PORT",
    "ui_dir": "AVSEC_UI_DIR",
}


def load_service_config(
    config_file: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    **overrides,
) -> ServiceConfig:
    """Resolve service settings: explicit overrides > env vars > config file."""
    env = os.environ if env is None else env
    values: dict = {}
    if config_file is not None:
        loaded = yaml.safe_load(Path(config_file).read_text(encoding="utf-8")) or {}
        if not isinstance(loaded, dict):
            raise DataError(f"{config_file}: service config must be a mapping")
        unknown = set(loaded) - set(ENV_KEYS)
        if unknown:
            raise DataError(f"{config_file}: unknown config keys {sorted(unknown)}")
        values.update(loaded)
    for key, env_key in ENV_KEYS.items():
        if env_key in env:
            values[key] = env[env_key]
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    missing = [k for k in ("manifest", "audio_dir", "data_dir") if k not in values]
    if missing:
        raise DataError(f"service config is missing {missing}")
    return ServiceConfig(
        manifest=Path(values["manifest"]),
        audio_dir=Path(values["audio_dir"]),
        data_dir=Path(values["data_dir"]),
        campaign_id=str(values.get("campaign_id", "default")),
        raters_per_clip=int(values.get("raters_per_clip", RATERS_PER_CLIP)),
        lease_seconds=float(values.get("lease_seconds", 300.0)),
        host=str(values.get("host", "127.0.0.1")),
        port=int(values.get("port", 8008)),
        ui_dir=Path(values["ui_dir"]) if values.get("ui_dir") else None,
    )


@dataclass
class Submission:
    campaign_id: str
    clip_id: str
    annotator_id: str
    scores: tuple[int, ...]
    timestamp: float


@dataclass
class Assignment:
    clip_id: str
    actions: tuple[str, ...]
    prompt: str = RATING_PROMPT

    def payload(self) -> dict:
        return {
            "done": False,
            "clip_id": self.clip_id,
            "audio_url": f"/api/clip/{self.clip_id}/audio",
            "actions": list(self.actions),
            "prompt": self.prompt,
            "anchors": dict(SCALE_ANCHORS),
        }


class CampaignStore:
    """Submission log, coverage index, and clip leasing for one campaign.

    All mutations take the store lock and are committed to the append-only
    log before they are acknowledged; replaying the log reconstructs the
    exact state.
    """

    def __init__(
        self,
        config: ServiceConfig,
        dataset: FoldedDataset | None = None,
        taxonomy: ActionTaxonomy | None = None,
        clock=time.time,
    ):
        self.config = config
        self.dataset = dataset if dataset is not None else load_manifest(config.manifest)
        self.taxonomy = taxonomy or ActionTaxonomy()
        self.clock = clock
        self.open = True
        self._lock = threading.Lock()
        self._submissions: dict[tuple[str, str], Submission] = {}  # (clip, annotator)
        self._by_clip: dict[str, set[str]] = {c.clip_id: set() for c in self.dataset.clips}
        self._leases: dict[str, dict[str, float]] = {}  # clip -> session -> expiry
        self._profiles: dict[str, dict] = {}
        config.data_dir.mkdir(parents=True, exist_ok=True)
        self.log_path = config.data_dir / f"{config.campaign_id}-submissions.jsonl"
        self._log_fh = None
        self._replay()
        self._log_fh = self.log_path.open("a", encoding="utf-8")

    # ------------------------------------------------------------- persistence

    def _replay(self) -> None:
        if not self.log_path.exists():
            return
        with self.log_path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                if record.get("type") == "profile":
                    self._profiles[record["session"]] = record["checklist"]
                    continue
                sub = Submission(
                    campaign_id=record["campaign"],
                    clip_id=record["clip_id"],
                    annotator_id=record["session"],
                    scores=tuple(record["scores"]),
                    timestamp=record["ts"],
                )
                self._apply(sub)
        log.info(
            "replayed %d submission(s) for campaign %s",
            len(self._submissions),
            self.config.campaign_id,
        )

    def _apply(self, sub: Submission) -> None:
        self._submissions[(sub.clip_id, sub.annotator_id)] = sub
        self._by_clip.setdefault(sub.clip_id, set()).add(sub.annotator_id)

    def _commit(self, record: dict) -> None:
        self._log_fh.write(json.dumps(record) + "\n")
        self._log_fh.flush()
        os.fsync(self._log_fh.fileno())

    def close(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None

    # -------------------------------------------------------------- assignment

    def _active_leases(self, clip_id: str, now: float) -> dict[str, float]:
        leases = self._leases.get(clip_id, {})
        live = {s: exp for s, exp in leases.items() if exp > now}
        if live != leases:
            self._leases[clip_id] = live
        return live

    def record_profile(self, session: str, checklist: dict) -> None:
        """Self-reported annotator checklist; stored, never verified."""
        with self._lock:
            self._profiles[session] = checklist
            self._commit({"type": "profile", "session": session, "checklist": checklist})

    def next_clip(self, session: str) -> Assignment | None:
        """A clip this session has not rated and that still needs raters.

        Returns None when the session has nothing left to rate. Clips are
        offered lowest-coverage first resolving ties by clip id, and a lease
        keeps concurrent sessions from over-subscribing one clip.
        """
        if not session:
            raise ValidationFailure("session token required")
        if not self.open:
            return None
        with self._lock:
            now = self.clock()
            # an outstanding lease for this session is re-offered as-is
            for clip_id, leases in self._leases.items():
                if leases.get(session, 0) > now and (clip_id, session) not in self._submissions:
                    return Assignment(clip_id=clip_id, actions=self.taxonomy.actions)
            candidates = []
            for clip in self.dataset.clips:
                cid = clip.clip_id
                if (cid, session) in self._submissions:
                    continue
                raters = self._by_clip[cid]
                if len(raters) >= self.config.raters_per_clip:
                    continue
                others = {
                    s for s in self._active_leases(cid, now) if s != session and s not in raters
                }
                if len(raters) + len(others) >= self.config.raters_per_clip:
                    continue
                candidates.append((len(raters), cid))
            if not candidates:
                return None
            _, clip_id = min(candidates)
            self._leases.setdefault(clip_id, {})[session] = now + self.config.lease_seconds
            return Assignment(clip_id=clip_id, actions=self.taxonomy.actions)

    # ------------------------------------------------------------- submissions

    def submit(self, session: str, clip_id: str, scores: list[int]) -> dict:
        """Validate, persist, acknowledge. Identical retries return the same ack."""
        if not session:
            raise ValidationFailure("session token required")
        if clip_id not in self._by_clip:
            raise ValidationFailure(f"unknown clip {clip_id!r}")
        if not isinstance(scores, (list, tuple)) or len(scores) != len(self.taxonomy):
            raise ValidationFailure(f"expected {len(self.taxonomy)} scores")
        clean = []
        for s in scores:
            if not isinstance(s, int) or isinstance(s, bool) or not 0 <= s <= 4:
                raise ValidationFailure(f"score {s!r} not an integer in 0..4")
            clean.append(s)
        scores_t = tuple(clean)
        with self._lock:
            existing = self._submissions.get((clip_id, session))
            if existing is not None:
                if existing.scores == scores_t:
                    return self._ack(existing, duplicate=True)
                raise SubmissionConflict(
                    f"session already rated clip {clip_id!r} with different scores"
                )
            raters = self._by_clip[clip_id]
            if len(raters) >= self.config.raters_per_clip:
                raise SubmissionConflict(f"clip {clip_id!r} already has all its ratings")
            sub = Submission(
                campaign_id=self.config.campaign_id,
                clip_id=clip_id,
                annotator_id=session,
                scores=scores_t,
                timestamp=self.clock(),
            )
            self._commit(
                {
                    "campaign": sub.campaign_id,
                    "clip_id": sub.clip_id,
                    "session": sub.annotator_id,
                    "scores": list(sub.scores),
                    "ts": sub.timestamp,
                }
            )
            self._apply(sub)
            self._leases.get(clip_id, {}).pop(session, None)
            return self._ack(sub, duplicate=False)

    def _ack(self, sub: Submission, duplicate: bool) -> dict:
        return {
            "ok": True,
            "clip_id": sub.clip_id,
            "received": list(sub.scores),
            "duplicate": duplicate,
        }

    # ---------------------------------------------------------------- reporting

    def ratings(self) -> list[ActionRating]:
        with self._lock:
            return [
                ActionRating(clip_id=s.clip_id, annotator_id=s.annotator_id, scores=s.scores)
                for s in self._submissions.values()
            ]

    def progress(self) -> dict:
        with self._lock:
            counts = {n: 0 for n in range(self.config.raters_per_clip + 1)}
            for clip in self.dataset.clips:
                n = min(len(self._by_clip[clip.clip_id]), self.config.raters_per_clip)
                counts[n] += 1
            ratings = [
                ActionRating(clip_id=s.clip_id, annotator_id=s.annotator_id, scores=s.scores)
                for s in self._submissions.values()
            ]
        _, flagged = reject_spammers(ratings)
        complete = counts[self.config.raters_per_clip] == len(self.dataset)
        return {
            "campaign_id": self.config.campaign_id,
            "total_clips": len(self.dataset),
            "coverage": {str(k): v for k, v in counts.items()},
            "total_submissions": len(ratings),
            "spam_flagged_pairs": len(flagged),
            "complete": complete,
        }

    def export_csv(self) -> str:
        """Pipeline-ready annotation CSV, byte-stable for unchanged data."""
        return format_ratings_csv(self.ratings(), self.taxonomy)


def create_app(config: ServiceConfig, store: CampaignStore | None = None):
    """FastAPI application over one campaign store."""
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import FileResponse, PlainTextResponse
    from pydantic import BaseModel

    store = store or CampaignStore(config)
    app = FastAPI(title="action rating service")
    app.state.store = store

    class SubmitBody(BaseModel):
        session: str
        clip_id: str
        scores: list[int]

    class ProfileBody(BaseModel):
        session: str
        checklist: dict

    def _check_campaign(campaign_id: str) -> None:
        if campaign_id != config.campaign_id:
            raise HTTPException(status_code=404, detail=f"unknown campaign {campaign_id!r}")

    @app.get("/api/campaign/{campaign_id}/next")
    def next_clip(campaign_id: str, session: str = ""):
        _check_campaign(campaign_id)
        try:
            assignment = store.next_clip(session)
        except ValidationFailure as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        if assignment is None:
            return {"done": True}
        return assignment.payload()

    @app.post("/api/campaign/{campaign_id}/submit")
    def submit(campaign_id: str, body: SubmitBody):
        _check_campaign(campaign_id)
        try:
            return store.submit(body.session, body.clip_id, body.scores)
        except ValidationFailure as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        except SubmissionConflict as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None

    @app.post("/api/campaign/{campaign_id}/session")
    def register_session(campaign_id: str, body: ProfileBody):
        _check_campaign(campaign_id)
        if not body.session:
            raise HTTPException(status_code=422, detail="session token required")
        store.record_profile(body.session, body.checklist)
        return {"ok": True}

    @app.get("/api/campaign/{campaign_id}/progress")
    def progress(campaign_id: str):
        _check_campaign(campaign_id)
        return store.progress()

    @app.get("/api/campaign/{campaign_id}/export.csv")
    def export(campaign_id: str):
        _check_campaign(campaign_id)
        # partial exports are allowed; completeness is flagged out-of-band so
        # the CSV bytes stay stable
        complete = store.progress()["complete"]
        return PlainTextResponse(
            store.export_csv(),
            media_type="text/csv",
            headers={"X-Campaign-Complete": "true" if complete else "false"},
        )

    @app.get("/api/clip/{clip_id}/audio")
    def audio(clip_id: str):
        if clip_id not in store.dataset.by_id:
            raise HTTPException(status_code=404, detail="unknown clip")
        path = config.audio_dir / store.dataset.by_id[clip_id].filename
        if not path.exists():
            raise HTTPException(status_code=404, detail="audio file missing")
        return FileResponse(path, media_type="audio/wav")

    if config.ui_dir is not None and Path(config.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(config.ui_dir), html=True), name="ui")

    return app


def run_service(config: ServiceConfig) -> None:
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
