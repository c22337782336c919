"""File-backed curation sessions shared by the CLI and the HTTP service.

A session is a plain directory:

    records.jsonl      raw ingested records, in ingest order
    clusters.jsonl     duplicate clusters with canonical records
    assignments.jsonl  current scoring state (after decision replay)
    decisions.jsonl    append-only curator decision log
    profile.json       the researcher profile as created (initial state)
    config.json        engine configuration
    state.json         revision counter + run status + ingested sources

The current state is always reproducible: run the pipeline on the raw
records with the initial profile, then replay the decision log in
order. A lock file serializes mutations; every mutation bumps the
revision by exactly one, which doubles as the optimistic-concurrency
token for the HTTP layer.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable

from filelock import FileLock

from .core import (
    Config,
    FormatError,
    PublicationRecord,
    ResearcherProfile,
    SourceTag,
    ValidationError,
)
from .disambiguate import (
    CandidateAssignment,
    RescoreDelta,
    apply_decision_pure,
    derive_signature,
    score_all,
)
from .merge import MergeCluster, dedup

logger = logging.getLogger(__name__)

_FILES = {
    "records": "records.jsonl",
    "clusters": "clusters.jsonl",
    "assignments": "assignments.jsonl",
    "decisions": "decisions.jsonl",
    "profile": "profile.json",
    "config": "config.json",
    "state": "state.json",
}


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_jsonl(path: Path, rows: Iterable[dict[str, Any]]) -> None:
    _atomic_write(path, "".join(_dumps(row) + "\n" for row in rows))


def _read_jsonl(path: Path) -> list[dict[str, Any]]:
    if not path.exists():
        return []
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append(json.loads(line))
    return rows


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Session:
    """One researcher's curation workspace, backed by a directory."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self._lock = FileLock(str(self.root / "session.lock"))
        self._state: dict[str, Any] = {}
        self._config: Config | None = None
        self._initial_profile: ResearcherProfile | None = None
        self._profile: ResearcherProfile | None = None
        self._records: list[PublicationRecord] = []
        self._clusters: list[MergeCluster] = []
        self._assignments: list[CandidateAssignment] = []
        self._style_cache: dict[str, Any] = {}
        self._loaded_revision: int | None = None

    # -- construction -------------------------------------------------

    @classmethod
    def create(cls, root: Path, profile: ResearcherProfile, config: Config) -> Session:
        root = Path(root)
        violations = profile.validate() + config.validate()
        if violations:
            raise ValidationError(violations)
        if (root / _FILES["state"]).exists():
            raise FormatError(f"session already exists: {root}")
        root.mkdir(parents=True, exist_ok=True)
        session = cls(root)
        with session._lock:
            _atomic_write(root / _FILES["profile"], _dumps(profile.to_dict()))
            _atomic_write(root / _FILES["config"], _dumps(config.to_dict()))
            for name in ("records", "clusters", "assignments", "decisions"):
                _atomic_write(root / _FILES[name], "")
            session._state = {"revision": 0, "ran": False, "sources": []}
            session._write_state()
        session._load()
        return session

    @classmethod
    def open(cls, root: Path) -> Session:
        root = Path(root)
        if not (root / _FILES["state"]).exists():
            raise FormatError(f"session not found: {root}")
        session = cls(root)
        session._load()
        return session

    # -- persistence --------------------------------------------------

    def _write_state(self) -> None:
        _atomic_write(self.root / _FILES["state"], _dumps(self._state))

    def _load(self) -> None:
        with self._lock:
            self._state = json.loads((self.root / _FILES["state"]).read_text(encoding="utf-8"))
            self._config = Config.from_dict(
                json.loads((self.root / _FILES["config"]).read_text(encoding="utf-8"))
            )
            self._initial_profile = ResearcherProfile.from_dict(
                json.loads((self.root / _FILES["profile"]).read_text(encoding="utf-8"))
            )
            self._records = [
                PublicationRecord.from_dict(d) for d in _read_jsonl(self.root / _FILES["records"])
            ]
            self._clusters = [
                MergeCluster.from_dict(d) for d in _read_jsonl(self.root / _FILES["clusters"])
            ]
            self._assignments = [
                CandidateAssignment.from_dict(d)
                for d in _read_jsonl(self.root / _FILES["assignments"])
            ]
            self._profile = self._replay_profile()
            self._loaded_revision = self._state["revision"]

    def _replay_profile(self) -> ResearcherProfile:
        """Initial profile + decision id-sets, signature rederived."""
        assert self._initial_profile is not None and self._config is not None
        profile = self._initial_profile
        accepted = set(profile.accepted_ids)
        rejected = set(profile.rejected_ids)
        seeds = set(profile.seed_ids)
        for decision in self.decisions():
            rid = decision["record_id"]
            if decision["decision"] == "accept":
                accepted.add(rid)
                rejected.discard(rid)
            else:
                rejected.add(rid)
                accepted.discard(rid)
                seeds.discard(rid)
        profile = replace(
            profile,
            seed_ids=frozenset(seeds),
            accepted_ids=frozenset(accepted),
            rejected_ids=frozenset(rejected),
        )
        return derive_signature(
            profile, self.canonical_by_id(), self._config, self._style_cache
        )

    def refresh(self) -> None:
        """Reload from disk when another process has moved the revision."""
        on_disk = json.loads((self.root / _FILES["state"]).read_text(encoding="utf-8"))
        if on_disk["revision"] != self._loaded_revision:
            self._style_cache.clear()
            self._load()

    # -- accessors ----------------------------------------------------

    @property
    def session_id(self) -> str:
        return self.root.name

    @property
    def revision(self) -> int:
        return int(self._state["revision"])

    @property
    def ran(self) -> bool:
        return bool(self._state.get("ran"))

    @property
    def sources(self) -> list[dict[str, Any]]:
        return [dict(s) for s in self._state.get("sources", [])]

    @property
    def config(self) -> Config:
        assert self._config is not None
        return self._config

    @property
    def profile(self) -> ResearcherProfile:
        """Current profile: initial state plus every logged decision."""
        assert self._profile is not None
        return self._profile

    @property
    def initial_profile(self) -> ResearcherProfile:
        assert self._initial_profile is not None
        return self._initial_profile

    def raw_records(self) -> list[PublicationRecord]:
        return list(self._records)

    def clusters(self) -> list[MergeCluster]:
        return list(self._clusters)

    def canonical_records(self) -> list[PublicationRecord]:
        return [c.canonical for c in self._clusters]

    def canonical_by_id(self) -> dict[str, PublicationRecord]:
        return {c.canonical.record_id: c.canonical for c in self._clusters}

    def assignments(self) -> list[CandidateAssignment]:
        return list(self._assignments)

    def decisions(self) -> list[dict[str, Any]]:
        return _read_jsonl(self.root / _FILES["decisions"])

    def gold_entries(self) -> list[Any] | None:
        path = self.root / "gold.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def set_gold(self, entries: list[Any]) -> None:
        """Store an external publication list for recall reporting."""
        if not isinstance(entries, list):
            raise ValidationError("gold must be a list of entries")
        with self._lock:
            self.refresh()
            _atomic_write(self.root / "gold.json", _dumps(entries))
            self._state["revision"] += 1
            self._write_state()
            self._loaded_revision = self._state["revision"]

    # -- mutations ----------------------------------------------------

    def add_records(
        self,
        records: Iterable[PublicationRecord],
        source: SourceTag | None = None,
    ) -> int:
        """Append ingested records and register their sources.

        The source roster comes from the records' provenance plus the
        optional explicit tag (which registers a source even when its
        file parsed to zero records). Two different sources may not
        share a trust rank — the merge order would be ambiguous.
        """
        added = list(records)
        with self._lock:
            self.refresh()
            new_tags: dict[str, SourceTag] = {}
            if source is not None:
                new_tags[source.source_id] = source
            for record in added:
                for tag in record.provenance:
                    new_tags.setdefault(tag.source_id, tag)
            known = {s["source_id"]: s for s in self._state["sources"]}
            for tag in new_tags.values():
                for other in known.values():
                    if (
                        other["source_id"] != tag.source_id
                        and other["trust_rank"] == tag.trust_rank
                    ):
                        raise ValidationError(
                            f"sources '{tag.source_id}' and '{other['source_id']}'"
                            f" share trust_rank {tag.trust_rank}"
                        )
                known[tag.source_id] = tag.to_dict()
            rows = _read_jsonl(self.root / _FILES["records"])
            rows.extend(r.to_dict() for r in added)
            _write_jsonl(self.root / _FILES["records"], rows)
            self._state["sources"] = [known[sid] for sid in sorted(known)]
            self._state["revision"] += 1
            self._write_state()
        self._load()
        return len(added)

    def run(self) -> dict[str, Any]:
        """Dedup + score + decision replay; persists the whole state."""
        with self._lock:
            self.refresh()
            assert self._config is not None and self._initial_profile is not None
            cfg = self._config
            self._style_cache.clear()
            clusters = dedup(self._records, cfg)
            canonicals = [c.canonical for c in clusters]
            records_by_id = {r.record_id: r for r in canonicals}
            profile = self._initial_profile
            assignments = score_all(canonicals, profile, cfg, self._style_cache)
            profile = derive_signature(profile, records_by_id, cfg, self._style_cache)
            for decision in self.decisions():
                try:
                    assignments, profile, _ = apply_decision_pure(
                        assignments,
                        records_by_id,
                        profile,
                        cfg,
                        decision["record_id"],
                        decision["decision"],
                        override=bool(decision.get("override")),
                        style_cache=self._style_cache,
                    )
                except ValidationError as exc:
                    logger.warning(
                        "skipping unreplayable decision for %s: %s",
                        decision["record_id"],
                        exc,
                    )
            _write_jsonl(self.root / _FILES["clusters"], [c.to_dict() for c in clusters])
            _write_jsonl(
                self.root / _FILES["assignments"], [a.to_dict() for a in assignments]
            )
            self._clusters = clusters
            self._assignments = assignments
            self._profile = profile
            self._state["ran"] = True
            self._state["revision"] += 1
            self._write_state()
            self._loaded_revision = self._state["revision"]
        return self.summary()

    def apply_decision(
        self,
        record_id: str,
        decision: str,
        note: str = "",
        override: bool = False,
        timestamp: str | bool | None = True,
    ) -> RescoreDelta:
        """Record one curator decision, rescore, persist, bump revision.

        timestamp=True stamps the log entry with the current UTC time;
        None leaves the timestamp null (deterministic runs).
        """
        with self._lock:
            self.refresh()
            if not self.ran:
                raise FormatError("session has not been run")
            assert self._config is not None and self._profile is not None
            assignments, profile, delta = apply_decision_pure(
                self._assignments,
                self.canonical_by_id(),
                self._profile,
                self._config,
                record_id,
                decision,
                override=override,
                style_cache=self._style_cache,
            )
            stamp = utc_now() if timestamp is True else timestamp
            entry = {
                "record_id": record_id,
                "decision": decision,
                "note": note,
                "override": bool(override),
                "timestamp": stamp,
            }
            with (self.root / _FILES["decisions"]).open("a", encoding="utf-8") as fh:
                fh.write(_dumps(entry) + "\n")
            _write_jsonl(
                self.root / _FILES["assignments"], [a.to_dict() for a in assignments]
            )
            self._assignments = assignments
            self._profile = profile
            self._state["revision"] += 1
            self._write_state()
            self._loaded_revision = self._state["revision"]
        return delta

    # -- summaries ----------------------------------------------------

    def summary(self) -> dict[str, Any]:
        tiers: dict[str, int] = {}
        for a in self._assignments:
            tiers[a.tier] = tiers.get(a.tier, 0) + 1
        return {
            "session_id": self.session_id,
            "revision": self.revision,
            "records": len(self._records),
            "clusters": len(self._clusters),
            "pool": len(self._assignments),
            "tiers": {t: tiers[t] for t in sorted(tiers)},
        }
