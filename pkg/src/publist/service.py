"""HTTP session service: the pipeline plus the curation feedback loop.

All endpoints live under /api/v1 and speak JSON (exports also speak CSV
and RIS). Sessions are the same directories the CLI uses, so the two
interfaces are interchangeable over one session. Optimistic concurrency:
every response carries the session revision, mutations accept an
If-Match revision header and fail loudly with 409 when it is stale.
"""

from __future__ import annotations

import logging
import uuid
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Header, HTTPException, Query, Response
from pydantic import BaseModel

from .core import (
    Config,
    FormatError,
    OverrideRequired,
    SourceTag,
    UnknownRecordError,
    ValidationError,
)
from .disambiguate import TIERS
from .ingest import parse_ris, parse_table, profile_from_data
from .report import (
    DEFAULT_ADDRESS_FLOOR,
    compare_methods,
    descriptive_stats,
    export_list,
    match_gold,
    run_method_address,
    run_method_cluster,
)
from .session import Session

logger = logging.getLogger(__name__)

_EXPORT_MEDIA_TYPES = {
    "json": "application/json",
    "csv": "text/csv",
    "ris": "application/x-research-info-systems",
}

_TABLE_DELIMITERS = {"csv": ",", "tsv": "\t"}


class CreateSessionBody(BaseModel):
    profile: dict[str, Any]
    config: dict[str, Any] | None = None


class SourceBody(BaseModel):
    format: str
    source_tag: dict[str, Any]
    payload: str
    delimiter: str | None = None


class DecisionBody(BaseModel):
    record_id: str
    decision: str
    note: str = ""
    override: bool = False


class GoldBody(BaseModel):
    entries: list[Any]


def create_app(sessions_root: Path | str) -> FastAPI:
    """Build the service over a directory that holds session directories."""
    root = Path(sessions_root)
    root.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="publication-list service")
    registry: dict[str, Session] = {}

    def get_session(session_id: str) -> Session:
        session = registry.get(session_id)
        if session is None:
            try:
                session = Session.open(root / session_id)
            except FormatError:
                raise HTTPException(status_code=404, detail=f"unknown session: {session_id}")
            registry[session_id] = session
        else:
            session.refresh()
        return session

    def require_run(session: Session) -> None:
        if not session.ran:
            raise HTTPException(status_code=409, detail="session has not been run")

    def check_revision(session: Session, if_match: str | None) -> None:
        if if_match is None:
            return
        try:
            expected = int(if_match.strip().strip('"'))
        except ValueError:
            raise HTTPException(status_code=409, detail=f"bad If-Match revision: {if_match}")
        if expected != session.revision:
            raise HTTPException(
                status_code=409,
                detail=f"stale revision {expected}, session is at {session.revision}",
            )

    @app.post("/api/v1/sessions", status_code=201)
    def create_session(body: CreateSessionBody) -> dict[str, Any]:
        try:
            profile = profile_from_data(body.profile)
            config = Config.from_dict(body.config or {})
            session_id = uuid.uuid4().hex[:12]
            session = Session.create(root / session_id, profile, config)
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=exc.violations)
        registry[session.session_id] = session
        return {"session_id": session.session_id, "revision": session.revision}

    @app.get("/api/v1/sessions/{session_id}")
    def session_summary(session_id: str) -> dict[str, Any]:
        session = get_session(session_id)
        summary = session.summary()
        summary["ran"] = session.ran
        summary["sources"] = session.sources
        return summary

    @app.post("/api/v1/sessions/{session_id}/sources")
    def add_source(
        session_id: str,
        body: SourceBody,
        if_match: str | None = Header(default=None, alias="If-Match"),
    ) -> dict[str, Any]:
        session = get_session(session_id)
        check_revision(session, if_match)
        if body.format not in ("ris", "csv", "tsv"):
            raise HTTPException(status_code=422, detail=f"unknown format: {body.format}")
        try:
            tag = SourceTag.from_dict(body.source_tag)
            if body.format == "ris":
                records, report = parse_ris(body.payload, tag)
            else:
                delimiter = body.delimiter or _TABLE_DELIMITERS[body.format]
                records, report = parse_table(body.payload, None, tag, delimiter=delimiter)
            session.add_records(records, tag)
        except (ValidationError, FormatError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except KeyError as exc:
            raise HTTPException(status_code=422, detail=f"source_tag missing {exc}")
        result = report.to_dict()
        result["revision"] = session.revision
        return result

    @app.post("/api/v1/sessions/{session_id}/run")
    def run_session(
        session_id: str,
        if_match: str | None = Header(default=None, alias="If-Match"),
    ) -> dict[str, Any]:
        session = get_session(session_id)
        check_revision(session, if_match)
        if not session.sources:
            raise HTTPException(status_code=409, detail="no sources ingested")
        return session.run()

    @app.get("/api/v1/sessions/{session_id}/candidates")
    def candidates(
        session_id: str,
        tier: str | None = Query(default=None),
    ) -> dict[str, Any]:
        session = get_session(session_id)
        require_run(session)
        wanted = None
        if tier is not None:
            wanted = tier.upper()
            if wanted not in TIERS:
                raise HTTPException(status_code=422, detail=f"unknown tier: {tier}")
        rows = [
            a for a in session.assignments() if wanted is None or a.tier == wanted
        ]
        rows.sort(key=lambda a: (-a.combined, a.record_id))
        records_by_id = session.canonical_by_id()
        items = []
        for a in rows:
            item = a.to_dict()
            record = records_by_id.get(a.record_id)
            if record is not None:
                item["record"] = record.to_dict()
            items.append(item)
        return {"revision": session.revision, "candidates": items}

    @app.post("/api/v1/sessions/{session_id}/decisions")
    def decide(
        session_id: str,
        body: DecisionBody,
        if_match: str | None = Header(default=None, alias="If-Match"),
    ) -> dict[str, Any]:
        session = get_session(session_id)
        require_run(session)
        check_revision(session, if_match)
        try:
            delta = session.apply_decision(
                body.record_id, body.decision, note=body.note, override=body.override
            )
        except UnknownRecordError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except OverrideRequired as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=exc.violations)
        result = delta.to_dict()
        result["revision"] = session.revision
        return result

    @app.post("/api/v1/sessions/{session_id}/gold")
    def set_gold(
        session_id: str,
        body: GoldBody,
        if_match: str | None = Header(default=None, alias="If-Match"),
    ) -> dict[str, Any]:
        session = get_session(session_id)
        check_revision(session, if_match)
        try:
            session.set_gold(body.entries)
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=exc.violations)
        matched, unmatched = match_gold(body.entries, session.canonical_records())
        return {
            "revision": session.revision,
            "matched": sorted(matched),
            "unmatched": list(unmatched),
        }

    @app.get("/api/v1/sessions/{session_id}/report")
    def report(
        session_id: str,
        address_floor: float = Query(default=DEFAULT_ADDRESS_FLOOR),
    ) -> dict[str, Any]:
        session = get_session(session_id)
        require_run(session)
        set_a = run_method_cluster(session)
        set_b = run_method_address(session, address_floor)
        gold_ids = None
        unmatched: tuple[str, ...] = ()
        entries = session.gold_entries()
        if entries:
            gold_ids, unmatched = match_gold(entries, session.canonical_records())
        comparison = compare_methods(
            set_a,
            set_b,
            session,
            gold=gold_ids,
            unmatched_gold=unmatched,
            address_floor=address_floor,
        )
        return {
            "revision": session.revision,
            "comparison": comparison.to_dict(),
            "stats": descriptive_stats(session),
        }

    @app.get("/api/v1/sessions/{session_id}/export")
    def export(session_id: str, format: str = Query(...)) -> Response:
        session = get_session(session_id)
        require_run(session)
        try:
            payload = export_list(session, format)
        except FormatError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return Response(content=payload, media_type=_EXPORT_MEDIA_TYPES[format])

    return app
