"""Method comparison, descriptive statistics, and publication-list export.

Two automatic retrieval methods are compared: the cluster method (seed
records, their co-author closure, and everything scoring above the
accept threshold) and the address method (records whose best trajectory
address match clears a floor). Every record caught by one method and
missed by the other gets exactly one deterministic reason code, checked
in a fixed priority order.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from .core import FormatError, PublicationRecord, normalize_doi, title_fingerprint
from .disambiguate import CandidateAssignment, address_score
from .ingest import serialize_ris
from .session import Session

DEFAULT_ADDRESS_FLOOR = 0.5

REASON_CODES = (
    "SOURCE_MISSING",
    "NO_ADDRESS_MATCH",
    "NOT_IN_CLUSTER",
    "NAME_VARIANT_MISS",
    "FIELD_INCOMPLETE",
    "OTHER",
)

EXPORT_FORMATS = ("json", "csv", "ris")

_CSV_COLUMNS = ("record_id", "doi", "year", "title", "venue", "doc_type", "tier", "combined")


@dataclass(frozen=True)
class MethodComparison:
    """Set algebra over two method results, with per-record explanations."""

    set_a: frozenset[str]
    set_b: frozenset[str]
    only_a: frozenset[str]
    only_b: frozenset[str]
    both: frozenset[str]
    recall_a: float | None
    recall_b: float | None
    recall_union: float | None
    reasons: dict[str, str]
    unmatched_gold: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "set_a": sorted(self.set_a),
            "set_b": sorted(self.set_b),
            "only_a": sorted(self.only_a),
            "only_b": sorted(self.only_b),
            "both": sorted(self.both),
            "recall_a": self.recall_a,
            "recall_b": self.recall_b,
            "recall_union": self.recall_union,
            "reasons": {rid: self.reasons[rid] for rid in sorted(self.reasons)},
            "unmatched_gold": list(self.unmatched_gold),
        }


def run_method_cluster(session: Session) -> frozenset[str]:
    """Seeds, their co-author closure, and high-combined records.

    Purely quantitative: curator decisions do not move records in or
    out of a method's result set.
    """
    tau_hi = session.config.tau_hi
    return frozenset(
        a.record_id
        for a in session.assignments()
        if a.inclusion_round is not None or a.combined >= tau_hi
    )


def run_method_address(
    session: Session, floor: float = DEFAULT_ADDRESS_FLOOR
) -> frozenset[str]:
    """Pool records whose best trajectory address match clears the floor."""
    out = set()
    for a in session.assignments():
        value = a.components.get("address")
        if value is not None and value >= floor:
            out.add(a.record_id)
    return frozenset(out)


def match_gold(
    entries: Iterable[Any], records: Sequence[PublicationRecord]
) -> tuple[frozenset[str], tuple[str, ...]]:
    """Resolve external gold-list entries to record ids.

    DOI matches win; otherwise title fingerprint + year. Entries may be
    dicts ({"doi": ...} or {"title": ..., "year": ...}) or strings
    (a DOI, or "title | year"). Unresolvable entries are reported, not
    fatal — free-form publication lists are messy by nature.
    """
    by_doi = {r.doi: r.record_id for r in records if r.doi}
    by_fp = {(title_fingerprint(r.title), r.year): r.record_id for r in records}
    matched = set()
    unmatched = []
    for entry in entries:
        rid = _resolve_gold_entry(entry, by_doi, by_fp)
        if rid is None:
            unmatched.append(entry if isinstance(entry, str) else json.dumps(entry, sort_keys=True))
        else:
            matched.add(rid)
    return frozenset(matched), tuple(unmatched)


def _resolve_gold_entry(
    entry: Any,
    by_doi: Mapping[str, str],
    by_fp: Mapping[tuple[str, int], str],
) -> str | None:
    title = None
    year = None
    if isinstance(entry, dict):
        doi = normalize_doi(entry.get("doi"))
        if doi and doi in by_doi:
            return by_doi[doi]
        title = entry.get("title")
        year = entry.get("year")
    elif isinstance(entry, str):
        doi = normalize_doi(entry)
        if doi and doi in by_doi:
            return by_doi[doi]
        if "|" in entry:
            title, _, year_text = entry.rpartition("|")
            year = year_text.strip() if year_text.strip().isdigit() else None
    if title and year is not None:
        try:
            key = (title_fingerprint(str(title)), int(year))
        except Exception:
            return None
        return by_fp.get(key)
    return None


def compare_methods(
    set_a: frozenset[str] | set[str],
    set_b: frozenset[str] | set[str],
    session: Session | None = None,
    gold: frozenset[str] | set[str] | None = None,
    unmatched_gold: tuple[str, ...] = (),
    address_floor: float = DEFAULT_ADDRESS_FLOOR,
) -> MethodComparison:
    """Set algebra between the cluster method (a) and address method (b).

    Each record caught by exactly one method gets the first applicable
    reason code in REASON_CODES order. gold is a set of record ids
    already resolved (see match_gold); pass unmatched entries through so
    the report can show them.
    """
    set_a = frozenset(set_a)
    set_b = frozenset(set_b)
    both = set_a & set_b
    only_a = set_a - set_b
    only_b = set_b - set_a

    records_by_id: dict[str, PublicationRecord] = {}
    assignments_by_id: dict[str, CandidateAssignment] = {}
    tau_hi = 1.0
    profile = None
    if session is not None:
        records_by_id = session.canonical_by_id()
        assignments_by_id = {a.record_id: a for a in session.assignments()}
        tau_hi = session.config.tau_hi
        profile = session.profile

    reasons = {}
    for rid in sorted(only_a | only_b):
        reasons[rid] = _reason_for(
            rid, records_by_id, assignments_by_id, profile, tau_hi, address_floor
        )

    recall_a = recall_b = recall_union = None
    if gold:
        gold = frozenset(gold)
        recall_a = len(set_a & gold) / len(gold)
        recall_b = len(set_b & gold) / len(gold)
        recall_union = len((set_a | set_b) & gold) / len(gold)

    return MethodComparison(
        set_a=set_a,
        set_b=set_b,
        only_a=frozenset(only_a),
        only_b=frozenset(only_b),
        both=frozenset(both),
        recall_a=recall_a,
        recall_b=recall_b,
        recall_union=recall_union,
        reasons=reasons,
        unmatched_gold=tuple(unmatched_gold),
    )


def _reason_for(
    rid: str,
    records_by_id: Mapping[str, PublicationRecord],
    assignments_by_id: Mapping[str, CandidateAssignment],
    profile,
    tau_hi: float,
    address_floor: float,
) -> str:
    record = records_by_id.get(rid)
    if record is None:
        return "SOURCE_MISSING"
    score = address_score(record, profile) if profile is not None else None
    if not record.addresses or score is None or score < address_floor:
        return "NO_ADDRESS_MATCH"
    assignment = assignments_by_id.get(rid)
    if assignment is not None and assignment.inclusion_round is None and assignment.combined < tau_hi:
        return "NOT_IN_CLUSTER"
    if assignment is None:
        return "NAME_VARIANT_MISS"
    if (
        not record.abstract
        or not record.addresses
        or not (record.keywords or record.venue)
        or not record.cited_refs
    ):
        return "FIELD_INCOMPLETE"
    return "OTHER"


def descriptive_stats(session: Session) -> dict[str, Any]:
    """Corpus- and pool-level counts plus component histograms.

    Corpus counts (per source, year, doc_type) cover every canonical
    record; tier counts and component histograms cover the scored pool.
    """
    records = session.canonical_records()
    assignments = session.assignments()

    per_source: dict[str, int] = {}
    per_year: dict[str, int] = {}
    per_doc_type: dict[str, int] = {}
    for r in records:
        for tag in r.provenance:
            per_source[tag.source_id] = per_source.get(tag.source_id, 0) + 1
        per_year[str(r.year)] = per_year.get(str(r.year), 0) + 1
        per_doc_type[r.doc_type] = per_doc_type.get(r.doc_type, 0) + 1

    per_tier: dict[str, int] = {}
    histograms: dict[str, list[int]] = {}
    for a in assignments:
        per_tier[a.tier] = per_tier.get(a.tier, 0) + 1
        for dim, value in a.components.items():
            if value is None:
                continue
            bins = histograms.setdefault(dim, [0] * 10)
            bins[min(int(value * 10), 9)] += 1

    return {
        "records": len(records),
        "pool": len(assignments),
        "tiers": {t: per_tier[t] for t in sorted(per_tier)},
        "sources": {s: per_source[s] for s in sorted(per_source)},
        "years": {y: per_year[y] for y in sorted(per_year)},
        "doc_types": {d: per_doc_type[d] for d in sorted(per_doc_type)},
        "decisions": len(session.decisions()),
        "component_histograms": {d: histograms[d] for d in sorted(histograms)},
    }


def accepted_records(session: Session) -> list[tuple[PublicationRecord, CandidateAssignment]]:
    """The publication list: accepted records, newest first, title tiebreak."""
    records_by_id = session.canonical_by_id()
    rows = [
        (records_by_id[a.record_id], a)
        for a in session.assignments()
        if a.tier in ("ACCEPTED", "HUMAN_ACCEPTED") and a.record_id in records_by_id
    ]
    rows.sort(key=lambda pair: (-pair[0].year, pair[0].title))
    return rows


def export_list(session: Session, format: str) -> bytes:
    """Render the accepted publication list as json, csv, or ris bytes."""
    if format not in EXPORT_FORMATS:
        raise FormatError(f"unknown export format: {format}")
    rows = accepted_records(session)
    if format == "json":
        payload = []
        for record, assignment in rows:
            item = record.to_dict()
            item["tier"] = assignment.tier
            item["combined"] = assignment.combined
            payload.append(item)
        return (json.dumps(payload, ensure_ascii=False, separators=(",", ":")) + "\n").encode("utf-8")
    if format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\r\n")
        writer.writerow(_CSV_COLUMNS)
        for record, assignment in rows:
            writer.writerow(
                [
                    record.record_id,
                    record.doi or "",
                    record.year,
                    record.title,
                    record.venue or "",
                    record.doc_type,
                    assignment.tier,
                    assignment.combined,
                ]
            )
        return buffer.getvalue().encode("utf-8")
    return serialize_ris([record for record, _ in rows]).encode("utf-8")
