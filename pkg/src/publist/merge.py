"""Duplicate detection across sources and canonical record composition.

Two records are duplicates when their DOIs agree, or when their title
fingerprints are near-identical, their years differ by at most one and
their author key sets overlap. Duplicate clusters are the connected
components of that relation; each cluster is merged into one canonical
record, field by field, preferring the most trusted source and keeping
a provenance map of which sources supplied which fields.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .core import (
    PublicationRecord,
    PublistError,
    SourceTag,
    derive_record_id,
    fingerprint_tokens,
    title_fingerprint,
)
from .ingest import k2_key

logger = logging.getLogger(__name__)

_SCALAR_FIELDS = ("title", "year", "venue", "doi", "abstract", "doc_type")
_UNION_FIELDS = ("keywords", "addresses", "cited_refs", "native_ids")


@dataclass(frozen=True)
class MergeCluster:
    """A group of records judged to be the same publication."""

    member_ids: frozenset[str]
    canonical: PublicationRecord
    field_provenance: dict[str, list[str]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "member_ids": sorted(self.member_ids),
            "canonical": self.canonical.to_dict(),
            "field_provenance": {f: list(v) for f, v in sorted(self.field_provenance.items())},
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> MergeCluster:
        return cls(
            member_ids=frozenset(d["member_ids"]),
            canonical=PublicationRecord.from_dict(d["canonical"]),
            field_provenance={f: list(v) for f, v in d.get("field_provenance", {}).items()},
        )


def levenshtein(a: str, b: str) -> int:
    """Classic edit distance (insert/delete/substitute, all cost 1)."""
    if a == b:
        return 0
    # Shared prefixes and suffixes never contribute to the distance.
    start = 0
    end_a, end_b = len(a), len(b)
    while start < end_a and start < end_b and a[start] == b[start]:
        start += 1
    while end_a > start and end_b > start and a[end_a - 1] == b[end_b - 1]:
        end_a -= 1
        end_b -= 1
    a, b = a[start:end_a], b[start:end_b]
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


def _distance_within(a: str, b: str, limit: int) -> bool:
    """True iff levenshtein(a, b) <= limit, using a banded computation."""
    if a == b:
        return True
    if abs(len(a) - len(b)) > limit:
        return False
    if limit <= 0:
        return False
    # Shared prefixes and suffixes never contribute to the distance, and
    # near-duplicate titles are mostly shared text, so trim them first.
    start = 0
    end_a, end_b = len(a), len(b)
    while start < end_a and start < end_b and a[start] == b[start]:
        start += 1
    while end_a > start and end_b > start and a[end_a - 1] == b[end_b - 1]:
        end_a -= 1
        end_b -= 1
    a, b = a[start:end_a], b[start:end_b]
    if not a or not b:
        return max(len(a), len(b)) <= limit
    if len(a) < len(b):
        a, b = b, a
    # Cells farther than `limit` off the diagonal can never get back
    # under it, so each row only computes the diagonal band.
    n = len(b)
    too_far = limit + 1
    previous = [j if j <= limit else too_far for j in range(n + 1)]
    for i, ca in enumerate(a, 1):
        lo = i - limit if i > limit else 1
        hi = n if n < i + limit else i + limit
        current = [too_far] * (n + 1)
        if lo == 1 and i <= limit:
            current[0] = i
        row_min = too_far
        for j in range(lo, hi + 1):
            d = previous[j - 1] + (ca != b[j - 1])
            up = previous[j] + 1
            if up < d:
                d = up
            left = current[j - 1] + 1
            if left < d:
                d = left
            current[j] = d
            if d < row_min:
                row_min = d
        if row_min > limit:
            return False
        previous = current
    return previous[n] <= limit


def title_similarity(a: str, b: str) -> float:
    """Similarity in [0,1] of two titles, on their fingerprint forms.

    Accepts raw titles or already-fingerprinted strings (fingerprinting
    is idempotent). Two blank strings are fully similar.
    """
    fp_a = title_fingerprint(a) if a and a.strip() else ""
    fp_b = title_fingerprint(b) if b and b.strip() else ""
    if not fp_a and not fp_b:
        return 1.0
    longest = max(len(fp_a), len(fp_b))
    return 1.0 - levenshtein(fp_a, fp_b) / longest


def _k2_set(record: PublicationRecord) -> frozenset[str]:
    return frozenset(k2_key(a) for a in record.authors)


def is_duplicate(a: PublicationRecord, b: PublicationRecord, cfg) -> bool:
    """Symmetric pair predicate behind duplicate clustering."""
    if a.doi is not None and b.doi is not None and a.doi == b.doi:
        return True
    if abs(a.year - b.year) > 1:
        return False
    if not (_k2_set(a) & _k2_set(b)):
        return False
    return title_similarity(a.title, b.title) >= cfg.title_sim_threshold


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[max(rx, ry)] = min(rx, ry)


def source_trust_key(tag: SourceTag, trust_order: Sequence[str]) -> tuple[int, int, str]:
    """Sort key for sources: lower sorts as more trusted.

    An explicit trust_order (matched against source_id or source_name)
    outranks everything else; sources not listed fall back to their own
    trust_rank.
    """
    for i, name in enumerate(trust_order):
        if name == tag.source_id or name == tag.source_name:
            return (0, i, tag.source_id)
    return (1, tag.trust_rank, tag.source_id)


def _member_trust_key(record: PublicationRecord, trust_order: Sequence[str]) -> tuple:
    best = min(source_trust_key(tag, trust_order) for tag in record.provenance)
    return (*best, record.record_id)


def merge_cluster(
    members: Iterable[PublicationRecord],
    trust_order: Sequence[str] = (),
) -> PublicationRecord:
    """Compose the canonical record for one duplicate cluster."""
    canonical, _ = _merge_with_provenance(list(members), trust_order)
    return canonical


def _merge_with_provenance(
    members: list[PublicationRecord],
    trust_order: Sequence[str],
) -> tuple[PublicationRecord, dict[str, list[str]]]:
    if not members:
        raise PublistError("cannot merge an empty cluster")
    ranked = sorted(members, key=lambda r: _member_trust_key(r, trust_order))

    def contributors(selected: list[PublicationRecord]) -> list[str]:
        ids = {tag.source_id for r in selected for tag in r.provenance}
        return sorted(ids)

    provenance_map: dict[str, list[str]] = {}
    chosen: dict[str, Any] = {}
    for fld in _SCALAR_FIELDS:
        value = None
        for member in ranked:
            candidate = getattr(member, fld)
            if candidate is not None and candidate != "":
                value = candidate
                break
        chosen[fld] = value
        if value is not None:
            matching = [m for m in ranked if getattr(m, fld) == value]
            provenance_map[fld] = contributors(matching)

    years = {m.year for m in ranked}
    if len(years) > 1:
        logger.debug(
            "year conflict in cluster %s: %s; keeping %s",
            sorted(m.record_id for m in ranked), sorted(years), chosen["year"],
        )

    # Author lists are taken whole from one member so we never invent an
    # author order that no source reported.
    author_source = min(
        ranked, key=lambda m: (-len(m.authors), _member_trust_key(m, trust_order))
    )
    chosen_authors = author_source.authors
    provenance_map["authors"] = contributors(
        [m for m in ranked if m.authors == chosen_authors]
    )

    keywords = sorted({kw for m in ranked for kw in m.keywords})
    addresses = sorted({ad for m in ranked for ad in m.addresses})
    refs_members = [m for m in ranked if m.cited_refs is not None]
    cited_refs = sorted({r for m in refs_members for r in m.cited_refs}) if refs_members else None
    native_ids: dict[str, str] = {}
    for member in reversed(ranked):
        native_ids.update(member.native_ids)
    for fld, values in (
        ("keywords", keywords),
        ("addresses", addresses),
        ("cited_refs", cited_refs or []),
        ("native_ids", native_ids),
    ):
        sources = contributors([m for m in ranked if getattr(m, fld)])
        if values and sources:
            provenance_map[fld] = sources

    provenance = sorted(
        {tag for m in ranked for tag in m.provenance},
        key=lambda t: source_trust_key(t, trust_order),
    )
    canonical = PublicationRecord(
        record_id=derive_record_id(chosen["title"], chosen["year"], chosen["doi"]),
        doi=chosen["doi"],
        native_ids=native_ids,
        title=chosen["title"],
        abstract=chosen["abstract"],
        year=chosen["year"],
        venue=chosen["venue"],
        doc_type=chosen["doc_type"],
        authors=chosen_authors,
        addresses=tuple(addresses),
        keywords=tuple(keywords),
        cited_refs=tuple(cited_refs) if cited_refs is not None else None,
        provenance=tuple(provenance),
    )
    return canonical, provenance_map


def dedup(records: list[PublicationRecord], cfg, trust_order: Sequence[str] | None = None) -> list[MergeCluster]:
    """Group records into duplicate clusters and merge each one.

    Candidate pairs come from blocking (shared DOI, or same first
    fingerprint token within a one-year window); clusters are the
    connected components of is_duplicate over those pairs. The result
    partitions the input, is independent of input order, and is sorted
    by canonical record_id.
    """
    if trust_order is None:
        trust_order = tuple(getattr(cfg, "trust_order", ()) or ())
    # Canonical processing order so the clustering never depends on how
    # the caller happened to arrange the list.
    ordered = sorted(records, key=lambda r: (r.record_id, r.year, len(r.provenance)))
    n = len(ordered)
    fps = [title_fingerprint(r.title) if r.title.strip() else "" for r in ordered]
    key_sets = [_k2_set(r) for r in ordered]
    uf = _UnionFind(n)

    doi_blocks: dict[str, list[int]] = {}
    token_blocks: dict[tuple[int, str], list[int]] = {}
    for i, record in enumerate(ordered):
        if record.doi:
            doi_blocks.setdefault(record.doi, []).append(i)
        first = fps[i].split(" ", 1)[0] if fps[i] else ""
        token_blocks.setdefault((record.year, first), []).append(i)

    for block in doi_blocks.values():
        for i in block[1:]:
            uf.union(block[0], i)

    threshold = cfg.title_sim_threshold

    def check_pair(i: int, j: int) -> None:
        if uf.find(i) == uf.find(j):
            return
        a, b = ordered[i], ordered[j]
        if abs(a.year - b.year) > 1:
            return
        if not (key_sets[i] & key_sets[j]):
            return
        longest = max(len(fps[i]), len(fps[j]))
        if longest == 0:
            uf.union(i, j)
            return
        # Largest distance that still clears the similarity threshold,
        # nudged so the bounded check agrees exactly with the float
        # comparison in title_similarity.
        limit = int((1.0 - threshold) * longest)
        while 1.0 - (limit + 1) / longest >= threshold:
            limit += 1
        while limit > 0 and 1.0 - limit / longest < threshold:
            limit -= 1
        if _distance_within(fps[i], fps[j], limit):
            uf.union(i, j)

    for (year, token), block in token_blocks.items():
        for x in range(len(block)):
            for y in range(x + 1, len(block)):
                check_pair(block[x], block[y])
        for j in token_blocks.get((year + 1, token), ()):  # covers |Δyear| = 1
            for i in block:
                check_pair(i, j)

    groups: dict[int, list[PublicationRecord]] = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(ordered[i])

    clusters = []
    for members in groups.values():
        canonical, provenance_map = _merge_with_provenance(members, trust_order)
        clusters.append(
            MergeCluster(
                member_ids=frozenset(m.record_id for m in members),
                canonical=canonical,
                field_provenance=provenance_map,
            )
        )
    clusters.sort(key=lambda c: (c.canonical.record_id, sorted(c.member_ids)))
    return clusters
