"""Candidate scoring, recursive co-author inclusion, and decision feedback.

A record enters the candidate pool only when one of its author names
matches a profile variant (surname + first initial). Pool records are
scored along five dimensions — address, coauthor, subject, citedrefs,
style — each in [0,1] or absent; absent weights are redistributed over
the present dimensions. Thresholds split candidates into ACCEPTED /
UNCERTAIN / REJECTED, a recursive co-author closure from seed records
auto-accepts its members, and curator decisions on the uncertain set
feed back into the profile signature and live rescoring.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Any, Iterable, Mapping, Sequence

from .core import (
    DIMENSIONS,
    AddressKey,
    Config,
    OverrideRequired,
    PublicationRecord,
    ResearcherProfile,
    UnknownRecordError,
    ValidationError,
    fingerprint_tokens,
)
from .ingest import k2_key, match_keys
from .stylometry import StyleVector, style_evidence, style_features, style_score_from_docs

logger = logging.getLogger(__name__)

TIERS = ("ACCEPTED", "UNCERTAIN", "REJECTED", "HUMAN_ACCEPTED", "HUMAN_REJECTED")
AUTO_TIERS = ("ACCEPTED", "UNCERTAIN", "REJECTED")

SEED_ADDRESS_FLOOR = 0.7

# Address pair score: organisation token overlap dominates, city seals it.
_ORG_WEIGHT = 0.7
_CITY_WEIGHT = 0.3
# Publications may trail an affiliation: one year of lead, two of lag.
_YEAR_LEAD = 1
_YEAR_LAG = 2
_OUT_OF_WINDOW_FACTOR = 0.5


@dataclass(frozen=True)
class CandidateAssignment:
    """Scoring outcome for one pool record."""

    record_id: str
    components: dict[str, float | None]
    weights_used: dict[str, float]
    combined: float
    tier: str
    inclusion_round: int | None = None
    evidence: tuple[str, ...] = ()

    def present_components(self) -> dict[str, float]:
        return {d: v for d, v in self.components.items() if v is not None}

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "components": {d: self.components.get(d) for d in DIMENSIONS},
            "weights_used": {d: self.weights_used[d] for d in DIMENSIONS if d in self.weights_used},
            "combined": self.combined,
            "tier": self.tier,
            "inclusion_round": self.inclusion_round,
            "evidence": list(self.evidence),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> CandidateAssignment:
        return cls(
            record_id=d["record_id"],
            components={k: d["components"].get(k) for k in DIMENSIONS},
            weights_used=dict(d.get("weights_used", {})),
            combined=float(d["combined"]),
            tier=d["tier"],
            inclusion_round=d.get("inclusion_round"),
            evidence=tuple(d.get("evidence", [])),
        )


@dataclass(frozen=True)
class DeltaEntry:
    """Before/after view of one assignment touched by a decision."""

    record_id: str
    old_combined: float
    new_combined: float
    old_tier: str
    new_tier: str
    assignment: CandidateAssignment

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "old_combined": self.old_combined,
            "new_combined": self.new_combined,
            "old_tier": self.old_tier,
            "new_tier": self.new_tier,
            "assignment": self.assignment.to_dict(),
        }


@dataclass(frozen=True)
class RescoreDelta:
    """Result of applying one decision: the decided record first, then
    every remaining uncertain record whose score or tier moved."""

    entries: tuple[DeltaEntry, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"entries": [e.to_dict() for e in self.entries]}


def variant_k2_keys(profile: ResearcherProfile) -> frozenset[str]:
    return frozenset(k2_key(v) for v in profile.variants)


def record_coauthor_keys(
    record: PublicationRecord, variant_keys: frozenset[str]
) -> frozenset[str]:
    """K2 keys of the record's authors, the profile's own variants excluded."""
    return frozenset(k2_key(a) for a in record.authors) - variant_keys


def candidate_pool(
    records: Sequence[PublicationRecord], profile: ResearcherProfile
) -> list[str]:
    """Record ids whose author list hits a profile variant exactly (K2)."""
    keys = variant_k2_keys(profile)
    return [
        r.record_id
        for r in records
        if any(k2_key(a) in keys for a in r.authors)
    ]


def _address_token_set(address: str) -> frozenset[str]:
    return frozenset(fingerprint_tokens(address))


def _pair_score(address_tokens: frozenset[str], key: AddressKey, year: int) -> float:
    if key.org_tokens:
        m = len(key.org_tokens & address_tokens) / len(key.org_tokens)
    else:
        m = 0.0
    c = 0.0
    if key.city:
        city_tokens = key.city.split()
        if city_tokens and all(t in address_tokens for t in city_tokens):
            c = 1.0
    score = _ORG_WEIGHT * m + _CITY_WEIGHT * c
    if key.year_start is not None and key.year_end is not None:
        if not (key.year_start - _YEAR_LEAD <= year <= key.year_end + _YEAR_LAG):
            score *= _OUT_OF_WINDOW_FACTOR
    return score


def _address_best(
    record: PublicationRecord, profile: ResearcherProfile
) -> tuple[float, AddressKey, str] | None:
    """Best (score, trajectory key, record address) pair, None when absent."""
    if not record.addresses or not profile.trajectory:
        return None
    best: tuple[float, AddressKey, str] | None = None
    for address in record.addresses:
        tokens = _address_token_set(address)
        for key in profile.trajectory:
            score = _pair_score(tokens, key, record.year)
            if best is None or score > best[0]:
                best = (score, key, address)
    return best


def address_score(record: PublicationRecord, profile: ResearcherProfile) -> float | None:
    best = _address_best(record, profile)
    return best[0] if best is not None else None


def coauthor_score(record: PublicationRecord, profile: ResearcherProfile) -> float | None:
    """Fraction of the record's co-authors already known from accepted work.

    The denominator is the record's own co-author count, so accepting
    more records can only grow the numerator — scores never drop as the
    curator works through the queue.
    """
    own = record_coauthor_keys(record, variant_k2_keys(profile))
    if not own:
        return None
    return len(own & profile.coauthor_keys) / len(own)


def _subject_tokens(record: PublicationRecord) -> frozenset[str]:
    text = " ".join(record.keywords)
    if record.venue:
        text = f"{text} {record.venue}"
    return frozenset(fingerprint_tokens(text))


def subject_score(record: PublicationRecord, profile: ResearcherProfile) -> float | None:
    tokens = _subject_tokens(record)
    if not tokens or not profile.subject_vocab:
        return None
    union = tokens | profile.subject_vocab
    return len(tokens & profile.subject_vocab) / len(union)


def citedref_score(record: PublicationRecord, profile: ResearcherProfile) -> float | None:
    if not record.cited_refs or not profile.accepted_refs:
        return None
    refs = frozenset(record.cited_refs)
    union = refs | profile.accepted_refs
    return len(refs & profile.accepted_refs) / len(union)


def style_score(
    record: PublicationRecord,
    profile: ResearcherProfile,
    cfg: Config,
    style_cache: dict[str, StyleVector] | None = None,
) -> float | None:
    if not record.abstract or len(profile.style_corpus) < cfg.n_min_style:
        return None
    candidate = _style_vector(record, cfg, style_cache)
    return style_score_from_docs(candidate, profile.style_corpus, cfg.function_words)


def _style_vector(
    record: PublicationRecord,
    cfg: Config,
    cache: dict[str, StyleVector] | None,
) -> StyleVector:
    if cache is not None and record.record_id in cache:
        return cache[record.record_id]
    vector = style_features(record.title, record.abstract, cfg.function_words)
    if cache is not None:
        cache[record.record_id] = vector
    return vector


def combine(
    components: Mapping[str, float | None], weights: Mapping[str, float]
) -> tuple[float, dict[str, float]]:
    """Weighted sum with absent-dimension weights spread over the rest.

    Returns (combined, weights_used); weights_used holds the present
    dimensions only and sums to 1 when any are present. When every
    present dimension carries zero configured weight, they share the
    mass uniformly rather than dividing by zero.
    """
    present = [d for d in DIMENSIONS if components.get(d) is not None]
    if not present:
        return 0.0, {}
    mass = sum(weights.get(d, 0.0) for d in present)
    if mass > 0:
        weights_used = {d: weights.get(d, 0.0) / mass for d in present}
    else:
        weights_used = {d: 1.0 / len(present) for d in present}
    combined = sum(weights_used[d] * components[d] for d in present)  # type: ignore[operator]
    return combined, weights_used


def assign_tier(assignment: CandidateAssignment, cfg: Config) -> str:
    """Tier from the combined score; closure members are always accepted."""
    if assignment.inclusion_round is not None:
        return "ACCEPTED"
    return _auto_tier(assignment.combined, len(assignment.present_components()), cfg)


def _auto_tier(combined: float, n_present: int, cfg: Config) -> str:
    if n_present < 2:
        return "UNCERTAIN"
    if combined >= cfg.tau_hi:
        return "ACCEPTED"
    if combined <= cfg.tau_lo:
        return "REJECTED"
    return "UNCERTAIN"


def select_seeds(
    pool: Sequence[PublicationRecord],
    profile: ResearcherProfile,
    cfg: Config,
) -> frozenset[str]:
    """Unambiguous anchors: exact full-initials name match plus a strong
    address hit, together with any ids the analyst listed explicitly."""
    variant_k1 = {match_keys(v)[0] for v in profile.variants}
    seeds = set()
    pool_ids = {r.record_id for r in pool}
    for record in pool:
        if not any(match_keys(a)[0] in variant_k1 for a in record.authors):
            continue
        score = address_score(record, profile)
        if score is not None and score >= SEED_ADDRESS_FLOOR:
            seeds.add(record.record_id)
    seeds.update(profile.seed_ids & pool_ids)
    return frozenset(seeds)


def recursive_coauthor_inclusion(
    seeds: Iterable[str],
    records: Sequence[PublicationRecord],
    k: int,
    variant_keys: frozenset[str] = frozenset(),
    max_rounds: int | None = None,
) -> dict[str, int]:
    """Round-based co-author closure from the seed set.

    Round 0 is the seeds. Each later round admits every record sharing
    at least ``k`` co-author keys with the union of co-author keys over
    everything admitted so far; rounds are synchronous, so the result is
    the least fixpoint and does not depend on iteration order. Returns
    the round at which each admitted record entered.
    """
    if k < 1:
        raise ValidationError("k >= 1")
    keys_by_id = {
        r.record_id: record_coauthor_keys(r, variant_keys) for r in records
    }
    included: dict[str, int] = {rid: 0 for rid in seeds}
    acc_keys: set[str] = set()
    for rid in included:
        acc_keys.update(keys_by_id.get(rid, frozenset()))

    round_no = 0
    while max_rounds is None or round_no < max_rounds:
        round_no += 1
        admitted = [
            rid
            for rid, keys in keys_by_id.items()
            if rid not in included and len(keys & acc_keys) >= k
        ]
        if not admitted:
            break
        for rid in admitted:
            included[rid] = round_no
            acc_keys.update(keys_by_id[rid])
    return included


def derive_signature(
    profile: ResearcherProfile,
    records_by_id: Mapping[str, PublicationRecord],
    cfg: Config,
    style_cache: dict[str, StyleVector] | None = None,
) -> ResearcherProfile:
    """Recompute the profile fields that summarize the accepted records."""
    variant_keys = variant_k2_keys(profile)
    coauthors: set[str] = set()
    vocab: set[str] = set()
    refs: set[str] = set()
    corpus: list[StyleVector] = []
    for rid in sorted(profile.accepted_ids):
        record = records_by_id.get(rid)
        if record is None:
            continue
        coauthors.update(record_coauthor_keys(record, variant_keys))
        vocab.update(_subject_tokens(record))
        if record.cited_refs:
            refs.update(record.cited_refs)
        if record.abstract:
            corpus.append(_style_vector(record, cfg, style_cache))
    return replace(
        profile,
        coauthor_keys=frozenset(coauthors),
        subject_vocab=frozenset(vocab),
        accepted_refs=frozenset(refs),
        style_corpus=tuple(corpus),
    )


def _score_components(
    record: PublicationRecord,
    profile: ResearcherProfile,
    cfg: Config,
    style_cache: dict[str, StyleVector] | None,
) -> dict[str, float | None]:
    return {
        "address": address_score(record, profile),
        "coauthor": coauthor_score(record, profile),
        "subject": subject_score(record, profile),
        "citedrefs": citedref_score(record, profile),
        "style": style_score(record, profile, cfg, style_cache),
    }


def _build_evidence(
    record: PublicationRecord,
    profile: ResearcherProfile,
    cfg: Config,
    components: Mapping[str, float | None],
    inclusion_round: int | None,
    is_seed: bool,
    style_cache: dict[str, StyleVector] | None,
) -> tuple[str, ...]:
    evidence: list[str] = []
    if is_seed:
        evidence.append("seed: exact name variant with trajectory address match")
    elif inclusion_round is not None:
        evidence.append(f"co-author closure: admitted at round {inclusion_round}")
    if components.get("address") is not None:
        best = _address_best(record, profile)
        if best is not None:
            score, key, address = best
            evidence.append(
                f"address {score:.2f}: '{address}' matched trajectory line '{key.describe()}'"
            )
    if components.get("coauthor") is not None:
        own = record_coauthor_keys(record, variant_k2_keys(profile))
        shared = sorted(own & profile.coauthor_keys)
        label = ", ".join(shared) if shared else "none"
        evidence.append(f"coauthors known {len(shared)}/{len(own)}: {label}")
    if components.get("subject") is not None:
        shared_terms = sorted(_subject_tokens(record) & profile.subject_vocab)
        sample = ", ".join(shared_terms[:8])
        evidence.append(f"subject overlap {len(shared_terms)} terms: {sample}")
    if components.get("citedrefs") is not None:
        shared_refs = frozenset(record.cited_refs or ()) & profile.accepted_refs
        evidence.append(f"shared cited refs: {len(shared_refs)}")
    if components.get("style") is not None:
        candidate = _style_vector(record, cfg, style_cache)
        evidence.extend(
            style_evidence(candidate, profile.style_corpus, cfg.function_words, top_n=3)
        )
    return tuple(evidence)


def score_all(
    records: Sequence[PublicationRecord],
    profile: ResearcherProfile,
    cfg: Config,
    style_cache: dict[str, StyleVector] | None = None,
) -> list[CandidateAssignment]:
    """Score every pool record; deterministic for identical inputs.

    The profile's derived signature is recomputed first, so callers may
    pass a bare profile (variants + trajectory + decision id sets).
    """
    if style_cache is None:
        style_cache = {}
    records_by_id = {r.record_id: r for r in records}
    profile = derive_signature(profile, records_by_id, cfg, style_cache)
    pool_ids = candidate_pool(records, profile)
    pool = [records_by_id[rid] for rid in sorted(set(pool_ids))]

    seeds = select_seeds(pool, profile, cfg)
    rounds = recursive_coauthor_inclusion(
        seeds, pool, cfg.k_coauthor, variant_k2_keys(profile)
    )

    assignments = []
    for record in pool:
        assignments.append(
            _score_one(
                record,
                profile,
                cfg,
                inclusion_round=rounds.get(record.record_id),
                is_seed=record.record_id in seeds,
                style_cache=style_cache,
            )
        )
    return assignments


def _score_one(
    record: PublicationRecord,
    profile: ResearcherProfile,
    cfg: Config,
    inclusion_round: int | None,
    is_seed: bool,
    style_cache: dict[str, StyleVector] | None,
) -> CandidateAssignment:
    components = _score_components(record, profile, cfg, style_cache)
    combined, weights_used = combine(components, cfg.weights)
    provisional = CandidateAssignment(
        record_id=record.record_id,
        components=components,
        weights_used=weights_used,
        combined=combined,
        tier="UNCERTAIN",
        inclusion_round=inclusion_round,
    )
    tier = assign_tier(provisional, cfg)
    evidence = _build_evidence(
        record, profile, cfg, components, inclusion_round, is_seed, style_cache
    )
    return replace(provisional, tier=tier, evidence=evidence)


def apply_decision_pure(
    assignments: Sequence[CandidateAssignment],
    records_by_id: Mapping[str, PublicationRecord],
    profile: ResearcherProfile,
    cfg: Config,
    record_id: str,
    decision: str,
    override: bool = False,
    style_cache: dict[str, StyleVector] | None = None,
) -> tuple[list[CandidateAssignment], ResearcherProfile, RescoreDelta]:
    """Apply one curator decision and rescore the remaining uncertain set.

    Pure with respect to its inputs: returns the updated assignment
    list, the updated profile, and a delta whose first entry is the
    decided record, followed by every remaining UNCERTAIN record whose
    combined score or tier changed (in record_id order). Persistence and
    logging live with the session, not here.
    """
    if decision not in ("accept", "reject"):
        raise ValidationError(f"decision must be accept or reject: {decision}")
    index = {a.record_id: i for i, a in enumerate(assignments)}
    if record_id not in index:
        raise UnknownRecordError(f"unknown record: {record_id}")
    current = assignments[index[record_id]]
    if current.tier in ("ACCEPTED", "REJECTED") and not override:
        raise OverrideRequired(
            f"record {record_id} is {current.tier}; pass override to revise an automatic tier"
        )

    new_tier = "HUMAN_ACCEPTED" if decision == "accept" else "HUMAN_REJECTED"
    accepted = set(profile.accepted_ids)
    rejected = set(profile.rejected_ids)
    seed_ids = set(profile.seed_ids)
    if decision == "accept":
        accepted.add(record_id)
        rejected.discard(record_id)
    else:
        rejected.add(record_id)
        accepted.discard(record_id)
        seed_ids.discard(record_id)
    signature_changed = accepted != set(profile.accepted_ids)
    profile = replace(
        profile,
        seed_ids=frozenset(seed_ids),
        accepted_ids=frozenset(accepted),
        rejected_ids=frozenset(rejected),
    )

    updated = list(assignments)
    decided = replace(current, tier=new_tier)
    updated[index[record_id]] = decided
    entries = [
        DeltaEntry(
            record_id=record_id,
            old_combined=current.combined,
            new_combined=decided.combined,
            old_tier=current.tier,
            new_tier=new_tier,
            assignment=decided,
        )
    ]

    if signature_changed:
        if style_cache is None:
            style_cache = {}
        profile = derive_signature(profile, records_by_id, cfg, style_cache)
        changed = []
        for i, assignment in enumerate(updated):
            if assignment.tier != "UNCERTAIN" or assignment.record_id == record_id:
                continue
            record = records_by_id.get(assignment.record_id)
            if record is None:
                continue
            rescored = _score_one(
                record,
                profile,
                cfg,
                inclusion_round=assignment.inclusion_round,
                is_seed=False,
                style_cache=style_cache,
            )
            if (
                rescored.combined != assignment.combined
                or rescored.tier != assignment.tier
            ):
                changed.append(
                    DeltaEntry(
                        record_id=assignment.record_id,
                        old_combined=assignment.combined,
                        new_combined=rescored.combined,
                        old_tier=assignment.tier,
                        new_tier=rescored.tier,
                        assignment=rescored,
                    )
                )
            updated[i] = rescored
        changed.sort(key=lambda e: e.record_id)
        entries.extend(changed)
    else:
        profile = derive_signature(profile, records_by_id, cfg, style_cache or {})

    return updated, profile, RescoreDelta(entries=tuple(entries))
