"""Shared domain types, validation, and deterministic record identity.

Everything here is an immutable value object: records, names, address
keys, profiles and configuration can be copied or shared across threads
freely. Record identity is content-derived (DOI when present, otherwise
a fingerprint hash of title + year) so the same publication gets the
same id no matter which source it came from.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field, replace
from datetime import date
from typing import Any

DOC_TYPES = ("article", "review", "proceedings", "other")

# Scoring dimensions, in canonical order.
DIMENSIONS = ("address", "coauthor", "subject", "citedrefs", "style")

DEFAULT_WEIGHTS = {
    "address": 0.30,
    "coauthor": 0.30,
    "subject": 0.20,
    "citedrefs": 0.10,
    "style": 0.10,
}

DEFAULT_FUNCTION_WORDS = (
    "the", "of", "and", "a", "in", "to", "is", "for", "with", "on",
    "that", "by", "as", "are", "this", "we", "be", "an", "which", "from",
    "at", "or", "it", "can", "has", "have", "not", "but", "its", "these",
)

MIN_YEAR = 1500

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF

_DOI_PREFIXES = (
    "https://doi.org/",
    "http://doi.org/",
    "https://dx.doi.org/",
    "http://dx.doi.org/",
    "doi:",
)


class PublistError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PublistError):
    """A domain invariant was violated.

    Carries the list of individual violation messages.
    """

    def __init__(self, violations: list[str] | str):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class FormatError(PublistError):
    """Bad arguments, unknown formats, or unparseable strict inputs."""


class UnknownRecordError(ValidationError):
    """A record id was addressed that the session does not contain."""


class OverrideRequired(ValidationError):
    """Revising an automatic ACCEPTED/REJECTED tier needs an explicit flag."""


def fold_diacritics(text: str) -> str:
    """Strip combining marks after canonical decomposition."""
    decomposed = unicodedata.normalize("NFD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


def fingerprint_tokens(text: str) -> list[str]:
    """Sorted, deduplicated alphanumeric tokens of a folded, lowercased string."""
    folded = fold_diacritics(text).lower()
    cleaned = "".join(ch if ch.isalnum() else " " for ch in folded)
    return sorted(set(cleaned.split()))


def title_fingerprint(title: str) -> str:
    """Canonical order- and punctuation-insensitive form of a title.

    Lowercases, folds diacritics, replaces non-alphanumerics with spaces,
    then joins the sorted unique tokens with single spaces. Idempotent.
    """
    if not title or not title.strip():
        raise ValidationError("title non-empty")
    return " ".join(fingerprint_tokens(title))


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash (standard offset basis and prime)."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _U64
    return h


def normalize_doi(doi: str | None) -> str | None:
    if doi is None:
        return None
    d = doi.strip().lower()
    for prefix in _DOI_PREFIXES:
        if d.startswith(prefix):
            d = d[len(prefix):]
            break
    return d or None


def derive_record_id(title: str, year: int, doi: str | None = None) -> str:
    """Deterministic record identity.

    ``doi:<lowercase doi>`` when a DOI is present, otherwise
    ``fp:<16-hex-digit FNV-1a>`` over ``title_fingerprint + ":" + year``.
    """
    doi = normalize_doi(doi)
    if doi:
        return "doi:" + doi
    payload = f"{title_fingerprint(title)}:{year}".encode("utf-8")
    return f"fp:{fnv1a_64(payload):016x}"


@dataclass(frozen=True)
class SourceTag:
    """Where a record came from. trust_rank 0 is the most trusted."""

    source_id: str
    source_name: str
    trust_rank: int

    def validate(self) -> list[str]:
        out = []
        if not self.source_id or not self.source_id.strip():
            out.append("source_id non-empty")
        if self.trust_rank < 0:
            out.append("trust_rank >= 0")
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "source_id": self.source_id,
            "source_name": self.source_name,
            "trust_rank": self.trust_rank,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> SourceTag:
        return cls(
            source_id=d["source_id"],
            source_name=d.get("source_name", d["source_id"]),
            trust_rank=int(d.get("trust_rank", 0)),
        )


@dataclass(frozen=True)
class AuthorName:
    """A normalized author name plus the raw string it came from."""

    raw: str
    surname: str
    given_tokens: tuple[str, ...]
    initials: str

    def display(self) -> str:
        """Canonical rendering; re-normalizing it reproduces the same fields."""
        if self.given_tokens:
            return f"{self.surname}, {' '.join(self.given_tokens)}"
        return self.surname

    def validate(self) -> list[str]:
        out = []
        if not self.surname:
            out.append("surname non-empty")
        if len(self.initials) != len(self.given_tokens):
            out.append("initials length equals given token count")
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "raw": self.raw,
            "surname": self.surname,
            "given_tokens": list(self.given_tokens),
            "initials": self.initials,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> AuthorName:
        return cls(
            raw=d["raw"],
            surname=d["surname"],
            given_tokens=tuple(d["given_tokens"]),
            initials=d["initials"],
        )


@dataclass(frozen=True)
class AddressKey:
    """One stop of the researcher's trajectory (organisation, city, period).

    ``raw`` keeps the original trajectory line so matches can be shown
    verbatim as evidence.
    """

    org_tokens: frozenset[str]
    city: str | None = None
    country: str | None = None
    year_start: int | None = None
    year_end: int | None = None
    raw: str = ""

    def validate(self) -> list[str]:
        out = []
        if not self.org_tokens and not self.city:
            out.append("org_tokens non-empty or city present")
        if (
            self.year_start is not None
            and self.year_end is not None
            and self.year_start > self.year_end
        ):
            out.append("year_start <= year_end")
        if self.country is not None and (
            len(self.country) != 2 or not self.country.isalpha()
        ):
            out.append("country is a 2-letter code")
        return out

    def describe(self) -> str:
        """Human-readable form; the raw line when available."""
        if self.raw:
            return self.raw
        years = ""
        if self.year_start is not None or self.year_end is not None:
            years = f"{self.year_start or ''}-{self.year_end or ''}"
        parts = [years, " ".join(sorted(self.org_tokens)), self.city or "", self.country or ""]
        return " | ".join(parts).strip()

    def to_dict(self) -> dict[str, Any]:
        return {
            "org_tokens": sorted(self.org_tokens),
            "city": self.city,
            "country": self.country,
            "year_start": self.year_start,
            "year_end": self.year_end,
            "raw": self.raw,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> AddressKey:
        return cls(
            org_tokens=frozenset(d.get("org_tokens", [])),
            city=d.get("city"),
            country=d.get("country"),
            year_start=d.get("year_start"),
            year_end=d.get("year_end"),
            raw=d.get("raw", ""),
        )


@dataclass(frozen=True)
class PublicationRecord:
    """One bibliographic item with authors, addresses and provenance."""

    record_id: str
    doi: str | None
    native_ids: dict[str, str]
    title: str
    abstract: str | None
    year: int
    venue: str | None
    doc_type: str
    authors: tuple[AuthorName, ...]
    addresses: tuple[str, ...]
    keywords: tuple[str, ...]
    cited_refs: tuple[str, ...] | None
    provenance: tuple[SourceTag, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "doi": self.doi,
            "native_ids": dict(self.native_ids),
            "title": self.title,
            "abstract": self.abstract,
            "year": self.year,
            "venue": self.venue,
            "doc_type": self.doc_type,
            "authors": [a.to_dict() for a in self.authors],
            "addresses": list(self.addresses),
            "keywords": list(self.keywords),
            "cited_refs": list(self.cited_refs) if self.cited_refs is not None else None,
            "provenance": [s.to_dict() for s in self.provenance],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PublicationRecord:
        cited = d.get("cited_refs")
        return cls(
            record_id=d["record_id"],
            doi=d.get("doi"),
            native_ids=dict(d.get("native_ids", {})),
            title=d["title"],
            abstract=d.get("abstract"),
            year=int(d["year"]),
            venue=d.get("venue"),
            doc_type=d.get("doc_type", "other"),
            authors=tuple(AuthorName.from_dict(a) for a in d["authors"]),
            addresses=tuple(d.get("addresses", [])),
            keywords=tuple(d.get("keywords", [])),
            cited_refs=tuple(cited) if cited is not None else None,
            provenance=tuple(SourceTag.from_dict(s) for s in d.get("provenance", [])),
        )


def _clean_optional(value: str | None) -> str | None:
    if value is None:
        return None
    v = value.strip()
    return v or None


def make_record(
    *,
    title: str,
    year: int,
    authors: tuple[AuthorName, ...] | list[AuthorName],
    provenance: tuple[SourceTag, ...] | list[SourceTag],
    doi: str | None = None,
    native_ids: dict[str, str] | None = None,
    abstract: str | None = None,
    venue: str | None = None,
    doc_type: str = "article",
    addresses: tuple[str, ...] | list[str] = (),
    keywords: tuple[str, ...] | list[str] = (),
    cited_refs: tuple[str, ...] | list[str] | None = None,
) -> PublicationRecord:
    """Build a validated record with a derived record_id.

    Raises ValidationError listing every violated invariant.
    """
    doi = normalize_doi(doi)
    title = (title or "").strip()
    refs: tuple[str, ...] | None = None
    if cited_refs is not None:
        refs = tuple(" ".join(r.split()).lower() for r in cited_refs if r.strip())
    record = PublicationRecord(
        record_id=derive_record_id(title or "-", int(year), doi) if title else "",
        doi=doi,
        native_ids=dict(native_ids or {}),
        title=title,
        abstract=_clean_optional(abstract),
        year=int(year),
        venue=_clean_optional(venue),
        doc_type=doc_type,
        authors=tuple(authors),
        addresses=tuple(a.strip() for a in addresses if a.strip()),
        keywords=tuple(k.strip() for k in keywords if k.strip()),
        cited_refs=refs,
        provenance=tuple(provenance),
    )
    violations = validate_record(record)
    if violations:
        raise ValidationError(violations)
    return record


def validate_record(record: PublicationRecord) -> list[str]:
    """Every violated PublicationRecord invariant; empty list iff valid."""
    out: list[str] = []
    if not record.title or not record.title.strip():
        out.append("title non-empty")
    if not (MIN_YEAR <= record.year <= date.today().year + 1):
        out.append(f"year range: {record.year}")
    if not record.authors:
        out.append("authors non-empty")
    for a in record.authors:
        out.extend(f"author '{a.raw}': {v}" for v in a.validate())
    if record.doc_type not in DOC_TYPES:
        out.append(f"doc_type unknown: {record.doc_type}")
    if not record.provenance:
        out.append("provenance non-empty")
    for s in record.provenance:
        out.extend(f"source '{s.source_id}': {v}" for v in s.validate())
    if record.doi is not None and record.doi != normalize_doi(record.doi):
        out.append("doi normalized")
    if record.title.strip():
        expected = derive_record_id(record.title, record.year, record.doi)
        if record.record_id != expected:
            out.append(f"record_id mismatch: {record.record_id} != {expected}")
    return out


def record_replace(record: PublicationRecord, **changes: Any) -> PublicationRecord:
    """Functional update that re-derives the record_id."""
    updated = replace(record, **changes)
    rid = derive_record_id(updated.title, updated.year, updated.doi)
    return replace(updated, record_id=rid)


@dataclass(frozen=True)
class ResearcherProfile:
    """The target author: name variants, trajectory, decision corpus.

    The derived signature fields (coauthor_keys, subject_vocab,
    accepted_refs, style_corpus) are pure functions of the accepted
    records; they are recomputed, never hand-set, and never persisted.
    """

    variants: tuple[AuthorName, ...]
    trajectory: tuple[AddressKey, ...] = ()
    seed_ids: frozenset[str] = frozenset()
    accepted_ids: frozenset[str] = frozenset()
    rejected_ids: frozenset[str] = frozenset()
    coauthor_keys: frozenset[str] = frozenset()
    subject_vocab: frozenset[str] = frozenset()
    accepted_refs: frozenset[str] = frozenset()
    style_corpus: tuple = ()

    def validate(self) -> list[str]:
        out = []
        if not self.variants:
            out.append("variants non-empty")
        for v in self.variants:
            out.extend(f"variant '{v.raw}': {m}" for m in v.validate())
        for k in self.trajectory:
            out.extend(f"trajectory '{k.describe()}': {m}" for m in k.validate())
        if self.accepted_ids & self.rejected_ids:
            out.append("accepted_ids and rejected_ids disjoint")
        if not self.seed_ids <= self.accepted_ids:
            out.append("seed_ids subset of accepted_ids")
        return out

    def to_dict(self) -> dict[str, Any]:
        # Derived fields are intentionally absent: they are recomputed.
        return {
            "variants": [v.to_dict() for v in self.variants],
            "trajectory": [k.to_dict() for k in self.trajectory],
            "seed_ids": sorted(self.seed_ids),
            "accepted_ids": sorted(self.accepted_ids),
            "rejected_ids": sorted(self.rejected_ids),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ResearcherProfile:
        profile = cls(
            variants=tuple(AuthorName.from_dict(v) for v in d.get("variants", [])),
            trajectory=tuple(AddressKey.from_dict(k) for k in d.get("trajectory", [])),
            seed_ids=frozenset(d.get("seed_ids", [])),
            accepted_ids=frozenset(d.get("accepted_ids", [])) | frozenset(d.get("seed_ids", [])),
            rejected_ids=frozenset(d.get("rejected_ids", [])),
        )
        violations = profile.validate()
        if violations:
            raise ValidationError(violations)
        return profile


@dataclass(frozen=True)
class Config:
    """Engine configuration. Defaults are the shipped baseline."""

    weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    tau_hi: float = 0.70
    tau_lo: float = 0.20
    k_coauthor: int = 1
    title_sim_threshold: float = 0.90
    n_min_style: int = 5
    function_words: tuple[str, ...] = DEFAULT_FUNCTION_WORDS
    trust_order: tuple[str, ...] = ()

    def validate(self) -> list[str]:
        out = []
        extra = set(self.weights) - set(DIMENSIONS)
        missing = set(DIMENSIONS) - set(self.weights)
        if extra:
            out.append(f"weights unknown dimensions: {sorted(extra)}")
        if missing:
            out.append(f"weights missing dimensions: {sorted(missing)}")
        if any(w < 0 for w in self.weights.values()):
            out.append("weights non-negative")
        if sum(self.weights.values()) <= 0:
            out.append("weights sum > 0")
        if not (0.0 <= self.tau_lo < self.tau_hi <= 1.0):
            out.append("0 <= tau_lo < tau_hi <= 1")
        if self.k_coauthor < 1:
            out.append("k_coauthor >= 1")
        if not (0.0 <= self.title_sim_threshold <= 1.0):
            out.append("title_sim_threshold in [0,1]")
        if self.n_min_style < 1:
            out.append("n_min_style >= 1")
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "weights": {d: self.weights[d] for d in DIMENSIONS if d in self.weights},
            "tau_hi": self.tau_hi,
            "tau_lo": self.tau_lo,
            "k_coauthor": self.k_coauthor,
            "title_sim_threshold": self.title_sim_threshold,
            "n_min_style": self.n_min_style,
            "function_words": list(self.function_words),
            "trust_order": list(self.trust_order),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Config:
        weights = dict(DEFAULT_WEIGHTS)
        weights.update(d.get("weights", {}))
        cfg = cls(
            weights=weights,
            tau_hi=float(d.get("tau_hi", 0.70)),
            tau_lo=float(d.get("tau_lo", 0.20)),
            k_coauthor=int(d.get("k_coauthor", 1)),
            title_sim_threshold=float(d.get("title_sim_threshold", 0.90)),
            n_min_style=int(d.get("n_min_style", 5)),
            function_words=tuple(d.get("function_words", DEFAULT_FUNCTION_WORDS)),
            trust_order=tuple(d.get("trust_order", ())),
        )
        violations = cfg.validate()
        if violations:
            raise ValidationError(violations)
        return cfg
