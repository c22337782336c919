"""Parsers for bibliographic exports and trajectory files, plus name normalization.

Record-level parsers (RIS, delimited tables) never abort on a malformed
entry: each entry either becomes a PublicationRecord or is counted as a
rejection with a violation message, so parsed + rejected always equals
the number of entries seen. Trajectory files are small and curated, so
their parser is strict and fails on the first malformed line.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from typing import Any

from .core import (
    AddressKey,
    AuthorName,
    FormatError,
    PublicationRecord,
    ResearcherProfile,
    SourceTag,
    ValidationError,
    fingerprint_tokens,
    fold_diacritics,
    make_record,
)

SURNAME_PARTICLES = {"van", "de", "der", "den", "von", "da", "del", "di", "la", "le"}

_RIS_TAG_RE = re.compile(r"^([A-Z][A-Z0-9])\s\s?-\s?(.*)$")
_YEAR_RE = re.compile(r"^(\d{4})")
_YEAR_RANGE_RE = re.compile(r"^(\d{4})\s*[-–]\s*(\d{4})$")

# Our RIS dialect: one distinct type tag per doc_type so that
# serialization round-trips. CPAPER is accepted as proceedings on input.
_DOC_TYPE_TO_RIS = {"article": "JOUR", "review": "REVW", "proceedings": "CONF", "other": "GEN"}
_RIS_TO_DOC_TYPE = {"JOUR": "article", "REVW": "review", "CONF": "proceedings", "CPAPER": "proceedings"}

# Default header mapping for delimited exports (case-insensitive).
DEFAULT_COLUMN_MAP = {
    "title": "title",
    "authors": "authors",
    "year": "year",
    "abstract": "abstract",
    "venue": "venue",
    "doi": "doi",
    "doc_type": "doc_type",
    "keywords": "keywords",
    "addresses": "addresses",
    "cited_refs": "cited_refs",
}

_MULTI_VALUE_FIELDS = {"authors", "keywords", "addresses", "cited_refs"}


@dataclass
class IngestReport:
    """Outcome of one parse run. parsed + rejected = entries encountered."""

    source_id: str
    records_parsed: int = 0
    records_rejected: int = 0
    violations: list[tuple[tuple[int, int], str]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "source_id": self.source_id,
            "records_parsed": self.records_parsed,
            "records_rejected": self.records_rejected,
            "violations": [
                {"lines": list(span), "message": message}
                for span, message in self.violations
            ],
        }


def _normalize_text(raw: str) -> str:
    return fold_diacritics(raw).lower().strip()


def _clean_surname(text: str) -> str:
    # Internal punctuation folds to spaces so keys tolerate hyphenation
    # and apostrophe variants.
    cleaned = "".join(ch if ch.isalnum() else " " for ch in text)
    return " ".join(cleaned.split())


def _split_given(text: str) -> tuple[str, ...]:
    return tuple(t for t in re.split(r"[\s.\-]+", text) if t)


def _is_initials_token(token: str) -> bool:
    # "s", "j.", "j.r.", "j-r" all read as initials: every alphabetic run
    # in the token has length 1.
    runs = re.findall(r"[^\W\d_]+", token)
    return bool(runs) and all(len(r) == 1 for r in runs)


def normalize_name(raw: str) -> AuthorName:
    """Normalize one author string into surname / given tokens / initials.

    "Surname, Given" splits at the first comma. Comma-less names treat
    the last whitespace token as the surname, attaching the particles in
    SURNAME_PARTICLES, except when the name ends in initials-like tokens
    ("WOODING S"): those become the given tokens and everything before
    them is the surname. Idempotent on its own display() rendering.
    """
    if not raw or not raw.strip():
        raise ValidationError("author name non-empty")
    raw = raw.strip()
    s = _normalize_text(raw)
    if "," in s:
        surname_part, _, given_part = s.partition(",")
    else:
        tokens = s.split()
        if len(tokens) >= 2 and _is_initials_token(tokens[-1]):
            split_at = len(tokens)
            while split_at > 1 and _is_initials_token(tokens[split_at - 1]):
                split_at -= 1
            surname_part = " ".join(tokens[:split_at])
            given_part = " ".join(tokens[split_at:])
        else:
            surname_tokens = [tokens[-1]]
            i = len(tokens) - 2
            while i >= 0 and tokens[i] in SURNAME_PARTICLES:
                surname_tokens.insert(0, tokens[i])
                i -= 1
            surname_part = " ".join(surname_tokens)
            given_part = " ".join(tokens[: i + 1])
    surname = _clean_surname(surname_part)
    given = _split_given(given_part)
    if not surname:
        raise ValidationError(f"author name '{raw}': surname non-empty")
    return AuthorName(
        raw=raw,
        surname=surname,
        given_tokens=given,
        initials="".join(t[0] for t in given),
    )


def match_keys(name: AuthorName) -> tuple[str, str, str]:
    """Name-identity keys: (surname|initials, surname|first-initial, surname)."""
    first = name.initials[:1]
    return (
        f"{name.surname}|{name.initials}",
        f"{name.surname}|{first}",
        name.surname,
    )


def k2_key(name: AuthorName) -> str:
    return match_keys(name)[1]


def parse_ris(text: str, source: SourceTag) -> tuple[list[PublicationRecord], IngestReport]:
    """Parse RIS export text into records.

    Supported tags: TY, TI/T1, AU/A1, PY/Y1, AB/N2, T2/JO/JF, KW, DO,
    AD/C1, ER. Unknown tags and stray lines are ignored. A block needs a
    non-empty TI, at least one AU and a 4-digit PY; anything else is
    rejected (with a violation) without aborting the parse.
    """
    report = IngestReport(source_id=source.source_id)
    records: list[PublicationRecord] = []

    fields: dict[str, Any] | None = None
    block_start = 0

    def finalize(end_line: int) -> None:
        nonlocal fields
        if fields is None:
            return
        span = (block_start, end_line)
        problems = []
        if not fields.get("title"):
            problems.append("missing TI")
        if not fields.get("authors"):
            problems.append("missing AU")
        if fields.get("year") is None:
            problems.append("missing or invalid PY")
        if problems:
            report.records_rejected += 1
            report.violations.append((span, "; ".join(problems)))
            fields = None
            return
        try:
            record = make_record(
                title=fields["title"],
                year=fields["year"],
                authors=fields["authors"],
                provenance=[source],
                doi=fields.get("doi"),
                abstract=fields.get("abstract"),
                venue=fields.get("venue"),
                doc_type=fields.get("doc_type", "other"),
                addresses=fields.get("addresses", []),
                keywords=fields.get("keywords", []),
            )
        except ValidationError as exc:
            report.records_rejected += 1
            report.violations.append((span, str(exc)))
        else:
            records.append(record)
            report.records_parsed += 1
        fields = None

    lines = text.splitlines()
    for lineno, line in enumerate(lines, 1):
        m = _RIS_TAG_RE.match(line.rstrip())
        if not m:
            continue
        tag, value = m.group(1), m.group(2).strip()
        if tag == "TY":
            if fields is not None:
                # New block before ER: the previous one is malformed.
                report.records_rejected += 1
                report.violations.append(((block_start, lineno - 1), "unterminated block (missing ER)"))
            fields = {"doc_type": _RIS_TO_DOC_TYPE.get(value, "other"), "authors": [], "keywords": [], "addresses": []}
            block_start = lineno
            continue
        if fields is None:
            continue
        if tag == "ER":
            finalize(lineno)
        elif tag in ("TI", "T1"):
            if value and not fields.get("title"):
                fields["title"] = value
        elif tag in ("AU", "A1"):
            if value:
                try:
                    fields["authors"].append(normalize_name(value))
                except ValidationError:
                    pass
        elif tag in ("PY", "Y1"):
            ym = _YEAR_RE.match(value)
            if ym and fields.get("year") is None:
                fields["year"] = int(ym.group(1))
        elif tag in ("AB", "N2"):
            if value and not fields.get("abstract"):
                fields["abstract"] = value
        elif tag in ("T2", "JO", "JF"):
            if value and not fields.get("venue"):
                fields["venue"] = value
        elif tag == "KW":
            if value:
                fields["keywords"].append(value)
        elif tag == "DO":
            if value and not fields.get("doi"):
                fields["doi"] = value
        elif tag in ("AD", "C1"):
            if value:
                fields["addresses"].append(value)

    if fields is not None:
        report.records_rejected += 1
        report.violations.append(((block_start, len(lines)), "unterminated block (missing ER)"))

    return records, report


def serialize_ris(records: list[PublicationRecord]) -> str:
    """Render records in our canonical RIS dialect.

    parse_ris(serialize_ris(R)) reproduces R field-for-field over the
    supported tag set, and serialize(parse(text)) is byte-stable for
    text this function produced.
    """
    out: list[str] = []
    for record in records:
        out.append(f"TY  - {_DOC_TYPE_TO_RIS[record.doc_type]}")
        for author in record.authors:
            out.append(f"AU  - {_fold_line(author.raw)}")
        out.append(f"TI  - {_fold_line(record.title)}")
        out.append(f"PY  - {record.year}")
        if record.abstract:
            out.append(f"AB  - {_fold_line(record.abstract)}")
        if record.venue:
            out.append(f"T2  - {_fold_line(record.venue)}")
        if record.doi:
            out.append(f"DO  - {record.doi}")
        for kw in record.keywords:
            out.append(f"KW  - {_fold_line(kw)}")
        for ad in record.addresses:
            out.append(f"AD  - {_fold_line(ad)}")
        out.append("ER  - ")
        out.append("")
    return "\n".join(out)


def _fold_line(value: str) -> str:
    # RIS is line-oriented; embedded newlines would corrupt the block.
    return " ".join(value.splitlines())


def parse_table(
    text: str,
    column_map: dict[str, str] | None,
    source: SourceTag,
    delimiter: str = ",",
) -> tuple[list[PublicationRecord], IngestReport]:
    """Parse a delimited export whose first line is the header.

    column_map maps header names (case-insensitive) to record fields;
    multi-valued cells (authors, keywords, addresses, cited_refs) split
    on "; ". Rows missing title/authors/year are rejected, not fatal.
    """
    report = IngestReport(source_id=source.source_id)
    records: list[PublicationRecord] = []
    cmap = {k.lower(): v for k, v in (column_map or DEFAULT_COLUMN_MAP).items()}
    for fld in cmap.values():
        if fld not in DEFAULT_COLUMN_MAP:
            raise FormatError(f"column map targets unknown field: {fld}")

    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        return records, report
    field_by_index = {i: cmap[h.strip().lower()] for i, h in enumerate(header) if h.strip().lower() in cmap}

    for rownum, row in enumerate(reader, 2):
        if not row or all(not cell.strip() for cell in row):
            continue
        span = (rownum, rownum)
        cells: dict[str, str] = {}
        for i, cell in enumerate(row):
            fld = field_by_index.get(i)
            if fld and cell.strip():
                cells[fld] = cell.strip()

        problems = []
        if not cells.get("title"):
            problems.append("missing title")
        if not cells.get("authors"):
            problems.append("missing authors")
        year: int | None = None
        if "year" in cells:
            if cells["year"].isdigit():
                year = int(cells["year"])
            else:
                problems.append(f"invalid year: {cells['year']!r}")
        else:
            problems.append("missing year")
        authors: list[AuthorName] = []
        for part in cells.get("authors", "").split("; "):
            part = part.strip()
            if not part:
                continue
            try:
                authors.append(normalize_name(part))
            except ValidationError:
                problems.append(f"invalid author: {part!r}")
        if problems:
            report.records_rejected += 1
            report.violations.append((span, "; ".join(problems)))
            continue

        doc_type = cells.get("doc_type", "article").strip().lower()
        if doc_type not in ("article", "review", "proceedings", "other"):
            doc_type = "other"
        try:
            record = make_record(
                title=cells["title"],
                year=year,  # type: ignore[arg-type]
                authors=authors,
                provenance=[source],
                doi=cells.get("doi"),
                abstract=cells.get("abstract"),
                venue=cells.get("venue"),
                doc_type=doc_type,
                keywords=_split_multi(cells.get("keywords")),
                addresses=_split_multi(cells.get("addresses")),
                cited_refs=_split_multi(cells.get("cited_refs")) if "cited_refs" in cells else None,
            )
        except ValidationError as exc:
            report.records_rejected += 1
            report.violations.append((span, str(exc)))
        else:
            records.append(record)
            report.records_parsed += 1
    return records, report


def _split_multi(cell: str | None) -> list[str]:
    if not cell:
        return []
    return [p.strip() for p in cell.split("; ") if p.strip()]


def profile_from_data(data: dict[str, Any]) -> ResearcherProfile:
    """Build a researcher profile from analyst-friendly JSON data.

    variants may be raw name strings or structured name objects;
    trajectory entries may be raw `years | org | city | country` lines
    or structured objects. seed_ids are folded into accepted_ids.
    """
    variants = []
    for v in data.get("variants", []):
        variants.append(normalize_name(v) if isinstance(v, str) else AuthorName.from_dict(v))
    trajectory = []
    for t in data.get("trajectory", []):
        if isinstance(t, str):
            trajectory.extend(parse_trajectory(t))
        else:
            trajectory.append(AddressKey.from_dict(t))
    seed_ids = frozenset(data.get("seed_ids", []))
    profile = ResearcherProfile(
        variants=tuple(variants),
        trajectory=tuple(trajectory),
        seed_ids=seed_ids,
        accepted_ids=seed_ids | frozenset(data.get("accepted_ids", [])),
        rejected_ids=frozenset(data.get("rejected_ids", [])),
    )
    violations = profile.validate()
    if violations:
        raise ValidationError(violations)
    return profile


def parse_trajectory(text: str) -> list[AddressKey]:
    """Parse a trajectory file: `YYYY-YYYY | organisation | city | CC` lines.

    Years and country are optional; "#" lines are comments. Trajectory
    files are curated by the analyst, so any malformed line raises
    FormatError with its line number.
    """
    keys: list[AddressKey] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = [p.strip() for p in stripped.split("|")]
        if len(parts) < 2 or len(parts) > 4:
            raise FormatError(
                f"trajectory line {lineno}: expected 'years | organisation [| city [| country]]'"
            )
        year_start = year_end = None
        if parts[0]:
            ym = _YEAR_RANGE_RE.match(parts[0])
            if not ym:
                raise FormatError(f"trajectory line {lineno}: bad year range {parts[0]!r}")
            year_start, year_end = int(ym.group(1)), int(ym.group(2))
            if year_start > year_end:
                raise FormatError(f"trajectory line {lineno}: year_start > year_end")
        org_tokens = frozenset(fingerprint_tokens(parts[1])) if parts[1] else frozenset()
        city = None
        if len(parts) > 2 and parts[2]:
            folded = "".join(ch if ch.isalnum() else " " for ch in _normalize_text(parts[2]))
            city = " ".join(folded.split()) or None
        country = None
        if len(parts) > 3 and parts[3]:
            country = parts[3].upper()
            if len(country) != 2 or not country.isalpha():
                raise FormatError(f"trajectory line {lineno}: bad country code {parts[3]!r}")
        if not org_tokens and not city:
            raise FormatError(f"trajectory line {lineno}: organisation or city required")
        keys.append(
            AddressKey(
                org_tokens=org_tokens,
                city=city,
                country=country,
                year_start=year_start,
                year_end=year_end,
                raw=stripped,
            )
        )
    return keys
