"""Writing-style features over titles/abstracts and a style similarity.

The similarity is a standardized function-word distance (Burrows-style
delta): relative frequencies of a configurable word list, z-scored
against the pooled documents, compared between a candidate document and
the centroid of the author's accepted corpus. It is deliberately simple
evidence — one defensible instantiation of "does this read like the
author" — and is never a sole accept criterion.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Any, Sequence

from .core import DEFAULT_FUNCTION_WORDS, PublistError

PUNCT_CLASSES = ("comma", "semicolon", "colon", "parenthesis", "hyphen")

_PUNCT_CHARS = {
    "comma": (",",),
    "semicolon": (";",),
    "colon": (":",),
    "parenthesis": ("(", ")"),
    "hyphen": ("-",),
}

_SENTENCE_SPLIT_RE = re.compile(r"[.?!](?:\s+|$)")
_WORD_RE = re.compile(r"[^\W\d_]+")


@dataclass(frozen=True)
class StyleVector:
    """Measured style features of one document (title, or title+abstract)."""

    mean_sentence_len: float
    type_token_ratio: float
    punct_per_100: dict[str, float]
    title_flags: dict[str, bool]
    fword_freq: tuple[float, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "mean_sentence_len": self.mean_sentence_len,
            "type_token_ratio": self.type_token_ratio,
            "punct_per_100": {k: self.punct_per_100[k] for k in PUNCT_CLASSES},
            "title_flags": dict(self.title_flags),
            "fword_freq": list(self.fword_freq),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> StyleVector:
        return cls(
            mean_sentence_len=float(d["mean_sentence_len"]),
            type_token_ratio=float(d["type_token_ratio"]),
            punct_per_100=dict(d["punct_per_100"]),
            title_flags=dict(d["title_flags"]),
            fword_freq=tuple(d["fword_freq"]),
        )


@dataclass(frozen=True)
class CorpusStats:
    """Per-function-word mean and population std over a document set."""

    words: tuple[str, ...]
    means: tuple[float, ...]
    stds: tuple[float, ...]
    doc_count: int


def split_sentences(text: str) -> list[str]:
    """Split at '.', '?' or '!' followed by whitespace or end of text."""
    return [s.strip() for s in _SENTENCE_SPLIT_RE.split(text) if s.strip()]


def tokenize(text: str) -> list[str]:
    """Maximal alphabetic runs, lowercased."""
    return [m.group(0).lower() for m in _WORD_RE.finditer(text)]


def _starts_gerund(title: str) -> bool:
    tokens = tokenize(title)
    # Heuristic: leading -ing form of at least five letters.
    return bool(tokens) and len(tokens[0]) >= 5 and tokens[0].endswith("ing")


def style_features(
    title: str,
    abstract: str | None = None,
    function_words: Sequence[str] = DEFAULT_FUNCTION_WORDS,
) -> StyleVector:
    """Compute the style vector of title + abstract (title alone if absent)."""
    text = title if not abstract else f"{title} {abstract}"
    tokens = tokenize(text)
    total = len(tokens)

    sentences = split_sentences(text)
    sentence_lens = [len(tokenize(s)) for s in sentences]
    mean_sentence_len = sum(sentence_lens) / len(sentence_lens) if sentence_lens else 0.0

    ttr = len(set(tokens)) / total if total else 0.0

    punct = {}
    for cls, chars in _PUNCT_CHARS.items():
        count = sum(text.count(ch) for ch in chars)
        punct[cls] = 100.0 * count / total if total else 0.0

    stripped_title = title.strip()
    flags = {
        "has_colon": ":" in stripped_title,
        "is_question": stripped_title.endswith("?"),
        "starts_gerund": _starts_gerund(stripped_title),
    }

    freqs = tuple(
        tokens.count(w) / total if total else 0.0 for w in function_words
    )
    return StyleVector(
        mean_sentence_len=mean_sentence_len,
        type_token_ratio=ttr,
        punct_per_100=punct,
        title_flags=flags,
        fword_freq=freqs,
    )


def corpus_stats(
    docs: Sequence[StyleVector],
    function_words: Sequence[str] = DEFAULT_FUNCTION_WORDS,
) -> CorpusStats:
    """Mean and population standard deviation per function word."""
    if not docs:
        raise PublistError("corpus_stats needs at least one document")
    n = len(docs)
    width = len(function_words)
    means = []
    stds = []
    for i in range(width):
        values = [d.fword_freq[i] for d in docs]
        mean = sum(values) / n
        variance = sum((v - mean) ** 2 for v in values) / n
        means.append(mean)
        stds.append(math.sqrt(variance))
    return CorpusStats(
        words=tuple(function_words),
        means=tuple(means),
        stds=tuple(stds),
        doc_count=n,
    )


def corpus_centroid(
    docs: Sequence[StyleVector],
    function_words: Sequence[str] = DEFAULT_FUNCTION_WORDS,
) -> StyleVector:
    """Field-wise mean document of a corpus (flags left unset)."""
    if not docs:
        raise PublistError("corpus_centroid needs at least one document")
    n = len(docs)
    width = len(function_words)
    return StyleVector(
        mean_sentence_len=sum(d.mean_sentence_len for d in docs) / n,
        type_token_ratio=sum(d.type_token_ratio for d in docs) / n,
        punct_per_100={
            cls: sum(d.punct_per_100[cls] for d in docs) / n for cls in PUNCT_CLASSES
        },
        title_flags={"has_colon": False, "is_question": False, "starts_gerund": False},
        fword_freq=tuple(
            sum(d.fword_freq[i] for d in docs) / n for i in range(width)
        ),
    )


def burrows_delta(doc: StyleVector, centroid: StyleVector, stats: CorpusStats) -> float:
    """Mean |z_doc − z_centroid| over function words with positive spread.

    Zero when the two documents standardize identically, and zero when
    no word varies across the corpus at all.
    """
    diffs = []
    for i, std in enumerate(stats.stds):
        if std <= 0.0:
            continue
        z_doc = (doc.fword_freq[i] - stats.means[i]) / std
        z_cen = (centroid.fword_freq[i] - stats.means[i]) / std
        diffs.append(abs(z_doc - z_cen))
    return sum(diffs) / len(diffs) if diffs else 0.0


def style_score_from_docs(
    candidate: StyleVector,
    corpus: Sequence[StyleVector],
    function_words: Sequence[str] = DEFAULT_FUNCTION_WORDS,
) -> float:
    """1/(1+delta) of the candidate against the corpus centroid.

    Standardization pools the corpus and the candidate; the centroid is
    computed over the corpus alone.
    """
    stats = corpus_stats(list(corpus) + [candidate], function_words)
    centroid = corpus_centroid(corpus, function_words)
    return 1.0 / (1.0 + burrows_delta(candidate, centroid, stats))


def style_evidence(
    candidate: StyleVector,
    corpus: Sequence[StyleVector],
    function_words: Sequence[str] = DEFAULT_FUNCTION_WORDS,
    top_n: int = 5,
) -> list[str]:
    """Human-readable per-word z comparisons, largest divergence first."""
    stats = corpus_stats(list(corpus) + [candidate], function_words)
    centroid = corpus_centroid(corpus, function_words)
    rows = []
    for i, word in enumerate(stats.words):
        if stats.stds[i] <= 0.0:
            continue
        z_doc = (candidate.fword_freq[i] - stats.means[i]) / stats.stds[i]
        z_cen = (centroid.fword_freq[i] - stats.means[i]) / stats.stds[i]
        rows.append((abs(z_doc - z_cen), word, z_doc, z_cen))
    rows.sort(key=lambda r: (-r[0], r[1]))
    return [
        f"style '{word}': doc z {z_doc:+.2f} vs corpus z {z_cen:+.2f}"
        for _, word, z_doc, z_cen in rows[:top_n]
    ]


def load_function_words(text: str) -> tuple[str, ...]:
    """Parse a plain word list: one word per line, '#' comments allowed."""
    words = []
    for line in text.splitlines():
        word = line.strip().lower()
        if word and not word.startswith("#"):
            words.append(word)
    return tuple(dict.fromkeys(words))
