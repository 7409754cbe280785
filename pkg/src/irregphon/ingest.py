"""Lexicon, pronunciation and frequency ingestion.

Inputs are UniMorph-style triples (``lemma<TAB>form<TAB>F1;F2``), WikiPron-style
pronunciation dictionaries (``word<TAB>seg seg seg``) and either a frequency
table (``token<TAB>count``) or raw text to be counted.
"""

from __future__ import annotations

import codecs
import logging
import math
from collections import Counter
from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import IO, Union

import numpy as np
import regex

logger = logging.getLogger(__name__)

Segment = str

_LETTER_RUN = regex.compile(r"\p{L}+")
# a run touching the end of a chunk may continue in the next one
_TRAILING_LETTERS = regex.compile(r"\p{L}+\Z")

MAX_ERROR_FRACTION = 0.10


class IngestError(ValueError):
    """Fatal ingestion failure (too many bad records, nothing usable left)."""


class TokenizeError(ValueError):
    def __init__(self, text: str, offset: int):
        self.text = text
        self.offset = offset
        self.substring = text[offset : offset + 1]
        super().__init__(
            f"no inventory segment matches {text!r} at offset {offset} ({self.substring!r})"
        )


@dataclass(frozen=True)
class RecordError:
    source: str
    line: int
    message: str

    def __str__(self) -> str:
        return f"{self.source}:{self.line}: {self.message}"


@dataclass(frozen=True)
class FeatureBundle:
    """An unordered set of morphological feature tags (one paradigm slot)."""

    tags: frozenset[str]

    @classmethod
    def parse(cls, text: str) -> "FeatureBundle":
        return cls(frozenset(t.strip() for t in text.split(";") if t.strip()))

    def __str__(self) -> str:
        return ";".join(sorted(self.tags))

    def __len__(self) -> int:
        return len(self.tags)


@dataclass(frozen=True)
class PhonemeInventory:
    segments: frozenset[Segment]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("phoneme inventory is empty")
        for seg in self.segments:
            if not seg or any(ch.isspace() for ch in seg):
                raise ValueError(f"invalid segment {seg!r}")

    @classmethod
    def from_sequences(cls, seqs: Iterable[Sequence[Segment]]) -> "PhonemeInventory":
        return cls(frozenset(s for seq in seqs for s in seq))

    def __contains__(self, seg: object) -> bool:
        return seg in self.segments

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(sorted(self.segments))


@dataclass(frozen=True)
class LexiconEntry:
    lemma_orth: str
    form_orth: str
    features: FeatureBundle
    lemma_seg: tuple[Segment, ...]
    form_seg: tuple[Segment, ...]
    frequency_count: int

    @property
    def form_key(self) -> str:
        """Word-type key of the surface form (segments joined by spaces)."""
        return " ".join(self.form_seg)


@dataclass
class LanguageLexicon:
    language_id: str
    inventory: PhonemeInventory
    entries: list[LexiconEntry]
    total_corpus_tokens: int
    stage_counts: dict[str, int] = field(default_factory=dict)

    @property
    def lexemes(self) -> dict[str, list[int]]:
        """Entry indices grouped by lemma, in order of first appearance."""
        groups: dict[str, list[int]] = {}
        for i, e in enumerate(self.entries):
            groups.setdefault(e.lemma_orth, []).append(i)
        return groups

    def word_types(self) -> list[tuple[Segment, ...]]:
        """Distinct surface segment sequences, in order of first appearance."""
        seen: dict[tuple[Segment, ...], None] = {}
        for e in self.entries:
            seen.setdefault(e.form_seg, None)
        return list(seen)


@dataclass(frozen=True)
class FrequencyTable:
    counts: Mapping[str, int]
    total: int

    def count(self, form_orth: str) -> int:
        return self.counts.get(form_orth.lower(), 0)


@dataclass(frozen=True)
class FoldAssignment:
    unit_ids: tuple
    fold_of: Mapping[Hashable, int]
    k: int
    seed: int

    def members(self, fold: int) -> list:
        return [u for u in self.unit_ids if self.fold_of[u] == fold]

    def folds(self) -> list[list]:
        out: list[list] = [[] for _ in range(self.k)]
        for u in self.unit_ids:
            out[self.fold_of[u]].append(u)
        return out


def _check_error_rate(errors: list[RecordError], n_lines: int, source: str) -> None:
    for err in errors:
        logger.warning("%s", err)
    if n_lines and len(errors) > MAX_ERROR_FRACTION * n_lines:
        raise IngestError(
            f"{source}: {len(errors)} of {n_lines} lines malformed "
            f"(first: {errors[0]})"
        )


def parse_unimorph(
    tsv_text: str, source: str = "<unimorph>", errors: list[RecordError] | None = None
) -> list[tuple[str, str, FeatureBundle]]:
    """Parse UniMorph triples.

    Malformed lines are collected as :class:`RecordError` (into ``errors`` when
    given) and logged; an :class:`IngestError` is raised only when more than
    10% of the non-blank lines are malformed.
    """
    triples = []
    bad: list[RecordError] = []
    n_lines = 0
    for lineno, line in enumerate(tsv_text.splitlines(), start=1):
        if not line.strip():
            continue
        n_lines += 1
        fields = line.rstrip("\r\n").split("\t")
        if len(fields) < 3:
            bad.append(RecordError(source, lineno, f"expected 3 tab-separated fields, got {len(fields)}"))
            continue
        lemma, form, feats = fields[0].strip(), fields[1].strip(), FeatureBundle.parse(fields[2])
        if not lemma or not form or not feats.tags:
            bad.append(RecordError(source, lineno, "empty lemma, form or feature field"))
            continue
        triples.append((lemma, form, feats))
    if errors is not None:
        errors.extend(bad)
    _check_error_rate(bad, n_lines, source)
    return triples


def parse_pron_dict(
    tsv_text: str, source: str = "<pron>", errors: list[RecordError] | None = None
) -> dict[str, tuple[Segment, ...]]:
    """Parse a WikiPron-style dictionary; the first pronunciation of a word wins."""
    prons: dict[str, tuple[Segment, ...]] = {}
    bad: list[RecordError] = []
    n_lines = 0
    for lineno, line in enumerate(tsv_text.splitlines(), start=1):
        if not line.strip():
            continue
        n_lines += 1
        fields = line.rstrip("\r\n").split("\t")
        if len(fields) < 2 or not fields[0].strip() or not fields[1].split():
            bad.append(RecordError(source, lineno, "expected 'word<TAB>segments'"))
            continue
        word, segs = fields[0].strip(), tuple(fields[1].split())
        if word in prons:
            logger.warning("%s:%d: duplicate pronunciation for %r ignored", source, lineno, word)
            continue
        prons[word] = segs
    if errors is not None:
        errors.extend(bad)
    _check_error_rate(bad, n_lines, source)
    return prons


def parse_freq_table(tsv_text: str, source: str = "<freq>",
                     errors: list[RecordError] | None = None) -> FrequencyTable:
    counts: Counter[str] = Counter()
    bad: list[RecordError] = []
    n_lines = 0
    for lineno, line in enumerate(tsv_text.splitlines(), start=1):
        if not line.strip():
            continue
        n_lines += 1
        fields = line.rstrip("\r\n").split("\t")
        try:
            token, count = fields[0].strip(), int(fields[1])
            if not token or count < 0:
                raise ValueError
        except (IndexError, ValueError):
            bad.append(RecordError(source, lineno, "expected 'token<TAB>non-negative count'"))
            continue
        counts[token.lower()] += count
    if errors is not None:
        errors.extend(bad)
    _check_error_rate(bad, n_lines, source)
    return FrequencyTable(dict(counts), sum(counts.values()))


def tokenize_ipa(s: str, inv: PhonemeInventory | Iterable[Segment]) -> list[Segment]:
    """Segment ``s`` into inventory symbols by greedy longest match."""
    if not s:
        raise ValueError("cannot tokenize an empty string")
    symbols = inv.segments if isinstance(inv, PhonemeInventory) else frozenset(inv)
    max_len = max(len(x) for x in symbols)
    out = []
    i = 0
    while i < len(s):
        for n in range(min(max_len, len(s) - i), 0, -1):
            if s[i : i + n] in symbols:
                out.append(s[i : i + n])
                i += n
                break
        else:
            raise TokenizeError(s, i)
    return out


def transcribe(word: str, table: Mapping[str, str]) -> tuple[Segment, ...]:
    """Apply a grapheme-to-phoneme replacement table by maximal munch.

    Table values are space-separated segment strings; an empty value makes the
    grapheme silent.
    """
    out: list[Segment] = []
    for grapheme in tokenize_ipa(word, table.keys()):
        out.extend(table[grapheme].split())
    return tuple(out)


def parse_g2p_table(tsv_text: str, source: str = "<g2p>") -> dict[str, str]:
    table = {}
    for lineno, line in enumerate(tsv_text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.rstrip("\r\n").split("\t")
        if not fields[0]:
            raise IngestError(f"{source}:{lineno}: empty grapheme")
        table[fields[0]] = fields[1].strip() if len(fields) > 1 else ""
    if not table:
        raise IngestError(f"{source}: empty grapheme table")
    return table


Chunk = Union[bytes, str]


def count_frequencies(stream: IO | Iterable[Chunk], chunk_size: int = 1 << 20) -> FrequencyTable:
    """Count lowercased letter-run tokens in a text stream.

    Accepts a binary or text file object, or any iterable of ``bytes``/``str``
    chunks. Memory use is bounded by the chunk size plus the count table.
    Invalid UTF-8 raises :class:`UnicodeDecodeError`-derived ``IngestError``
    carrying the absolute byte offset.
    """
    if hasattr(stream, "read"):
        chunks: Iterable[Chunk] = iter(lambda: stream.read(chunk_size), stream.read(0))
    else:
        chunks = stream
    decoder = codecs.getincrementaldecoder("utf-8")()
    counts: Counter[str] = Counter()
    carry = ""
    fed = 0
    for chunk in chunks:
        if isinstance(chunk, bytes):
            pending = len(decoder.getstate()[0])
            try:
                text = decoder.decode(chunk)
            except UnicodeDecodeError as exc:
                offset = fed - pending + exc.start
                raise IngestError(f"invalid UTF-8 at byte offset {offset}") from exc
            fed += len(chunk)
        else:
            text = chunk
        text = carry + text
        tail = _TRAILING_LETTERS.search(text)
        carry = tail.group() if tail else ""
        if tail:
            text = text[: tail.start()]
        counts.update(m.group().lower() for m in _LETTER_RUN.finditer(text))
    try:
        rest = decoder.decode(b"", final=True)
    except UnicodeDecodeError as exc:
        raise IngestError(f"invalid UTF-8 at byte offset {fed - len(decoder.getstate()[0]) + exc.start}") from exc
    counts.update(m.group().lower() for m in _LETTER_RUN.finditer(carry + rest))
    return FrequencyTable(dict(counts), sum(counts.values()))


def merge_frequency_tables(tables: Iterable[FrequencyTable]) -> FrequencyTable:
    merged: Counter[str] = Counter()
    for t in tables:
        merged.update(t.counts)
    return FrequencyTable(dict(merged), sum(merged.values()))


def log_cpm(count: int, total: int) -> float:
    """Natural log of counts per million."""
    if count < 1:
        raise ValueError("log_cpm undefined for zero count; exclude zero-frequency forms first")
    if total < count:
        raise ValueError(f"total ({total}) smaller than count ({count})")
    return math.log(count / total * 1e6)


def build_lexicon(
    triples: Iterable[tuple[str, str, FeatureBundle]],
    pron_map: Mapping[str, Sequence[Segment]],
    freq_table: FrequencyTable,
    inv: PhonemeInventory | None = None,
    language_id: str = "",
) -> LanguageLexicon:
    """Join triples with pronunciations and frequencies.

    Entries are dropped when the form or lemma has no pronunciation, when a
    pronunciation uses a segment outside ``inv``, when the form has zero corpus
    frequency, or when the (lemma, slot) pair was already filled by an earlier
    line. With ``inv=None`` the inventory is taken from the pronunciations used.
    """
    triples = list(triples)
    stage = Counter(triples=len(triples))
    joined = []
    for lemma, form, feats in triples:
        form_seg, lemma_seg = pron_map.get(form), pron_map.get(lemma)
        if form_seg is None or lemma_seg is None:
            logger.debug("%s: no pronunciation for %r/%r", language_id, lemma, form)
            stage["no_pron"] += 1
            continue
        if inv is not None and not all(s in inv for s in (*form_seg, *lemma_seg)):
            logger.debug("%s: out-of-inventory segment in %r/%r", language_id, lemma, form)
            stage["out_of_inventory"] += 1
            continue
        count = freq_table.count(form)
        if count == 0:
            stage["zero_frequency"] += 1
            continue
        joined.append(LexiconEntry(lemma, form, feats, tuple(lemma_seg), tuple(form_seg), count))

    entries = []
    filled: set[tuple[str, FeatureBundle]] = set()
    for e in joined:
        slot = (e.lemma_orth, e.features)
        if slot in filled:
            stage["overabundant"] += 1
            continue
        filled.add(slot)
        entries.append(e)

    for reason in ("no_pron", "out_of_inventory", "zero_frequency", "overabundant"):
        if stage[reason]:
            logger.info("%s: dropped %d entries (%s)", language_id or "lexicon", stage[reason], reason)
    if not entries:
        raise IngestError(f"{language_id or 'language'} has no usable entries")
    if inv is None:
        inv = PhonemeInventory.from_sequences(
            seq for e in entries for seq in (e.lemma_seg, e.form_seg)
        )
    stage["entries"] = len(entries)
    stage["lexemes"] = len({e.lemma_orth for e in entries})
    return LanguageLexicon(language_id, inv, entries, freq_table.total, dict(stage))


def split_folds(unit_ids: Sequence[Hashable], k: int, seed: int) -> FoldAssignment:
    """Seeded shuffle of the units followed by round-robin assignment to ``k`` folds."""
    units = tuple(unit_ids)
    if k < 2:
        raise ValueError("need at least 2 folds")
    if len(units) < k:
        raise ValueError(f"{len(units)} units cannot fill {k} folds")
    if len(set(units)) != len(units):
        raise ValueError("unit ids must be unique")
    rng = np.random.default_rng(seed & 0xFFFF_FFFF_FFFF_FFFF)
    order = rng.permutation(len(units))
    fold_of = {units[j]: pos % k for pos, j in enumerate(order)}
    return FoldAssignment(units, fold_of, k, seed)
