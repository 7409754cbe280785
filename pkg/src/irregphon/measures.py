"""Per-form and per-lemma analysis tables joining MI, PC, length and frequency."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, fields

from .inflection import MIRecord, mi_lemma
from .ingest import LanguageLexicon, log_cpm
from .phonotactics import PCRecord

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MeasureRow:
    language_id: str
    form_id: int
    mi: float
    pc: float
    wl: int
    fr: float
    mean_pc: float
    mean_wl: float
    lemma_id: str = ""
    form: str = ""


@dataclass(frozen=True)
class LemmaMeasureRow:
    language_id: str
    lemma_id: str
    mi: float
    pc: float
    wl: float
    fr: float
    mean_pc: float
    mean_wl: float
    n_forms: int = 0


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def assemble_form_table(lexicon: LanguageLexicon, pc_records: Iterable[PCRecord],
                        mi_records: Iterable[MIRecord]) -> list[MeasureRow]:
    """Inner join of lexicon entries with their PC (by word type) and MI (by entry id)."""
    pc_by_type = {r.form_id: r for r in pc_records}
    mi_by_id = {r.form_id: r for r in mi_records}
    joined = []
    dropped = 0
    for i, e in enumerate(lexicon.entries):
        pc, mi = pc_by_type.get(e.form_key), mi_by_id.get(i)
        if pc is None or mi is None:
            dropped += 1
            continue
        fr = log_cpm(e.frequency_count, lexicon.total_corpus_tokens)
        joined.append((i, e, mi.mi, pc.pc_bits, len(e.form_seg), fr))
    if dropped:
        logger.info("%s: %d forms lack a measure and were dropped", lexicon.language_id, dropped)
    if not joined:
        raise ValueError(f"{lexicon.language_id}: no form has both PC and MI")
    mean_pc = _mean([row[3] for row in joined])
    mean_wl = _mean([row[4] for row in joined])
    return [MeasureRow(lexicon.language_id, i, mi, pc, wl, fr, mean_pc, mean_wl,
                       e.lemma_orth, e.form_orth)
            for i, e, mi, pc, wl, fr in joined]


def assemble_lemma_table(form_table: Sequence[MeasureRow], lexeme_grouping: Mapping[int, str],
                         counts: Mapping[int, int], total: int,
                         forms: Mapping[int, str] | None = None) -> list[LemmaMeasureRow]:
    """Aggregate form rows by lemma.

    MI is the mean form MI, PC and WL are means, and FR is the log counts per
    million of the summed counts of the lemma's distinct surface forms (a form
    filling several slots is counted once). ``forms`` maps form ids to their
    surface strings; without it every row is treated as a distinct form.
    """
    groups: dict[str, list[MeasureRow]] = {}
    for row in form_table:
        lemma = lexeme_grouping[row.form_id]
        groups.setdefault(lemma, []).append(row)
    partial = []
    for lemma, rows in groups.items():
        seen: dict[str, int] = {}
        for r in rows:
            key = forms[r.form_id] if forms is not None else str(r.form_id)
            seen.setdefault(key, counts[r.form_id])
        count = sum(seen.values())
        assert count > 0, f"lemma {lemma!r} has zero aggregate frequency"
        partial.append((rows[0].language_id, lemma, mi_lemma([r.mi for r in rows]),
                        _mean([r.pc for r in rows]), _mean([r.wl for r in rows]),
                        log_cpm(count, total), len(rows)))
    mean_pc = _mean([p[3] for p in partial])
    mean_wl = _mean([p[4] for p in partial])
    return [LemmaMeasureRow(lang, lemma, mi, pc, wl, fr, mean_pc, mean_wl, n)
            for lang, lemma, mi, pc, wl, fr, n in partial]


def lexicon_lemma_table(lexicon: LanguageLexicon, form_table: Sequence[MeasureRow]) -> list[LemmaMeasureRow]:
    entries = lexicon.entries
    return assemble_lemma_table(
        form_table,
        {r.form_id: entries[r.form_id].lemma_orth for r in form_table},
        {r.form_id: entries[r.form_id].frequency_count for r in form_table},
        lexicon.total_corpus_tokens,
        forms={r.form_id: entries[r.form_id].form_orth for r in form_table},
    )


def column_names(row_type) -> list[str]:
    return [f.name for f in fields(row_type)]
