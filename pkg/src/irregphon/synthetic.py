"""Seeded generators for artificial inflectional lexicons.

Used to build the bundled toy corpus and the end-to-end checks. A language has
CV-syllable lemmas, a fixed suffix per paradigm slot, a share of suppletive
lexemes, Zipfian lemma frequencies, and optionally word length tied to
frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CONSONANTS = ["p", "t", "k", "b", "d", "g", "m", "n", "s", "l", "r", "tʃ", "ʃ"]
VOWELS = ["a", "e", "i", "o", "u"]
GRAPHEMES = {"tʃ": "ch", "ʃ": "sh"}


def orthography(segs) -> str:
    return "".join(GRAPHEMES.get(s, s) for s in segs)


@dataclass
class SyntheticLanguage:
    language_id: str
    triples: list[tuple[str, str, str]]
    pron: dict[str, tuple[str, ...]]
    counts: dict[str, int]
    irregular: set[str] = field(default_factory=set)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def unimorph_tsv(self) -> str:
        return "".join(f"{l}\t{f}\t{feats}\n" for l, f, feats in self.triples)

    def pron_tsv(self) -> str:
        return "".join(f"{w}\t{' '.join(s)}\n" for w, s in sorted(self.pron.items()))

    def freq_tsv(self) -> str:
        return "".join(f"{w}\t{c}\n" for w, c in sorted(self.counts.items()) if c > 0)

    def raw_text(self, seed: int = 0, per_line: int = 12) -> str:
        rng = np.random.default_rng(seed)
        tokens = [w for w, c in sorted(self.counts.items()) for _ in range(c)]
        tokens = [tokens[i] for i in rng.permutation(len(tokens))]
        lines = (" ".join(tokens[i:i + per_line]) for i in range(0, len(tokens), per_line))
        return ".\n".join(lines) + ".\n"

    def g2p_tsv(self) -> str:
        rows = [(g, p) for p, g in GRAPHEMES.items()]
        rows += [(s, s) for s in CONSONANTS + VOWELS if s not in GRAPHEMES]
        return "".join(f"{g}\t{p}\n" for g, p in sorted(rows))

    def write(self, directory: Path, freq_mode: str = "tsv", pron_mode: str = "dict") -> dict:
        """Write input files; returns the config block describing them."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        lid = self.language_id
        block = {"id": lid, "unimorph": f"{lid}.unimorph.tsv"}
        (directory / block["unimorph"]).write_text(self.unimorph_tsv(), encoding="utf-8")
        if pron_mode == "dict":
            block["pron"] = f"{lid}.pron.tsv"
            (directory / block["pron"]).write_text(self.pron_tsv(), encoding="utf-8")
        else:
            block["g2p"] = f"{lid}.g2p.tsv"
            (directory / block["g2p"]).write_text(self.g2p_tsv(), encoding="utf-8")
        if freq_mode == "tsv":
            block["freq"] = f"{lid}.freq.tsv"
            (directory / block["freq"]).write_text(self.freq_tsv(), encoding="utf-8")
        else:
            block["raw_text"] = f"{lid}.txt"
            (directory / block["raw_text"]).write_text(self.raw_text(), encoding="utf-8")
        return block


def _random_stem(rng, n_syll: int) -> tuple[str, ...]:
    segs: list[str] = []
    for _ in range(n_syll):
        segs.append(CONSONANTS[rng.integers(len(CONSONANTS))])
        segs.append(VOWELS[rng.integers(len(VOWELS))])
    if rng.random() < 0.4:
        segs.append(CONSONANTS[rng.integers(len(CONSONANTS))])
    return tuple(segs)


def _random_suffix(rng, length: int) -> tuple[str, ...]:
    segs = []
    for i in range(length):
        pool = VOWELS if i % 2 == 0 else CONSONANTS
        segs.append(pool[rng.integers(len(pool))])
    return tuple(segs)


DEFAULT_SLOTS = ("V;PRS;3;SG", "V;PST", "V;PTCP;PST", "V;NFIN;PROG")


def generate_language(
    language_id: str,
    seed: int,
    n_lexemes: int = 120,
    slots: tuple[str, ...] = DEFAULT_SLOTS,
    irregular_rate: float = 0.08,
    irregular_freq_bias: float = 0.0,
    length_freq_coupling: float = 0.0,
    random_inflection: bool = False,
    zero_freq_rate: float = 0.03,
    zipf_s: float = 1.0,
    total_tokens: int = 200_000,
) -> SyntheticLanguage:
    """Generate a lexicon.

    ``irregular_freq_bias`` > 0 makes suppletive lexemes concentrate among the
    frequent lemmas. ``length_freq_coupling`` > 0 makes frequent lemmas
    shorter (stem syllables fall with log frequency). With
    ``random_inflection`` every form gets an arbitrary suffix, so no rule
    generalises.
    """
    rng = np.random.default_rng(seed)
    ranks = np.arange(1, n_lexemes + 1)
    weights = ranks ** -zipf_s * np.exp(rng.normal(0, 0.3, n_lexemes))
    lemma_counts = np.maximum(1, np.round(weights / weights.sum() * total_tokens * 0.5)).astype(int)
    log_f = np.log(lemma_counts)

    suffixes = {slot: _random_suffix(rng, 1 + i % 3) for i, slot in enumerate(slots)}
    slot_share = rng.dirichlet(np.full(len(slots), 4.0))

    if irregular_freq_bias > 0:
        z = (log_f - log_f.mean()) / (log_f.std() or 1.0)
        p_irr = 1 / (1 + np.exp(-(irregular_freq_bias * z + math.log(irregular_rate / (1 - irregular_rate)))))
    else:
        p_irr = np.full(n_lexemes, irregular_rate)
    is_irregular = rng.random(n_lexemes) < p_irr

    lemmas: list[tuple[str, ...]] = []
    seen_orth: set[str] = set()
    for i in range(n_lexemes):
        if length_freq_coupling > 0:
            mean_syll = 4.0 - length_freq_coupling * (log_f[i] - log_f.mean())
            n_syll = int(np.clip(round(mean_syll + rng.normal(0, 0.4)), 1, 8))
        else:
            n_syll = int(rng.integers(1, 4))
        while True:
            stem = _random_stem(rng, n_syll)
            if orthography(stem) not in seen_orth:
                break
        seen_orth.add(orthography(stem))
        lemmas.append(stem)

    triples = []
    pron: dict[str, tuple[str, ...]] = {}
    counts: dict[str, int] = {}
    irregular = set()
    for i, stem in enumerate(lemmas):
        lemma_orth = orthography(stem)
        pron[lemma_orth] = stem
        if is_irregular[i]:
            irregular.add(lemma_orth)
        for j, slot in enumerate(slots):
            if random_inflection:
                form = stem + _random_suffix(rng, int(rng.integers(1, 4)))
            elif is_irregular[i]:
                form = _random_stem(rng, int(rng.integers(1, 3)))
            else:
                form = stem + suffixes[slot]
            form_orth = orthography(form)
            if form_orth in pron and pron[form_orth] != form:
                continue
            pron[form_orth] = form
            triples.append((lemma_orth, form_orth, slot))
            c = int(rng.poisson(lemma_counts[i] * slot_share[j]))
            if rng.random() < zero_freq_rate:
                c = 0
            counts[form_orth] = counts.get(form_orth, 0) + c
    # filler vocabulary so forms are a small part of the corpus
    filler_total = max(total_tokens - sum(counts.values()), 0)
    for k in range(50):
        word = orthography(_random_stem(rng, 5)) + "x"
        counts[word] = counts.get(word, 0) + filler_total // 50
    return SyntheticLanguage(language_id, triples, pron, counts, irregular)


def write_toy_corpus(directory: Path, seed: int = 7) -> Path:
    """Write three toy languages and a config file; returns the config path."""
    import yaml

    directory = Path(directory)
    specs = [
        (generate_language("regulari", seed, n_lexemes=110, irregular_rate=0.06,
                           length_freq_coupling=0.6), "tsv", "dict"),
        (generate_language("suppletia", seed + 1, n_lexemes=120, irregular_rate=0.12,
                           irregular_freq_bias=2.0, length_freq_coupling=0.4,
                           total_tokens=40_000), "raw", "g2p"),
        (generate_language("zipfish", seed + 2, n_lexemes=100, irregular_rate=0.05,
                           length_freq_coupling=1.0), "tsv", "dict"),
    ]
    blocks = [lang.write(directory, freq_mode, pron_mode) for lang, freq_mode, pron_mode in specs]
    config = {
        "seed": 20240101,
        "folds_phon": 10,
        "folds_morph": 30,
        "ngram_order": 4,
        "smoothing": "witten_bell",
        "min_accuracy": 0.75,
        "alpha": 0.05,
        "output_dir": "out",
        "languages": blocks,
    }
    path = directory / "config.yaml"
    path.write_text(yaml.safe_dump(config, sort_keys=False, allow_unicode=True), encoding="utf-8")
    return path
