"""Phoneme-level n-gram language models and phonotactic complexity (PC).

PC of a word is its surprisal in bits, including the end-of-word transition,
divided by its length in segments. Scores come from models that never saw the
word: word types are split into folds and each fold is scored by a model
trained on the others.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from typing import Protocol

from .ingest import LanguageLexicon, Segment, split_folds

BOS = "<BOS>"
EOS = "<EOS>"


@dataclass(frozen=True)
class AddK:
    k: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("add-k smoothing needs k > 0")

    @property
    def name(self) -> str:
        return f"add_k:{self.k:g}"


@dataclass(frozen=True)
class WittenBell:
    name = "witten_bell"


Smoothing = AddK | WittenBell


def parse_smoothing(text: str) -> Smoothing:
    """``"witten_bell"`` or ``"add_k"`` / ``"add_k:0.5"``."""
    kind, _, arg = text.strip().partition(":")
    if kind == "witten_bell" and not arg:
        return WittenBell()
    if kind == "add_k":
        return AddK(float(arg) if arg else 1.0)
    raise ValueError(f"unknown smoothing {text!r}")


class SequenceModel(Protocol):
    """Anything that assigns a probability to a segment sequence."""

    def surprisal(self, word: Sequence[Segment]) -> float: ...


class PhonotacticModel:
    """An order-``n`` segment model with add-k or interpolated Witten-Bell smoothing.

    Outcomes are the vocabulary plus ``EOS``. Counts are kept for every order
    up to ``n`` so Witten-Bell can back off to shorter contexts; the lowest
    level interpolates with the uniform distribution, which guarantees a
    nonzero probability for every outcome in every context.
    """

    def __init__(self, vocab: Iterable[Segment], order: int = 4,
                 smoothing: Smoothing = WittenBell(), trained_on=None):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.vocab = frozenset(vocab)
        if not self.vocab:
            raise ValueError("empty vocabulary")
        if BOS in self.vocab or EOS in self.vocab:
            raise ValueError("vocabulary collides with sentinel symbols")
        self.order = order
        self.smoothing = smoothing
        self.trained_on = trained_on
        self.counts: dict[tuple, Counter] = defaultdict(Counter)
        self.training_types: frozenset[tuple[Segment, ...]] = frozenset()
        self._cache: dict[tuple, float] = {}

    @property
    def outcomes(self) -> list[Segment]:
        return sorted(self.vocab) + [EOS]

    def _events(self, word: Sequence[Segment]):
        padded = (BOS,) * (self.order - 1) + tuple(word) + (EOS,)
        for i in range(self.order - 1, len(padded)):
            yield padded[i - self.order + 1 : i], padded[i]

    def fit(self, words: Iterable[Sequence[Segment]]) -> "PhonotacticModel":
        types = set()
        for w in words:
            w = tuple(w)
            bad = [s for s in w if s not in self.vocab]
            if bad:
                raise ValueError(f"segments {bad} not in vocabulary")
            types.add(w)
            for ctx, sym in self._events(w):
                # every suffix of the context, down to the empty one
                for j in range(len(ctx) + 1):
                    self.counts[ctx[j:]][sym] += 1
        self.training_types = frozenset(types) | self.training_types
        self._cache.clear()
        return self

    def prob(self, sym: Segment, ctx: Sequence[Segment]) -> float:
        ctx = tuple(ctx)[-(self.order - 1):] if self.order > 1 else ()
        key = (ctx, sym)
        p = self._cache.get(key)
        if p is None:
            if sym != EOS and sym not in self.vocab:
                raise KeyError(f"segment {sym!r} not in vocabulary")
            if isinstance(self.smoothing, AddK):
                p = self._add_k(sym, ctx)
            else:
                p = self._witten_bell(sym, ctx)
            self._cache[key] = p
        return p

    def _add_k(self, sym, ctx) -> float:
        k = self.smoothing.k
        table = self.counts.get(ctx)
        seen = table[sym] if table else 0
        total = sum(table.values()) if table else 0
        return (seen + k) / (total + k * (len(self.vocab) + 1))

    def _witten_bell(self, sym, ctx) -> float:
        lower = 1.0 / (len(self.vocab) + 1)
        for j in range(len(ctx), -1, -1):
            table = self.counts.get(ctx[j:])
            if not table:
                continue
            total = sum(table.values())
            types = len(table)
            lower = (table[sym] + types * lower) / (total + types)
        return lower

    def distribution(self, ctx: Sequence[Segment]) -> dict[Segment, float]:
        return {s: self.prob(s, ctx) for s in self.outcomes}

    def surprisal(self, word: Sequence[Segment]) -> float:
        return sequence_surprisal(self, word)


def train_ngram(words: Sequence[Sequence[Segment]], order: int = 4,
                smoothing: Smoothing = WittenBell(), vocab: Iterable[Segment] | None = None,
                trained_on=None) -> PhonotacticModel:
    words = [tuple(w) for w in words]
    if not words:
        raise ValueError("cannot train on an empty word list")
    if vocab is None:
        vocab = {s for w in words for s in w}
    return PhonotacticModel(vocab, order, smoothing, trained_on).fit(words)


def sequence_surprisal(m: PhonotacticModel, w: Sequence[Segment]) -> float:
    """Bits: -log2 of the product of all conditionals, including the final EOS."""
    bits = 0.0
    for ctx, sym in m._events(w):
        if sym != EOS and sym not in m.vocab:
            raise KeyError(f"segment {sym!r} not in vocabulary")
        bits -= math.log2(m.prob(sym, ctx))
    return bits


@dataclass(frozen=True)
class PCRecord:
    form_id: str
    pc_bits: float
    surprisal_bits: float
    length: int
    fold: int | None = None


def phonotactic_complexity(m: SequenceModel, w: Sequence[Segment], form_id: str | None = None,
                           fold: int | None = None) -> PCRecord:
    if len(w) < 1:
        raise ValueError("phonotactic complexity is undefined for an empty word")
    bits = m.surprisal(w)
    return PCRecord(form_id if form_id is not None else " ".join(w), bits / len(w), bits, len(w), fold)


Trainer = Callable[[list[tuple[Segment, ...]], frozenset, int], SequenceModel]


@dataclass
class CrossvalPC:
    records: list[PCRecord]
    models: list[SequenceModel]
    folds: object  # FoldAssignment


def crossval_pc_models(lexicon: LanguageLexicon, k: int = 10, seed: int = 0, order: int = 4,
                       smoothing: Smoothing = WittenBell(),
                       trainer: Trainer | None = None) -> CrossvalPC:
    """Held-out PC for every word type, keeping the fold models for auditing."""
    types = lexicon.word_types()
    if len(types) < k:
        raise ValueError(f"{len(types)} word types cannot fill {k} folds")
    folds = split_folds(types, k, seed)
    vocab = lexicon.inventory.segments
    if trainer is None:
        def trainer(words, vocab, fold):
            return train_ngram(words, order, smoothing, vocab=vocab, trained_on=fold)
    by_fold = folds.folds()
    models = []
    scored: dict[tuple, PCRecord] = {}
    for f in range(k):
        train = [w for g, members in enumerate(by_fold) if g != f for w in members]
        model = trainer(train, vocab, f)
        models.append(model)
        for w in by_fold[f]:
            scored[w] = phonotactic_complexity(model, w, fold=f)
    return CrossvalPC([scored[w] for w in types], models, folds)


def crossval_pc(lexicon: LanguageLexicon, k: int = 10, seed: int = 0, order: int = 4,
                smoothing: Smoothing = WittenBell()) -> list[PCRecord]:
    return crossval_pc_models(lexicon, k, seed, order, smoothing).records
