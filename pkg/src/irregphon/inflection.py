"""Suffix-rule inflection models, wug-test probabilities and morphological irregularity.

A rule rewrites a lemma ending (``lemma_suffix``) as ``replacement`` for one
feature bundle. Rules are read off training pairs by stripping their longest
common prefix, and generalised by moving up to three more shared segments into
the conditioning suffix. Candidate forms are scored by rule support, weighted
towards rules that condition on longer lemma endings.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .ingest import FeatureBundle, LanguageLexicon, LexiconEntry, Segment, split_folds

logger = logging.getLogger(__name__)

CONTEXT_BASE = 16.0
MAX_EXTRA_CONTEXT = 3
DEFAULT_ALPHA = 0.1
EPSILON = 1e-6
# keeps CONTEXT_BASE ** n inside float range
_MAX_EXPONENT = 240


@dataclass
class TransformRule:
    features: FeatureBundle
    lemma_suffix: tuple[Segment, ...]
    replacement: tuple[Segment, ...]
    support: int = 0
    lexemes: set[str] | None = None

    @property
    def context_len(self) -> int:
        """Number of lemma segments the rule conditions on."""
        return len(self.lemma_suffix)

    @property
    def score(self) -> float:
        return self.support * CONTEXT_BASE ** min(self.context_len, _MAX_EXPONENT)

    def applies(self, lemma: Sequence[Segment]) -> bool:
        n = len(self.lemma_suffix)
        return len(lemma) >= n and tuple(lemma[len(lemma) - n:]) == self.lemma_suffix

    def apply(self, lemma: Sequence[Segment]) -> tuple[Segment, ...]:
        return tuple(lemma[: len(lemma) - len(self.lemma_suffix)]) + self.replacement


def common_prefix_len(a: Sequence, b: Sequence) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


@dataclass
class Inflector:
    """Rules indexed by feature bundle, then by the lemma ending they condition on."""

    rules: dict[FeatureBundle, dict[tuple, dict[tuple, TransformRule]]] = field(default_factory=dict)
    smoothing_alpha: float = DEFAULT_ALPHA
    trained_on: object = None

    @classmethod
    def from_rules(cls, rules: Iterable[TransformRule], **kw) -> "Inflector":
        inf = cls(**kw)
        for r in rules:
            inf.rules.setdefault(r.features, {}).setdefault(r.lemma_suffix, {})[r.replacement] = r
        return inf

    def rules_for(self, features: FeatureBundle) -> list[TransformRule]:
        return [r for by_rep in self.rules.get(features, {}).values() for r in by_rep.values()]

    def applicable(self, lemma: Sequence[Segment], features: FeatureBundle) -> list[TransformRule]:
        index = self.rules.get(features)
        if not index:
            return []
        lemma = tuple(lemma)
        out = []
        for n in range(len(lemma) + 1):
            by_rep = index.get(lemma[len(lemma) - n:])
            if by_rep:
                out.extend(by_rep.values())
        return out

    def candidate_scores(self, lemma: Sequence[Segment],
                         features: FeatureBundle) -> dict[tuple[Segment, ...], float]:
        """Score of each candidate form: the best score among rules producing it."""
        scores: dict[tuple, float] = {}
        for rule in self.applicable(lemma, features):
            cand = rule.apply(lemma)
            scores[cand] = max(scores.get(cand, 0.0), rule.score)
        return scores

    def wug_distribution(self, lemma: Sequence[Segment],
                         features: FeatureBundle) -> dict[tuple[Segment, ...], float]:
        return wug_distribution(self, lemma, features)

    def prob(self, lemma: Sequence[Segment], features: FeatureBundle,
             form: Sequence[Segment]) -> float:
        """Probability of ``form``; forms outside the candidate set get the alpha floor."""
        lemma, form = tuple(lemma), tuple(form)
        scores = self.candidate_scores(lemma, features)
        a = self.smoothing_alpha
        if not scores:
            # the lemma itself is the only candidate; it counts as one unit of score
            return 1.0 if form == lemma else a / (1.0 + 2 * a)
        total = sum(scores.values()) + a * len(scores)
        if form in scores:
            return (scores[form] + a) / total
        return a / (total + a)


def extract_rules(training_entries: Iterable[LexiconEntry], alpha: float = DEFAULT_ALPHA,
                  trained_on=None, track_provenance: bool = False) -> Inflector:
    """Collect suffix rewrite rules (with support counts) from training pairs.

    With ``track_provenance`` every rule records the lemmas that support it.
    """
    inf = Inflector(smoothing_alpha=alpha, trained_on=trained_on)
    n = 0
    for e in training_entries:
        n += 1
        lemma, form = e.lemma_seg, e.form_seg
        p = common_prefix_len(lemma, form)
        for extra in range(min(MAX_EXTRA_CONTEXT, p) + 1):
            suffix, rep = tuple(lemma[p - extra:]), tuple(form[p - extra:])
            by_rep = inf.rules.setdefault(e.features, {}).setdefault(suffix, {})
            rule = by_rep.get(rep)
            if rule is None:
                rule = by_rep[rep] = TransformRule(
                    e.features, suffix, rep, 0, set() if track_provenance else None)
            rule.support += 1
            if track_provenance:
                rule.lexemes.add(e.lemma_orth)
    if n == 0:
        raise ValueError("cannot extract rules from an empty training set")
    return inf


def wug_distribution(inflector: Inflector, lemma_seg: Sequence[Segment],
                     features: FeatureBundle) -> dict[tuple[Segment, ...], float]:
    """Add-alpha smoothed distribution over the candidate forms of ``(lemma, features)``."""
    lemma_seg = tuple(lemma_seg)
    scores = inflector.candidate_scores(lemma_seg, features)
    if not scores:
        return {lemma_seg: 1.0}
    a = inflector.smoothing_alpha
    total = sum(scores.values()) + a * len(scores)
    return {c: (s + a) / total for c, s in sorted(scores.items())}


@dataclass(frozen=True)
class MIRecord:
    form_id: int
    p_correct: float
    mi: float
    fold: int | None = None


@dataclass(frozen=True)
class LemmaMIRecord:
    lemma_id: str
    mi_lemma: float
    n_forms: int


def clamp(p: float, eps: float = EPSILON) -> float:
    return min(max(p, eps), 1.0 - eps)


@dataclass
class LeaveOut:
    probs: list[tuple[int, float]]
    inflectors: list[Inflector]
    folds: object  # FoldAssignment
    fold_of_entry: list[int]


def leave_out_models(lexicon: LanguageLexicon, k: int = 30, seed: int = 0,
                     alpha: float = DEFAULT_ALPHA, track_provenance: bool = False) -> LeaveOut:
    """Wug probabilities of every entry from inflectors trained without its lexeme."""
    lexemes = lexicon.lexemes
    if len(lexemes) < k:
        raise ValueError(f"{len(lexemes)} lexemes cannot fill {k} folds")
    folds = split_folds(list(lexemes), k, seed)
    entry_fold = [folds.fold_of[e.lemma_orth] for e in lexicon.entries]
    inflectors = []
    probs: list[tuple[int, float]] = []
    for f in range(k):
        train = (e for e, g in zip(lexicon.entries, entry_fold) if g != f)
        inflectors.append(extract_rules(train, alpha, trained_on=f,
                                        track_provenance=track_provenance))
    for i, (e, f) in enumerate(zip(lexicon.entries, entry_fold)):
        p = inflectors[f].prob(e.lemma_seg, e.features, e.form_seg)
        probs.append((i, clamp(p)))
    return LeaveOut(probs, inflectors, folds, entry_fold)


def leave_out_probs(lexicon: LanguageLexicon, k: int = 30, seed: int = 0,
                    alpha: float = DEFAULT_ALPHA) -> list[tuple[int, float]]:
    return leave_out_models(lexicon, k, seed, alpha).probs


def mi_word(p_correct: float) -> float:
    """Negative log-odds (base 2) of the correct form."""
    if not 0.0 < p_correct < 1.0:
        raise ValueError(f"p_correct must lie strictly between 0 and 1, got {p_correct}")
    return math.log2(1.0 - p_correct) - math.log2(p_correct)


def mi_lemma(mi_values: Sequence[float]) -> float:
    if len(mi_values) == 0:
        raise ValueError("mean MI of an empty lemma")
    return math.fsum(mi_values) / len(mi_values)


def mi_records(probs: Iterable[tuple[int, float]],
               fold_of_entry: Sequence[int] | None = None) -> list[MIRecord]:
    return [MIRecord(i, p, mi_word(p), fold_of_entry[i] if fold_of_entry else None)
            for i, p in probs]


def lemma_mi_records(lexicon: LanguageLexicon, records: Iterable[MIRecord]) -> list[LemmaMIRecord]:
    by_id = {r.form_id: r.mi for r in records}
    out = []
    for lemma, idx in lexicon.lexemes.items():
        vals = [by_id[i] for i in idx if i in by_id]
        if vals:
            out.append(LemmaMIRecord(lemma, mi_lemma(vals), len(vals)))
    return out


@dataclass(frozen=True)
class GateResult:
    included: bool
    mean: float


def accuracy_gate(p_corrects: Sequence[float], threshold: float = 0.75) -> GateResult:
    """Include a language unless its mean probability of the correct form is below ``threshold``."""
    if len(p_corrects) == 0:
        raise ValueError("accuracy gate needs at least one probability")
    mean = math.fsum(p_corrects) / len(p_corrects)
    return GateResult(mean >= threshold, mean)
