from __future__ import annotations

import io
import math
from collections import Counter

import pytest
import regex
from hypothesis import given, settings
from hypothesis import strategies as st

from irregphon.ingest import (FeatureBundle, FrequencyTable, IngestError, PhonemeInventory,
                              RecordError, TokenizeError, build_lexicon, count_frequencies,
                              log_cpm, merge_frequency_tables, parse_freq_table, parse_pron_dict,
                              parse_unimorph, split_folds, tokenize_ipa, transcribe)


def fb(text):
    return FeatureBundle.parse(text)


class TestParseUnimorph:
    def test_single_triple(self):
        assert parse_unimorph("walk\twalked\tV;PST") == [("walk", "walked", fb("V;PST"))]

    def test_features_trimmed_and_unordered(self):
        [(_, _, feats)] = parse_unimorph("walk\twalked\t PST ; V ")
        assert feats == fb("V;PST")
        assert feats.tags == frozenset({"V", "PST"})

    def test_empty_and_blank_lines(self):
        assert parse_unimorph("") == []
        assert len(parse_unimorph("\n\na\tb\tV\n\n")) == 1

    def test_too_few_fields_reports_line(self):
        errors: list[RecordError] = []
        with pytest.raises(IngestError):
            parse_unimorph("walk\twalked", source="x.tsv", errors=errors)
        assert errors[0].line == 1 and errors[0].source == "x.tsv"

    def test_sparse_errors_are_not_fatal(self):
        good = "".join(f"l{i}\tf{i}\tV;PST\n" for i in range(20))
        errors: list[RecordError] = []
        triples = parse_unimorph(good + "broken\n", errors=errors)
        assert len(triples) == 20
        assert [e.line for e in errors] == [21]


class TestParsePronDict:
    def test_basic(self):
        assert parse_pron_dict("cat\tk æ t") == {"cat": ("k", "æ", "t")}

    def test_first_wins(self, caplog):
        assert parse_pron_dict("a\tɑ\na\teɪ") == {"a": ("ɑ",)}
        assert "duplicate" in caplog.text

    def test_missing_tab(self):
        errors: list[RecordError] = []
        with pytest.raises(IngestError):
            parse_pron_dict("cat", errors=errors)
        assert errors[0].line == 1


def test_parse_freq_table_lowercases_and_sums():
    t = parse_freq_table("The\t3\nthe\t2\ncat\t1\n")
    assert t.counts == {"the": 5, "cat": 1} and t.total == 6
    assert t.count("THE") == 5


class TestTokenizeIPA:
    def test_single_codepoints(self):
        assert tokenize_ipa("abc", PhonemeInventory(frozenset("abc"))) == ["a", "b", "c"]

    def test_maximal_munch(self):
        assert tokenize_ipa("tʃat", PhonemeInventory(frozenset({"tʃ", "t", "a"}))) == ["tʃ", "a", "t"]

    def test_unknown_symbol(self):
        with pytest.raises(TokenizeError) as info:
            tokenize_ipa("ax", PhonemeInventory(frozenset({"a"})))
        assert info.value.offset == 1 and info.value.substring == "x"

    @given(st.lists(st.sampled_from(["a", "b", "tʃ", "t", "ʃ", "aː"]), min_size=1, max_size=20))
    def test_round_trip(self, segs):
        inv = PhonemeInventory(frozenset({"a", "b", "tʃ", "t", "ʃ", "aː"}))
        s = "".join(segs)
        assert "".join(tokenize_ipa(s, inv)) == s


def test_transcribe_multichar_graphemes():
    table = {"ch": "tʃ", "c": "k", "a": "a", "x": ""}
    assert transcribe("chacx", table) == ("tʃ", "a", "k")


class TestCountFrequencies:
    def test_examples(self):
        t = count_frequencies([b"The cat the."])
        assert t.counts == {"the": 2, "cat": 1} and t.total == 3
        assert count_frequencies([b""]).counts == {} and count_frequencies([b""]).total == 0
        t = count_frequencies(io.BytesIO(b"a b a b a"))
        assert t.counts == {"a": 3, "b": 2} and t.total == 5

    def test_unicode_letters_and_digits(self):
        t = count_frequencies(["Über über 42 naïve-naïve"])
        assert t.counts == {"über": 2, "naïve": 2}

    def test_invalid_utf8_offset(self):
        with pytest.raises(IngestError, match="offset 4"):
            count_frequencies(io.BytesIO(b"abc \xff def"), chunk_size=2)

    def test_split_multibyte_character(self):
        data = "ça ça".encode()
        chunks = [data[i:i + 1] for i in range(len(data))]
        assert count_frequencies(chunks).counts == {"ça": 2}

    @settings(max_examples=60)
    @given(st.text(alphabet="abç .\n", max_size=80), st.integers(1, 9))
    def test_chunking_invariance(self, text, chunk_size):
        data = text.encode()
        whole = count_frequencies([data])
        chunked = count_frequencies(io.BytesIO(data), chunk_size=chunk_size)
        assert chunked == whole
        oracle = Counter(m.lower() for m in regex.findall(r"\p{L}+", text))
        assert whole.counts == dict(oracle)

    @settings(max_examples=60)
    @given(st.text(alphabet="abC .", max_size=40), st.text(alphabet="abC .", max_size=40))
    def test_linearity(self, a, b):
        # A and B are joined at a token boundary
        joined = count_frequencies([a + " " + b])
        merged = merge_frequency_tables([count_frequencies([a]), count_frequencies([b])])
        assert joined == merged


class TestLogCpm:
    def test_examples(self):
        assert log_cpm(1000, 1_000_000) == pytest.approx(math.log(1000), abs=1e-12)
        assert log_cpm(1, 1_000_000) == 0.0
        assert log_cpm(5, 2_000_000) == pytest.approx(0.9163, abs=1e-4)

    def test_zero_count(self):
        with pytest.raises(ValueError):
            log_cpm(0, 10)

    @given(st.integers(1, 10**6), st.integers(1, 10**6))
    def test_monotone(self, c, extra):
        total = 2 * 10**6
        assert log_cpm(c, total) < log_cpm(c + extra, total)


class TestBuildLexicon:
    pron = {"walk": ("w", "ɔ", "k"), "walked": ("w", "ɔ", "k", "t"), "go": ("g", "o")}

    def test_join(self):
        lex = build_lexicon([("walk", "walked", fb("V;PST"))], self.pron,
                            FrequencyTable({"walked": 12}, 100))
        [e] = lex.entries
        assert e.frequency_count == 12 and e.form_seg == ("w", "ɔ", "k", "t")
        assert lex.lexemes == {"walk": [0]}

    def test_zero_frequency_dropped(self):
        triples = [("walk", "walked", fb("V;PST")), ("walk", "walk", fb("V;PRS"))]
        lex = build_lexicon(triples, self.pron, FrequencyTable({"walked": 0, "walk": 3}, 3))
        assert [e.form_orth for e in lex.entries] == ["walk"]
        assert lex.stage_counts["zero_frequency"] == 1

    def test_missing_pronunciation(self):
        triples = [("go", "went", fb("V;PST")), ("walk", "walked", fb("V;PST"))]
        lex = build_lexicon(triples, self.pron, FrequencyTable({"went": 5, "walked": 1}, 6))
        assert len(lex.entries) == 1 and lex.stage_counts["no_pron"] == 1

    def test_out_of_inventory(self):
        inv = PhonemeInventory(frozenset({"w", "ɔ", "k"}))
        with pytest.raises(IngestError, match="no usable entries"):
            build_lexicon([("walk", "walked", fb("V;PST"))], self.pron,
                          FrequencyTable({"walked": 1}, 1), inv)

    def test_overabundant_first_wins(self):
        pron = dict(self.pron, walkt=("w", "ɔ", "k", "t"))
        triples = [("walk", "walked", fb("V;PST")), ("walk", "walkt", fb("PST;V"))]
        lex = build_lexicon(triples, pron, FrequencyTable({"walked": 1, "walkt": 1}, 2))
        assert [e.form_orth for e in lex.entries] == ["walked"]

    @given(st.lists(st.tuples(st.sampled_from(["a", "b", "c"]), st.sampled_from(["ax", "bx", "cy", "q"]),
                              st.sampled_from(["V", "N", "V;PST"]), st.integers(0, 3)), min_size=1, max_size=12))
    def test_never_emits_zero_frequency_or_foreign_segments(self, rows):
        pron = {"a": ("a",), "b": ("b",), "c": ("c",), "ax": ("a", "x"), "bx": ("b", "x"), "cy": ("c", "y")}
        inv = PhonemeInventory(frozenset({"a", "b", "c", "x"}))
        counts = {}
        for _, form, _, c in rows:
            counts.setdefault(form, c)
        try:
            lex = build_lexicon([(l, f, fb(t)) for l, f, t, _ in rows], pron,
                                FrequencyTable(counts, sum(counts.values()) or 1), inv)
        except IngestError:
            return
        for e in lex.entries:
            assert e.frequency_count >= 1
            assert all(s in inv for s in e.form_seg + e.lemma_seg)
        grouped = sorted(i for idx in lex.lexemes.values() for i in idx)
        assert grouped == list(range(len(lex.entries)))


class TestSplitFolds:
    def test_one_per_fold(self):
        fa = split_folds(list(range(10)), 10, 1)
        assert sorted(len(f) for f in fa.folds()) == [1] * 10

    def test_balanced(self):
        assert sorted(len(f) for f in split_folds("abcdefg", 3, 5).folds()) == [2, 2, 3]

    def test_deterministic(self):
        assert split_folds(range(50), 7, 99).fold_of == split_folds(range(50), 7, 99).fold_of

    def test_errors(self):
        with pytest.raises(ValueError):
            split_folds([1, 2], 3, 0)
        with pytest.raises(ValueError):
            split_folds([1, 2, 3], 1, 0)

    @given(st.integers(2, 200), st.integers(2, 40), st.integers(0, 2**64 - 1))
    def test_partition(self, n, k, seed):
        if n < k:
            return
        fa = split_folds(list(range(n)), k, seed)
        folds = fa.folds()
        assert sorted(u for f in folds for u in f) == list(range(n))
        sizes = [len(f) for f in folds]
        assert max(sizes) - min(sizes) <= 1
