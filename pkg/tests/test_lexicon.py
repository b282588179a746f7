import numpy as np
import pytest

from softspell import alphabet
from softspell.lexicon import (
    EmptyLexiconError,
    Lexicon,
    NoWordInRangeError,
    SourceUnreadableError,
    load_default,
)


def test_uniform_fallback_priors():
    lex = Lexicon.load(["sage", "lud", "nimm"])
    assert len(lex) == 3
    for w in ("SAGE", "LUD", "NIMM"):
        assert lex.prior(w) == pytest.approx(1 / 3)


def test_frequency_weighted_priors():
    lex = Lexicon.load(["sage", "lud"], ["SAGE\t10", "LUD\t30"])
    assert lex.prior("LUD") == 0.75
    assert lex.prior("SAGE") == 0.25


def test_sole_overlong_word_gives_empty_lexicon():
    with pytest.raises(EmptyLexiconError):
        Lexicon.load(["abcdefghijk"])


def test_overlong_and_invalid_words_are_dropped_and_counted():
    lex = Lexicon.load(["sage", "abcdefghijk", "na-ja", "lud"])
    assert sorted(lex.words()) == ["LUD", "SAGE"]
    assert lex.dropped_count == 2


def test_eszett_folds_to_ss():
    lex = Lexicon.load(["straße"])
    assert lex.contains("STRASSE")


def test_file_loading_ignores_comments_and_blanks(tmp_path):
    words = tmp_path / "words.txt"
    words.write_text("# header\n\nsage\nlud\n# trailing\n", encoding="utf-8")
    freq = tmp_path / "freq.tsv"
    freq.write_text("SAGE\t10\nLUD\t30\nUNLISTED\t99\n", encoding="utf-8")
    lex = Lexicon.load(words, freq)
    assert len(lex) == 2
    assert lex.total_count == 40


def test_word_missing_from_frequency_table_gets_count_one():
    lex = Lexicon.load(["sage", "lud"], ["SAGE\t9"])
    assert lex.count("LUD") == 1
    assert lex.total_count == 10


def test_unreadable_sources(tmp_path):
    with pytest.raises(SourceUnreadableError):
        Lexicon.load(tmp_path / "missing.txt")
    with pytest.raises(SourceUnreadableError):
        Lexicon.load(["sage"], ["SAGE 10"])  # no TAB
    with pytest.raises(SourceUnreadableError):
        Lexicon.load(["sage"], ["SAGE\tmany"])  # non-integer count


def test_load_is_idempotent(tmp_path):
    words = tmp_path / "words.txt"
    words.write_text("sage\nlud\nnimm\n", encoding="utf-8")
    first = Lexicon.load(words)
    second = Lexicon.load(words)
    assert first == second
    assert first.total_count == second.total_count


def test_contains():
    lex = Lexicon.load(["sage", "lud"])
    assert lex.contains("SAGE")
    assert "SAGE" in lex
    assert not lex.contains("SEAGE")
    assert not lex.contains("")


def test_priors_sum_to_one():
    lex = Lexicon.load(["sage", "lud", "nimm"], ["SAGE\t17", "LUD\t3", "NIMM\t5"])
    assert abs(sum(lex.prior(w) for w in lex.words()) - 1.0) < 1e-12


def test_prior_of_unknown_word_is_zero():
    lex = Lexicon.load(["sage"])
    assert lex.prior("LUD") == 0.0
    assert lex.prior("SAGE") == 1.0


def test_sample_word():
    only = Lexicon.load(["sage"])
    assert only.sample_word(np.random.default_rng(0)) == "SAGE"
    lex = Lexicon.load(["sage", "lud"])
    assert lex.sample_word(np.random.default_rng(0), length_range=(3, 3)) == "LUD"
    with pytest.raises(NoWordInRangeError):
        lex.sample_word(np.random.default_rng(0), length_range=(9, 10))


def test_sample_word_is_deterministic():
    lex = Lexicon.load(["sage", "lud", "nimm", "liste", "menge"])
    a = [lex.sample_word(np.random.default_rng(42)) for _ in range(5)]
    b = [lex.sample_word(np.random.default_rng(42)) for _ in range(5)]
    assert a == b


def test_sample_word_length_range_counts_symbols():
    lex = Lexicon.load(["schuh", "abcde"])  # SCHUH = 3 symbols, ABCDE = 5
    assert lex.sample_word(np.random.default_rng(0), length_range=(3, 3)) == "SCHUH"


def test_without():
    lex = Lexicon.load(["sage", "lud", "nimm"])
    smaller = lex.without(["SAGE"])
    assert not smaller.contains("SAGE")
    assert smaller.contains("LUD")
    with pytest.raises(EmptyLexiconError):
        lex.without(lex.words())


def test_bundled_lexicon():
    lex = load_default()
    assert len(lex) >= 2500
    assert lex.dropped_count == 0
    assert lex.contains("SCHULE")
    # every stored word tokenizes and survives a round trip
    for w in lex.words():
        assert alphabet.detokenize(alphabet.tokenize(w)) == w
    assert abs(sum(lex.prior(w) for w in lex.words()) - 1.0) < 1e-12
