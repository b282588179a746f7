"""Word store with frequency-based priors.

The lexicon is the candidate set for every correction stage: dictionary
lookup confirms words, the statistical corrector searches it for nearby
words, and its frequencies define the word prior. Words are stored
uppercase; ß is folded to SS; anything that does not tokenize into at most
10 alphabet symbols is dropped at load time.

File formats:
  word list  - UTF-8 text, one word per line, blank lines and ``#`` comments ignored
  frequency  - UTF-8 text, one ``word<TAB>count`` record per line
"""

from __future__ import annotations

import os
from typing import Iterable, Mapping

import numpy as np

from . import alphabet


class LexiconError(Exception):
    """Base class for lexicon failures."""


class SourceUnreadableError(LexiconError):
    """A word list or frequency source could not be read or parsed."""


class EmptyLexiconError(LexiconError):
    """No words survived loading."""


class NoWordInRangeError(LexiconError):
    """No stored word satisfies the requested length range."""


def _normalize(word: str) -> str:
    return word.strip().replace("ß", "SS").replace("ẞ", "SS").upper()


def _read_lines(source) -> list[str]:
    if isinstance(source, (str, os.PathLike)):
        try:
            with open(source, encoding="utf-8") as handle:
                return handle.read().splitlines()
        except (OSError, UnicodeDecodeError) as exc:
            raise SourceUnreadableError(f"cannot read {source}: {exc}") from exc
    return [str(line) for line in source]


def _parse_frequencies(source) -> dict[str, int]:
    counts: dict[str, int] = {}
    for lineno, raw in enumerate(_read_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        word, sep, count_text = line.partition("\t")
        if not sep:
            raise SourceUnreadableError(f"frequency line {lineno} has no TAB: {raw!r}")
        try:
            count = int(count_text)
        except ValueError:
            raise SourceUnreadableError(
                f"frequency line {lineno} has a non-integer count: {raw!r}"
            ) from None
        if count < 0:
            raise SourceUnreadableError(f"frequency line {lineno} has a negative count: {raw!r}")
        counts[_normalize(word)] = counts.get(_normalize(word), 0) + count
    return counts


class Lexicon:
    """Immutable word -> count table with derived priors."""

    def __init__(self, entries: Mapping[str, int], dropped_count: int = 0):
        self._entries = dict(entries)
        self._words = tuple(sorted(self._entries))
        self._lengths = tuple(len(alphabet.tokenize(w)) for w in self._words)
        self.total_count = sum(self._entries.values())
        self.dropped_count = dropped_count
        if not self._entries:
            raise EmptyLexiconError("lexicon has no entries")

    @classmethod
    def load(cls, word_source, frequency_source=None) -> "Lexicon":
        """Build a lexicon from a word list and an optional frequency table.

        ``word_source`` and ``frequency_source`` may be file paths or
        iterables of lines. Words missing from the frequency table get
        count 1, as does every word when no table is given.
        """
        frequencies = _parse_frequencies(frequency_source) if frequency_source is not None else {}
        entries: dict[str, int] = {}
        dropped = 0
        for raw in _read_lines(word_source):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            word = _normalize(line)
            try:
                alphabet.tokenize(word)
            except alphabet.AlphabetError:
                dropped += 1
                continue
            entries[word] = entries.get(word, 0) + frequencies.get(word, 1)
        if not entries:
            raise EmptyLexiconError("no words survived loading")
        return cls(entries, dropped_count=dropped)

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "Lexicon":
        """Build directly from already-normalized word -> count pairs."""
        return cls(counts)

    def __contains__(self, word: str) -> bool:
        return self.contains(word)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, Lexicon) and self._entries == other._entries

    def contains(self, word: str) -> bool:
        """True iff ``word`` (uppercased) is an entry."""
        return word.upper() in self._entries

    def count(self, word: str) -> int:
        return self._entries.get(word.upper(), 0)

    def prior(self, word: str) -> float:
        """count(word) / total_count; 0 for unknown words (no smoothing)."""
        return self._entries.get(word.upper(), 0) / self.total_count

    def words(self) -> tuple[str, ...]:
        """All entries in sorted order."""
        return self._words

    def items(self) -> Iterable[tuple[str, int]]:
        return ((w, self._entries[w]) for w in self._words)

    def sample_word(self, rng: np.random.Generator, length_range: tuple[int, int] | None = None) -> str:
        """Uniform sample over entries, optionally restricted by symbol count.

        Uniform over qualifying words, not frequency-weighted; deterministic
        given the generator state.
        """
        if length_range is None:
            pool = self._words
        else:
            lo, hi = length_range
            pool = tuple(
                w for w, n in zip(self._words, self._lengths) if lo <= n <= hi
            )
            if not pool:
                raise NoWordInRangeError(f"no word with symbol count in [{lo}, {hi}]")
        return pool[int(rng.integers(len(pool)))]

    def without(self, words: Iterable[str]) -> "Lexicon":
        """Copy with the given words removed (for train/eval splits)."""
        excluded = {w.upper() for w in words}
        remaining = {w: c for w, c in self._entries.items() if w not in excluded}
        if not remaining:
            raise EmptyLexiconError("removing the given words empties the lexicon")
        return Lexicon(remaining, dropped_count=self.dropped_count)


def default_word_list_path() -> str:
    """Path of the bundled German word list."""
    return os.path.join(os.path.dirname(__file__), "data", "german_words.txt")


def default_frequency_path() -> str:
    """Path of the bundled German word frequency table."""
    return os.path.join(os.path.dirname(__file__), "data", "german_word_frequencies.tsv")


def load_default() -> Lexicon:
    """Load the bundled German lexicon with its frequency table."""
    return Lexicon.load(default_word_list_path(), default_frequency_path())
