"""Edit distance, bounded edit candidates, and prior-weighted word correction.

All edits operate on gesture-symbol sequences, so SCH counts as a single
edit unit. Distances use unit-cost substitution, insertion, and deletion
only (no transposition edit); transposed letters are still reachable at
distance 2.
"""

from __future__ import annotations

from itertools import combinations
from typing import Iterator, Sequence

from . import alphabet
from .lexicon import Lexicon

Symbols = tuple[str, ...]


def _as_symbols(word) -> Symbols:
    if isinstance(word, str):
        return alphabet.scan_symbols(word)
    return tuple(word)


def levenshtein(a, b) -> int:
    """Unit-cost edit distance between two words or symbol sequences."""
    sa, sb = _as_symbols(a), _as_symbols(b)
    if len(sa) < len(sb):
        sa, sb = sb, sa
    previous = list(range(len(sb) + 1))
    for i, sym_a in enumerate(sa, start=1):
        current = [i]
        for j, sym_b in enumerate(sb, start=1):
            cost = 0 if sym_a == sym_b else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def _raw_edits(symbols: Symbols) -> Iterator[Symbols]:
    """Every deletion, replacement, and insertion, duplicates included.

    For a word of n symbols this yields exactly n + 35*n + 35*(n+1)
    sequences over the 35 signable symbols.
    """
    n = len(symbols)
    for i in range(n):
        yield symbols[:i] + symbols[i + 1 :]
    for i in range(n):
        for g in alphabet.GESTURES:
            yield symbols[:i] + (g,) + symbols[i + 1 :]
    for i in range(n + 1):
        for g in alphabet.GESTURES:
            yield symbols[:i] + (g,) + symbols[i:]


def edits_within_1(word) -> set[str]:
    """The exact set {v : levenshtein(word, v) <= 1} over the 35-symbol alphabet.

    The distance filter is not redundant: an edited sequence such as
    (S, C, H) renders as "SCH", which re-tokenizes to the single SCH symbol
    and may sit at distance 2 from the input.
    """
    symbols = _as_symbols(word)
    if not symbols:
        raise ValueError("edits_within_1 needs a non-empty word")
    rendered = {alphabet.detokenize(seq) for seq in _raw_edits(symbols)}
    return {v for v in rendered if levenshtein(symbols, v) <= 1}


def candidates(word: str, lexicon: Lexicon, max_distance: int = 2) -> list[tuple[str, int]]:
    """Lexicon candidates from the first non-empty edit-distance stage.

    Stage 0 is the word itself; stage 1 the lexicon words at distance
    exactly 1; stage 2 those at distance exactly 2, found by editing each
    once-edited sequence again and keeping the exact distance. Returns
    (word, distance) pairs sorted by word.
    """
    w = word.upper()
    if lexicon.contains(w):
        return [(w, 0)]
    if max_distance < 1:
        return []
    symbols = _as_symbols(w)
    once = set(_raw_edits(symbols))
    rendered_once = {alphabet.detokenize(seq) for seq in once}
    hits = sorted(
        v for v in rendered_once if lexicon.contains(v) and levenshtein(symbols, v) == 1
    )
    if hits:
        return [(v, 1) for v in hits]
    if max_distance < 2:
        return []
    rendered_twice = set(rendered_once)
    for seq in once:
        if seq:
            rendered_twice.update(alphabet.detokenize(e) for e in _raw_edits(seq))
    hits = sorted(
        v for v in rendered_twice if lexicon.contains(v) and levenshtein(symbols, v) == 2
    )
    return [(v, 2) for v in hits]


def _best_candidate(pairs: Sequence[tuple[str, int]], lexicon: Lexicon) -> str | None:
    if not pairs:
        return None
    return min(pairs, key=lambda pair: (-lexicon.prior(pair[0]), pair[0]))[0]


def norvig_correct(word: str, lexicon: Lexicon, max_distance: int = 2) -> str:
    """Most probable lexicon word within ``max_distance`` edits, else the input.

    Distance-1 candidates always beat distance-2 candidates regardless of
    prior; ties on prior break to the lexicographically smaller word.
    """
    best = _best_candidate(candidates(word, lexicon, max_distance), lexicon)
    return word.upper() if best is None else best


def _deletions(symbols: Symbols, depth: int) -> set[Symbols]:
    out = {symbols}
    n = len(symbols)
    for d in range(1, min(depth, n) + 1):
        for dropped in combinations(range(n), d):
            kept = tuple(s for i, s in enumerate(symbols) if i not in dropped)
            out.add(kept)
    return out


class NorvigCorrector:
    """Indexed corrector equivalent to :func:`norvig_correct`.

    Precomputes a deletion-signature index over the lexicon (built lazily on
    first use) so candidate lookup is a handful of dictionary probes instead
    of an enumeration of every edited string. Two sequences within edit
    distance d always share a signature after at most d deletions per side,
    so the probe set covers the full candidate ball; exact distances are
    re-checked afterwards. Results are identical to the enumeration.
    """

    def __init__(self, lexicon: Lexicon, max_distance: int = 2):
        if max_distance not in (1, 2):
            raise ValueError("max_distance must be 1 or 2")
        self.lexicon = lexicon
        self.max_distance = max_distance
        self._index: dict[Symbols, list[str]] | None = None

    def _build_index(self) -> dict[Symbols, list[str]]:
        index: dict[Symbols, list[str]] = {}
        for word in self.lexicon.words():
            symbols = alphabet.tokenize(word)
            for key in _deletions(symbols, self.max_distance):
                index.setdefault(key, []).append(word)
        return index

    def candidates(self, word: str) -> list[tuple[str, int]]:
        w = word.upper()
        if self.lexicon.contains(w):
            return [(w, 0)]
        if self._index is None:
            self._index = self._build_index()
        symbols = _as_symbols(w)
        pool: set[str] = set()
        for key in _deletions(symbols, self.max_distance):
            pool.update(self._index.get(key, ()))
        by_distance: dict[int, list[str]] = {}
        for candidate in pool:
            dist = levenshtein(symbols, alphabet.tokenize(candidate))
            if dist <= self.max_distance:
                by_distance.setdefault(dist, []).append(candidate)
        for dist in range(1, self.max_distance + 1):
            if by_distance.get(dist):
                return [(v, dist) for v in sorted(by_distance[dist])]
        return []

    def correct(self, word: str) -> str:
        best = _best_candidate(self.candidates(word), self.lexicon)
        return word.upper() if best is None else best
