"""The 36-symbol gesture alphabet and conversions between text, symbols, and one-hot vectors.

The alphabet has 35 signable symbols (A-Z, the umlauts Ä/Ö/Ü, the multigraph
SCH, and the digits 1-5) plus a trailing OOV class used for padding and
uncertainty. Symbol order is fixed: A..Z (0..25), Ä (26), Ö (27), Ü (28),
SCH (29), 1..5 (30..34), OOV (35).
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

MAX_WORD_LENGTH = 10

SCH = "SCH"
OOV = "OOV"

SYMBOLS: tuple[str, ...] = (
    tuple("ABCDEFGHIJKLMNOPQRSTUVWXYZ") + ("Ä", "Ö", "Ü") + (SCH,) + tuple("12345") + (OOV,)
)
NUM_SYMBOLS = len(SYMBOLS)  # 36
NUM_GESTURES = NUM_SYMBOLS - 1  # 35 signable symbols; OOV is never signed
OOV_INDEX = NUM_SYMBOLS - 1
GESTURES: tuple[str, ...] = SYMBOLS[:NUM_GESTURES]

_INDEX: dict[str, int] = {s: i for i, s in enumerate(SYMBOLS)}
_SINGLE_CHARS = frozenset(s for s in GESTURES if len(s) == 1)


class AlphabetError(ValueError):
    """Base class for alphabet conversion failures."""


class EmptyInputError(AlphabetError):
    """Raised when a word to tokenize is empty."""


class UnsupportedCharacterError(AlphabetError):
    """Raised when a character has no gesture in the alphabet."""


class WordTooLongError(AlphabetError):
    """Raised when a word tokenizes to more than MAX_WORD_LENGTH symbols."""


def index_of(symbol: str) -> int:
    """Index of ``symbol`` in the fixed ordering (A=0 .. OOV=35)."""
    try:
        return _INDEX[symbol]
    except KeyError:
        raise ValueError(f"not an alphabet symbol: {symbol!r}") from None


def symbol_at(index: int) -> str:
    """Inverse of :func:`index_of`."""
    if not 0 <= index < NUM_SYMBOLS:
        raise ValueError(f"symbol index out of range: {index}")
    return SYMBOLS[index]


def scan_symbols(text: str) -> tuple[str, ...]:
    """Greedy left-to-right symbol scan without length checks.

    ``"SCH"`` always maps to the single SCH symbol; every other character
    maps 1:1. Empty input yields an empty tuple.
    """
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        if text.startswith(SCH, i):
            out.append(SCH)
            i += 3
            continue
        ch = text[i]
        if ch not in _SINGLE_CHARS:
            raise UnsupportedCharacterError(f"character {ch!r} has no gesture (in {text!r})")
        out.append(ch)
        i += 1
    return tuple(out)


def tokenize(text: str) -> tuple[str, ...]:
    """Tokenize an uppercase word into a symbol sequence of length 1..10."""
    if not text:
        raise EmptyInputError("cannot tokenize an empty word")
    symbols = scan_symbols(text)
    if len(symbols) > MAX_WORD_LENGTH:
        raise WordTooLongError(f"{text!r} has {len(symbols)} symbols (limit {MAX_WORD_LENGTH})")
    return symbols


def detokenize(symbols: Iterable[str]) -> str:
    """Concatenate a symbol sequence back into a word; SCH renders as ``"SCH"``."""
    parts = tuple(symbols)
    if OOV in parts:
        raise ValueError("OOV cannot be detokenized; it is a padding class")
    return "".join(parts)


def one_hot(symbol: str) -> np.ndarray:
    """Unit vector of length 36 with a 1 at ``index_of(symbol)``."""
    vec = np.zeros(NUM_SYMBOLS)
    vec[index_of(symbol)] = 1.0
    return vec
