"""Signature words and their recursive flat ordering.

A word ``(i1, ..., ik)`` with letters in ``1..d`` names one iterated integral.
Words of order ``k + 1`` are listed by appending the last letter ``1..d`` to
the full list of order-``k`` words, so the first letter varies fastest.  In
flat form the position of a word of order ``k`` inside its block is
``sum_l (i_l - 1) * d**(l - 1)``.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

Word = tuple[int, ...]


def word_count(d: int, K: int) -> int:
    """Number of words of orders ``0..K`` over an alphabet of size ``d``."""
    if d < 1:
        raise ValueError(f"alphabet size must be >= 1, got d={d}")
    if K < 0:
        raise ValueError(f"truncation order must be >= 0, got K={K}")
    if d == 1:
        return K + 1
    return (d ** (K + 1) - 1) // (d - 1)


def word_label(word: Word) -> str:
    """Human readable label, ``()`` for the empty word and ``(1,2)`` otherwise."""
    return "(" + ",".join(str(i) for i in word) + ")"


def parse_word(label: str) -> Word:
    """Inverse of :func:`word_label`."""
    text = label.strip()
    if text == "()":
        return ()
    value = ast.literal_eval(text)
    if isinstance(value, int):
        return (value,)
    return tuple(int(i) for i in value)


@dataclass(frozen=True)
class WordIndexing:
    """All words of orders ``0..K`` over ``{1..d}`` in recursive order.

    Parameters
    ----------
    d : int
        Alphabet size (path dimension).
    K : int
        Truncation order.
    """

    d: int
    K: int
    words: tuple[Word, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        words: list[Word] = [()]
        block: list[Word] = [()]
        for _ in range(self.K):
            block = [w + (i,) for i in range(1, self.d + 1) for w in block]
            words.extend(block)
        if len(words) != word_count(self.d, self.K):
            raise AssertionError("word enumeration does not match closed-form count")
        object.__setattr__(self, "words", tuple(words))

    def __len__(self) -> int:
        return len(self.words)

    def __iter__(self):
        return iter(self.words)

    @cached_property
    def position(self) -> dict[Word, int]:
        return {w: n for n, w in enumerate(self.words)}

    def index(self, word: Word) -> int:
        """Flat position of ``word``."""
        try:
            return self.position[tuple(word)]
        except KeyError:
            raise KeyError(f"word {word!r} not in indexing with d={self.d}, K={self.K}") from None

    @cached_property
    def orders(self) -> np.ndarray:
        return np.array([len(w) for w in self.words], dtype=int)

    def block(self, k: int) -> slice:
        """Slice of the flat vector holding order-``k`` words."""
        if not 0 <= k <= self.K:
            raise ValueError(f"order {k} outside 0..{self.K}")
        start = word_count(self.d, k - 1) if k > 0 else 0
        return slice(start, start + self.d**k)

    @property
    def labels(self) -> list[str]:
        return [word_label(w) for w in self.words]


def enumerate_words(d: int, K: int) -> WordIndexing:
    """Enumerate the words of orders ``0..K`` in recursive order.

    Examples
    --------
    >>> len(enumerate_words(2, 4))
    31
    >>> enumerate_words(3, 2).words[4:7]
    ((1, 1), (2, 1), (3, 1))
    """
    if d < 1:
        raise ValueError(f"alphabet size must be >= 1, got d={d}")
    if K < 0:
        raise ValueError(f"truncation order must be >= 0, got K={K}")
    return WordIndexing(int(d), int(K))
