"""Finite words over the alphabet {0, ..., b-1} and their b-adic intervals.

A word of length n indexes both a node at depth n of the b-ary tree and the
closed interval ``[sum_k w_k b^-k, sum_k w_k b^-k + b^-n]``. Interval
endpoints are kept as exact integers over the common denominator ``b**n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .errors import InputError, ResourceError

#: Largest number of words (or tree leaves) any single level may hold.
MAX_NODES = 2**24

_DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"


def check_size(b: int, n: int, cap: int = MAX_NODES) -> int:
    """Return ``b**n`` or raise :class:`ResourceError` if it exceeds *cap*."""
    if b < 2:
        raise InputError(f"base must be >= 2, got {b}")
    if n < 0:
        raise InputError(f"depth must be >= 0, got {n}")
    size = b**n
    if size > cap:
        raise ResourceError(f"{b}**{n} = {size} nodes exceeds the cap of {cap}")
    return size


class Interval(NamedTuple):
    """Closed interval ``[lo_num/den, hi_num/den]``."""

    lo_num: int
    hi_num: int
    den: int

    @property
    def lo(self) -> Fraction:
        return Fraction(self.lo_num, self.den)

    @property
    def hi(self) -> Fraction:
        return Fraction(self.hi_num, self.den)

    def contains(self, other: Interval) -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


@dataclass(frozen=True)
class Word:
    digits: tuple[int, ...]
    base: int

    def __post_init__(self):
        if self.base < 2:
            raise InputError(f"base must be >= 2, got {self.base}")
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))
        for d in self.digits:
            if not 0 <= d < self.base:
                raise InputError(f"digit {d} outside [0, {self.base})")

    @classmethod
    def parse(cls, text: str, base: int) -> Word:
        """Parse the digit-string form; the empty string is the empty word."""
        if base > len(_DIGITS):
            raise InputError(f"string form supports base <= {len(_DIGITS)}")
        try:
            digits = tuple(_DIGITS.index(ch) for ch in text.lower())
        except ValueError:
            raise InputError(f"invalid digit string {text!r}") from None
        return cls(digits, base)

    @classmethod
    def from_rank(cls, rank: int, length: int, base: int) -> Word:
        """Word of the given length whose lexicographic index is *rank*."""
        if not 0 <= rank < base**length:
            raise InputError(f"rank {rank} out of range for length {length}")
        digits = []
        for _ in range(length):
            rank, d = divmod(rank, base)
            digits.append(d)
        return cls(tuple(reversed(digits)), base)

    def __len__(self) -> int:
        return len(self.digits)

    def __str__(self) -> str:
        if self.base > len(_DIGITS):
            raise InputError(f"string form supports base <= {len(_DIGITS)}")
        return "".join(_DIGITS[d] for d in self.digits)

    @property
    def rank(self) -> int:
        """Lexicographic index among the words of the same length."""
        r = 0
        for d in self.digits:
            r = r * self.base + d
        return r

    def prefix(self, k: int) -> Word:
        if not 0 <= k <= len(self):
            raise InputError(f"prefix length {k} outside [0, {len(self)}]")
        return Word(self.digits[:k], self.base)

    def child(self, digit: int) -> Word:
        return Word(self.digits + (digit,), self.base)

    def interval(self) -> Interval:
        return interval(self)


def meet(v: Word, w: Word) -> Word:
    """Longest common prefix of *v* and *w*.

    Words of unequal length are compared over the shorter length.
    """
    if v.base != w.base:
        raise InputError(f"base mismatch: {v.base} vs {w.base}")
    k = 0
    for a, c in zip(v.digits, w.digits):
        if a != c:
            break
        k += 1
    return v.prefix(k)


def interval(w: Word) -> Interval:
    den = w.base ** len(w)
    return Interval(w.rank, w.rank + 1, den)


def level(b: int, n: int, cap: int = MAX_NODES) -> list[Word]:
    """All words of length *n* in lexicographic order."""
    size = check_size(b, n, cap)
    return [Word.from_rank(r, n, b) for r in range(size)]


def level_labels(b: int, n: int) -> list[str]:
    """String forms of :func:`level`, cheaper for output tables."""
    return [str(w) for w in level(b, n)]
