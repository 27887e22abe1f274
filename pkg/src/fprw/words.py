"""Normal-form words of the free product V1 * V2.

A word is a finite sequence of letters, each letter being a non-root vertex
of one of the two factors, such that consecutive letters come from different
factors. The empty word is the common root ``o``.

Letters are addressed by ``(factor, vertex)`` where ``vertex`` indexes the
non-root vertices of the factor (0-based, root excluded).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

__all__ = [
    "Letter",
    "FreeWord",
    "EMPTY",
    "CompositionError",
    "EmptyWordError",
    "ConeError",
    "concat",
    "word_length",
    "type_of",
    "last_letter",
    "in_cone",
    "shift",
    "common_prefix",
    "parse_canonical",
]


class CompositionError(ValueError):
    """Raised when two words cannot be composed in V."""


class EmptyWordError(ValueError):
    """Raised when a letter of the empty word is requested."""


class ConeError(ValueError):
    """Raised when a shift is applied to a set not contained in the cone."""


class Letter(NamedTuple):
    factor: int
    vertex: int

    def __str__(self) -> str:
        return f"{self.factor}:{self.vertex}"


@dataclass(frozen=True, slots=True)
class FreeWord:
    letters: tuple[Letter, ...] = ()

    def __post_init__(self):
        letters = tuple(Letter(int(f), int(v)) for f, v in self.letters)
        prev = 0
        for f, v in letters:
            if f not in (1, 2):
                raise ValueError(f"factor must be 1 or 2, got {f}")
            if v < 0:
                raise ValueError(f"vertex index must be nonnegative, got {v}")
            if f == prev:
                raise ValueError(f"consecutive letters from factor {f} in {letters}")
            prev = f
        object.__setattr__(self, "letters", letters)

    @classmethod
    def of(cls, *letters: tuple[int, int]) -> FreeWord:
        return cls(tuple(letters))

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return FreeWord(self.letters[idx])
        return self.letters[idx]

    def __str__(self) -> str:
        if not self.letters:
            return "()"
        return ".".join(str(l) for l in self.letters)

    def __repr__(self) -> str:
        return f"FreeWord({self})"

    @property
    def type(self) -> int:
        return self.letters[-1].factor if self.letters else 0

    def key(self) -> bytes:
        """Canonical byte encoding: one varint ``2*vertex + factor - 1`` per letter."""
        out = bytearray()
        for f, v in self.letters:
            code = 2 * v + (f - 1)
            while True:
                byte = code & 0x7F
                code >>= 7
                if code:
                    out.append(byte | 0x80)
                else:
                    out.append(byte)
                    break
        return bytes(out)

    def append(self, letter: Letter) -> FreeWord:
        return concat(self, FreeWord((letter,)))

    def parent(self) -> FreeWord:
        if not self.letters:
            raise EmptyWordError("the empty word has no parent")
        return FreeWord(self.letters[:-1])


EMPTY = FreeWord()


def concat(u: FreeWord, v: FreeWord) -> FreeWord:
    """Partial composition ``uv``; roots act as identities on either side."""
    if not u.letters:
        return v
    if not v.letters:
        return u
    if u.letters[-1].factor == v.letters[0].factor:
        raise CompositionError(f"cannot compose {u} with {v}: both meet in factor {v.letters[0].factor}")
    return FreeWord(u.letters + v.letters)


def word_length(u: FreeWord) -> int:
    return len(u.letters)


def type_of(u: FreeWord) -> int:
    return u.type


def last_letter(u: FreeWord) -> Letter:
    if not u.letters:
        raise EmptyWordError("the empty word has no last letter")
    return u.letters[-1]


def in_cone(x: FreeWord, y: FreeWord) -> bool:
    """True iff ``y`` has prefix ``x``, i.e. ``y`` lies in the cone C(x)."""
    n = len(x.letters)
    return len(y.letters) >= n and y.letters[:n] == x.letters


def shift(x: FreeWord, words: Iterable[FreeWord]) -> set[FreeWord]:
    """Cancel the common prefix ``x`` from every word in ``words``."""
    n = len(x.letters)
    out = set()
    for y in words:
        if not in_cone(x, y):
            raise ConeError(f"{y} is not in the cone of {x}")
        out.add(FreeWord(y.letters[n:]))
    return out


def common_prefix(x: FreeWord, y: FreeWord) -> FreeWord:
    n = 0
    for a, b in zip(x.letters, y.letters):
        if a != b:
            break
        n += 1
    return FreeWord(x.letters[:n])


def parse_canonical(text: str) -> FreeWord:
    """Inverse of ``str(word)``: ``"1:0.2:1"`` or ``"()"``."""
    text = text.strip()
    if text in ("()", ""):
        return EMPTY
    letters = []
    for token in text.split("."):
        try:
            f, v = token.split(":")
            letters.append(Letter(int(f), int(v)))
        except ValueError as exc:
            raise ValueError(f"malformed letter {token!r} in {text!r}") from exc
    return FreeWord(tuple(letters))
