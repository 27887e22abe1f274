"""Reference computations written without the package, used as test oracles."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

HALF = Fraction(1, 2)

# factor matrices with the root at index 0
COUNTEREXAMPLE = (
    [[0, 1], [0, 1]],
    [[0, 1, 0], [0, 0, 1], [0, 1, 0]],
)

# E[R_n], n = 0..12, for the counterexample walk; frozen from brute_expected_ranges
COUNTEREXAMPLE_EXPECTED_RANGE = [
    Fraction(1),
    Fraction(2),
    Fraction(11, 4),
    Fraction(27, 8),
    Fraction(4),
    Fraction(37, 8),
    Fraction(21, 4),
    Fraction(47, 8),
    Fraction(13, 2),
    Fraction(57, 8),
    Fraction(31, 4),
    Fraction(67, 8),
    Fraction(9),
]

# Z2 * Z3 with alpha = 1/2. Let h1, h2 be the probabilities of reaching o from a
# one-letter word of factor 1, 2. First-step analysis gives
#   h1 = 1/2 + 1/2 h2 h1,   h2 = 1/4 + 1/4 h2 + 1/2 h1 h2,
# whose minimal solution is h1 = 3/4, h2 = 2/3. Then
#   U(o,o) = (h1 + h2)/2 = 17/24,   G(o,o) = 1/(1 - U) = 24/7,
#   xi_1 = (1/2) / (1 - h2/2) = 3/4,   xi_2 = (1/2) / (1 - h1/2) = 4/5.
Z2Z3_H1 = Fraction(3, 4)
Z2Z3_H2 = Fraction(2, 3)
Z2Z3_U = Fraction(17, 24)
Z2Z3_G = Fraction(24, 7)
Z2Z3_XI = (Fraction(3, 4), Fraction(4, 5))


def _step(word: tuple, factor: int, target: int) -> tuple:
    """Apply one factor move (``target`` is a factor vertex, 0 the root)."""
    if word and word[-1][0] == factor:
        base = word[:-1]
    else:
        base = word
        if target == 0:
            return word
    return base if target == 0 else base + ((factor, target),)


def _here(word: tuple, factor: int) -> int:
    return word[-1][1] if word and word[-1][0] == factor else 0


def brute_expected_ranges(matrices, alpha, n: int) -> list[Fraction]:
    """E[R_0..R_n] by walking every path (exact fractions)."""
    weights = {1: Fraction(alpha), 2: 1 - Fraction(alpha)}
    mats = {i: [[Fraction(x) for x in row] for row in matrices[i - 1]] for i in (1, 2)}
    totals = [Fraction(0)] * (n + 1)

    def walk(word, prob, seen, depth):
        totals[depth] += prob * len(seen)
        if depth == n:
            return
        for i in (1, 2):
            row = mats[i][_here(word, i)]
            for t, p in enumerate(row):
                if p:
                    nxt = _step(word, i, t)
                    walk(nxt, prob * weights[i] * p, seen | {nxt}, depth + 1)

    walk((), Fraction(1), frozenset({()}), 0)
    return totals


def lumped_z2z3_hit(start_len: int, start_type: int, m: int, walkers: int, seed: int) -> float:
    """Monte Carlo of reaching length 0 on Z2 * Z3 before the length exceeds ``m``.

    Only (length, type) is tracked: on this walk the next (length, type)
    depends on nothing else. Type 0 means the empty word.
    """
    rng = np.random.default_rng(seed)
    length = np.full(walkers, start_len, dtype=np.int64)
    typ = np.full(walkers, start_type, dtype=np.int64)
    hit = np.zeros(walkers, dtype=bool)
    alive = np.ones(walkers, dtype=bool)
    # the first step from the empty word is forced outward
    while alive.any():
        idx = np.flatnonzero(alive)
        coin = rng.random(len(idx)) < 0.5
        factor = np.where(coin, 1, 2)
        second = rng.random(len(idx)) < 0.5
        L, T = length[idx], typ[idx]
        same = T == factor
        # factor 1 on a type-1 word always drops; factor 2 on a type-2 word drops half the time
        drop = same & ((factor == 1) | second)
        grow = ~same
        L = L + grow - drop
        T = np.where(grow, factor, T)
        # after a drop the type flips to the other factor unless the word is empty
        T = np.where(drop, np.where(L == 0, 0, 3 - factor), T)
        length[idx], typ[idx] = L, T
        reached = L == 0
        hit[idx[reached]] = True
        alive[idx[reached | (L > m)]] = False
    return float(hit.mean())


def lumped_z2z3_return(m: int, walkers: int, seed: int) -> float:
    """Monte Carlo of U(o,o) on Z2 * Z3 with killing above length ``m``."""
    rng = np.random.default_rng(seed)
    first = np.where(rng.random(walkers) < 0.5, 1, 2)
    n1 = int((first == 1).sum())
    p1 = lumped_z2z3_hit(1, 1, m, n1, seed + 1) if n1 else 0.0
    p2 = lumped_z2z3_hit(1, 2, m, walkers - n1, seed + 2) if walkers - n1 else 0.0
    return (n1 * p1 + (walkers - n1) * p2) / walkers
