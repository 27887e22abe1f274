"""Seeded trajectories, the range process and replica execution.

Visited words are interned in a :class:`WalkTree`, a trie whose nodes are the
words seen so far. Because the walk is nearest-neighbour, each step moves to
the parent, a sibling, a child, or stays put, so a step costs O(1) no matter
how long the current word is. A node is created exactly when its word is
visited for the first time, so the range ``R_n`` is the node count.

Random numbers come from ``numpy.random.Philox`` (a counter-based 64-bit
generator). Replica seeds are derived with :func:`split_seed`.
"""
from __future__ import annotations

import os
import warnings
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from .model import ModelSpec, step_distribution
from .words import EMPTY, FreeWord, Letter

__all__ = [
    "GENERATOR_NAME",
    "GOLDEN_GAMMA",
    "BudgetExceeded",
    "VisitedSetOverflow",
    "TransienceWarning",
    "WalkTree",
    "Trajectory",
    "RangeSeries",
    "ReplicaResult",
    "split_seed",
    "run",
    "replay",
    "trajectory_from_words",
    "range_process",
    "run_replicas",
    "exact_expected_range",
    "exact_expected_range_series",
    "worker_count",
]

GENERATOR_NAME = "numpy.random.Philox"
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
DEFAULT_MAX_VISITED = 20_000_000
DEFAULT_RETURN_WARNING = 1000


class BudgetExceeded(RuntimeError):
    pass


class VisitedSetOverflow(MemoryError):
    """The visited set hit its cap; counting further would undercount the range."""


class TransienceWarning(UserWarning):
    pass


def _splitmix64(x: int) -> int:
    z = (x + GOLDEN_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def split_seed(base_seed: int, index: int) -> int:
    """Seed of replica ``index``: ``splitmix64(base ^ (index * golden gamma mod 2**64))``."""
    return _splitmix64((base_seed & _MASK64) ^ ((index * GOLDEN_GAMMA) & _MASK64))


def worker_count() -> int:
    env = os.environ.get("FPRW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"FPRW_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


class WalkTree:
    """Trie of visited words. Node 0 is ``o``; parents are created before children."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        n1 = spec.factor1.n_letters
        self.n_codes = n1 + spec.factor2.n_letters
        # letter code -> (factor, letter index, factor vertex)
        self.code_letter: list[Letter] = [Letter(1, j) for j in range(n1)] + [
            Letter(2, j) for j in range(spec.factor2.n_letters)
        ]
        self.code_vertex = [spec.factor(f).letter_vertex(j) for f, j in self.code_letter]
        self.vertex_code = {
            1: [spec.factor1.vertex_letter(v) if v != spec.factor1.root else -1 for v in range(spec.factor1.size)],
            2: [n1 + spec.factor2.vertex_letter(v) if v != spec.factor2.root else -1 for v in range(spec.factor2.size)],
        }
        self.parent = [-1]
        self.depth = [0]
        self.code = [-1]
        self.kind = [0]
        self.children: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self.parent)

    def child(self, node: int, code: int) -> int:
        key = node * self.n_codes + code
        nxt = self.children.get(key)
        if nxt is None:
            nxt = len(self.parent)
            self.children[key] = nxt
            self.parent.append(node)
            self.depth.append(self.depth[node] + 1)
            self.code.append(code)
            self.kind.append(self.code_letter[code].factor)
        return nxt

    def position(self, node: int, factor: int) -> int:
        """Vertex of the factor copy attached at ``node`` where the walk stands."""
        if self.kind[node] == factor:
            return self.code_vertex[self.code[node]]
        return self.spec.factor(factor).root

    def move(self, node: int, factor: int, target: int) -> int:
        """Apply a factor step to ``target`` (a factor vertex) from ``node``."""
        same = self.kind[node] == factor
        if target == self.spec.factor(factor).root:
            return self.parent[node] if same else node
        base = self.parent[node] if same else node
        return self.child(base, self.vertex_code[factor][target])

    def word(self, node: int) -> FreeWord:
        letters = []
        while node > 0:
            letters.append(self.code_letter[self.code[node]])
            node = self.parent[node]
        return FreeWord(tuple(reversed(letters)))

    def find(self, word: FreeWord) -> int | None:
        """Node of ``word`` if it has been visited."""
        node = 0
        n1 = self.spec.factor1.n_letters
        for f, j in word.letters:
            node = self.children.get(node * self.n_codes + (j if f == 1 else n1 + j))
            if node is None:
                return None
        return node

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(parent, depth, code, kind) as int arrays."""
        return (
            np.asarray(self.parent, dtype=np.int64),
            np.asarray(self.depth, dtype=np.int64),
            np.asarray(self.code, dtype=np.int64),
            np.asarray(self.kind, dtype=np.int64),
        )


@dataclass(frozen=True, eq=False)
class RangeSeries:
    values: np.ndarray

    def violations(self) -> list[str]:
        v = np.asarray(self.values)
        out = []
        if len(v) == 0 or v[0] != 1:
            out.append("R_0 != 1")
        d = np.diff(v)
        if np.any((d != 0) & (d != 1)):
            out.append("increment outside {0,1}")
        if np.any(v > np.arange(1, len(v) + 1)):
            out.append("R_n > n+1")
        return out


@dataclass(eq=False)
class Trajectory:
    """A realised path ``X_0 = o, X_1, ..., X_N``.

    ``factors[n-1]``/``targets[n-1]`` record step ``n``: the factor chosen by the
    coin and the factor vertex moved to. ``nodes[n]`` is the tree node of ``X_n``.
    """

    spec: ModelSpec
    seed: int | None
    factors: np.ndarray
    targets: np.ndarray
    lengths: np.ndarray
    ranges: np.ndarray
    nodes: np.ndarray
    tree: WalkTree = field(repr=False)

    @property
    def n_steps(self) -> int:
        return len(self.factors)

    @property
    def final_word(self) -> FreeWord:
        return self.tree.word(int(self.nodes[-1]))

    def word(self, n: int) -> FreeWord:
        return self.tree.word(int(self.nodes[n]))

    def words(self) -> Iterator[FreeWord]:
        for node in self.nodes:
            yield self.tree.word(int(node))

    @property
    def returns_to_origin(self) -> int:
        return int(np.count_nonzero(self.nodes[1:] == 0))


def _finish(spec, seed, factors, targets, nodes, ranges, tree) -> Trajectory:
    depth = np.asarray(tree.depth, dtype=np.int32)
    nodes = np.asarray(nodes, dtype=np.int32)
    return Trajectory(
        spec=spec,
        seed=seed,
        factors=np.asarray(factors, dtype=np.uint8),
        targets=np.asarray(targets, dtype=np.int32),
        lengths=depth[nodes],
        ranges=np.asarray(ranges, dtype=np.int32),
        nodes=nodes,
        tree=tree,
    )


def _sampling_tables(spec: ModelSpec):
    tables = {}
    for i in (1, 2):
        rows = []
        for targets, probs in spec.factor(i).rows:
            cum = list(np.cumsum(probs))
            cum[-1] = float("inf")  # absorb rounding in the last bucket
            rows.append((list(targets), cum))
        tables[i] = rows
    return tables


def run(
    spec: ModelSpec,
    n_steps: int,
    seed: int,
    *,
    max_visited: int = DEFAULT_MAX_VISITED,
    return_warning: int | None = DEFAULT_RETURN_WARNING,
) -> Trajectory:
    """Sample ``n_steps`` steps of the walk from ``o``.

    Each step draws one uniform for the factor coin and one for the factor
    step. Identical ``(spec, n_steps, seed)`` give identical trajectories.
    """
    spec.require_valid()
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    rng = np.random.Generator(np.random.Philox(seed))
    factors = np.where(rng.random(n_steps) < spec.alpha, 1, 2).astype(np.uint8)
    uniforms = rng.random(n_steps)

    tree = WalkTree(spec)
    tables = _sampling_tables(spec)
    roots = {1: spec.factor1.root, 2: spec.factor2.root}
    kind, code, parent = tree.kind, tree.code, tree.parent
    code_vertex, vertex_code = tree.code_vertex, tree.vertex_code
    child = tree.child

    targets = np.empty(n_steps, dtype=np.int32)
    nodes = [0] * (n_steps + 1)
    ranges = [1] * (n_steps + 1)
    cur = 0
    for n, (i, u) in enumerate(zip(factors.tolist(), uniforms.tolist())):
        same = kind[cur] == i
        here = code_vertex[code[cur]] if same else roots[i]
        row_targets, cum = tables[i][here]
        w = row_targets[bisect_right(cum, u)]
        targets[n] = w
        if w == roots[i]:
            if same:
                cur = parent[cur]
        else:
            cur = child(parent[cur] if same else cur, vertex_code[i][w])
        nodes[n + 1] = cur
        size = len(parent)
        ranges[n + 1] = size
        if size > max_visited:
            raise VisitedSetOverflow(f"visited set exceeded {max_visited} words at step {n + 1}")

    traj = _finish(spec, seed, factors, targets, nodes, ranges, tree)
    if return_warning is not None and traj.returns_to_origin > return_warning:
        warnings.warn(
            f"walk returned to o {traj.returns_to_origin} times in {n_steps} steps; "
            "the model may not be transient",
            TransienceWarning,
            stacklevel=2,
        )
    return traj


def replay(spec: ModelSpec, factors, targets, seed: int | None = None) -> Trajectory:
    """Rebuild a trajectory from its step records, checking each step is possible."""
    spec.require_valid()
    factors = np.asarray(factors)
    targets = np.asarray(targets)
    if factors.shape != targets.shape:
        raise ValueError("factors and targets differ in length")
    tree = WalkTree(spec)
    nodes = [0]
    ranges = [1]
    cur = 0
    for n, (i, w) in enumerate(zip(factors.tolist(), targets.tolist())):
        if i not in (1, 2):
            raise ValueError(f"step {n + 1}: factor {i} is not 1 or 2")
        here = tree.position(cur, i)
        if not 0 <= w < spec.factor(i).size or spec.factor(i).matrix[here, w] <= 0:
            raise ValueError(f"step {n + 1}: factor {i} cannot move from vertex {here} to {w}")
        cur = tree.move(cur, i, w)
        nodes.append(cur)
        ranges.append(len(tree))
    return _finish(spec, seed, factors, targets, nodes, ranges, tree)


def trajectory_from_words(spec: ModelSpec, words) -> Trajectory:
    """Trajectory through the given words (starting with ``o``); each move must have positive probability."""
    words = list(words)
    if not words or words[0].letters:
        raise ValueError("a trajectory starts at o")
    tree = WalkTree(spec)
    factors, targets = [], []
    cur = 0
    for n, (u, w) in enumerate(zip(words, words[1:])):
        for i in (1, 2):
            here = tree.position(cur, i)
            hit = [t for t in spec.factor(i).rows[here][0] if _peek(tree, cur, i, t) == w]
            if hit:
                factors.append(i)
                targets.append(hit[0])
                cur = tree.move(cur, i, hit[0])
                break
        else:
            raise ValueError(f"step {n + 1}: no positive-probability move from {u} to {w}")
    return replay(spec, factors, targets)


def _peek(tree: WalkTree, node: int, factor: int, target: int) -> FreeWord:
    word = tree.word(node)
    same = tree.kind[node] == factor
    fac = tree.spec.factor(factor)
    base = word.letters[:-1] if same else word.letters
    if target == fac.root:
        return FreeWord(base) if same else word
    return FreeWord(base + (Letter(factor, fac.vertex_letter(target)),))


def range_process(traj: Trajectory) -> RangeSeries:
    """``R_n = |{X_0, ..., X_n}|`` for every ``n``, recounted with a visited-word set."""
    seen = set()
    values = np.empty(len(traj.nodes), dtype=np.int64)
    for n, node in enumerate(traj.nodes.tolist()):
        seen.add(node)
        values[n] = len(seen)
    return RangeSeries(values)


# ---------------------------------------------------------------------------
# replicas


@dataclass(eq=False)
class ReplicaResult:
    index: int
    seed: int
    n_steps: int
    final_length: int = 0
    final_range: int = 1
    returns_to_origin: int = 0
    range_series: np.ndarray | None = None
    exits: object | None = None  # ExitSummary when analysed
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _replica_task(args) -> ReplicaResult:
    spec, n_steps, index, seed, analyze, margin, keep_series, max_visited = args
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TransienceWarning)
            traj = run(spec, n_steps, seed, max_visited=max_visited)
        exits = None
        if analyze:
            from .exits import exit_times

            exits = exit_times(traj, margin=margin, decompose=True)
        return ReplicaResult(
            index=index,
            seed=seed,
            n_steps=n_steps,
            final_length=int(traj.lengths[-1]),
            final_range=int(traj.ranges[-1]),
            returns_to_origin=traj.returns_to_origin,
            range_series=traj.ranges if keep_series else None,
            exits=exits,
        )
    except MemoryError as exc:
        return ReplicaResult(index=index, seed=seed, n_steps=n_steps, error=f"{type(exc).__name__}: {exc}")


def run_replicas(
    spec: ModelSpec,
    n_steps: int,
    n_replicas: int,
    base_seed: int,
    *,
    analyze: bool = False,
    margin: int = 5,
    keep_series: bool = True,
    workers: int | None = None,
    max_visited: int = DEFAULT_MAX_VISITED,
) -> list[ReplicaResult]:
    """Run independent replicas; replica ``r`` uses ``split_seed(base_seed, r)``.

    Results are ordered by replica index. A replica that runs out of memory is
    reported through ``ReplicaResult.error`` and does not stop the others.
    """
    spec.require_valid()
    if n_replicas < 1:
        raise ValueError("n_replicas must be at least 1")
    tasks = [
        (spec, n_steps, r, split_seed(base_seed, r), analyze, margin, keep_series, max_visited)
        for r in range(n_replicas)
    ]
    workers = worker_count() if workers is None else workers
    workers = min(workers, n_replicas)
    if workers <= 1 or n_steps * n_replicas < 200_000:
        results = [_replica_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replica_task, tasks))
    bad = sum(1 for r in results if r.returns_to_origin > DEFAULT_RETURN_WARNING)
    if bad:
        warnings.warn(
            f"{bad} replica(s) returned to o more than {DEFAULT_RETURN_WARNING} times; "
            "the model may not be transient",
            TransienceWarning,
            stacklevel=2,
        )
    return sorted(results, key=lambda r: r.index)


# ---------------------------------------------------------------------------
# exact enumeration


def exact_expected_range_series(spec: ModelSpec, n: int, budget: int = 10_000_000, exact: bool = True) -> list:
    """``[E R_0, ..., E R_n]`` by enumerating every positive-probability path.

    ``budget`` caps the number of enumerated path prefixes. Probabilities are
    exact fractions when ``exact`` is true.
    """
    spec.require_valid()
    if n < 0:
        raise ValueError("n must be nonnegative")
    cache: dict[FreeWord, list] = {}
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    acc = [zero] * (n + 1)
    visits: dict[FreeWord, int] = {EMPTY: 1}
    count = 0

    def outcomes(w):
        out = cache.get(w)
        if out is None:
            out = cache[w] = step_distribution(spec, w, exact=exact)
        return out

    def dfs(w, depth, prob, distinct):
        nonlocal count
        acc[depth] += prob * distinct
        if depth == n:
            return
        for nxt, p in outcomes(w):
            count += 1
            if count > budget:
                raise BudgetExceeded(f"enumeration exceeds budget of {budget} path prefixes")
            seen = visits.get(nxt, 0)
            visits[nxt] = seen + 1
            dfs(nxt, depth + 1, prob * p, distinct + (seen == 0))
            if seen:
                visits[nxt] = seen
            else:
                del visits[nxt]

    dfs(EMPTY, 0, one, 1)
    return acc


def exact_expected_range(spec: ModelSpec, n: int, budget: int = 10_000_000, exact: bool = True):
    """``E[R_n]`` by exhaustive enumeration (see :func:`exact_expected_range_series`)."""
    return exact_expected_range_series(spec, n, budget, exact)[n]
