"""Exit times, stabilised letters and the decomposition of the range.

For a finite trajectory ``X_0..X_N`` the exit time ``e_k`` is the first time
``m > e_{k-1}`` from which the first ``k`` letters of ``X_n`` stay fixed up to
the horizon ``N``. Those letters are then the first ``k`` letters of ``X_N``,
so ``e_k`` is one past the last time the walk was outside the cone of the
length-``k`` prefix of ``X_N``.

A finite horizon cannot rule out a later retreat, so a record is *certified*
only if ``X_N`` extends ``k + margin`` letters. Estimators use certified
records only.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .simulator import Trajectory
from .words import FreeWord, Letter, in_cone, shift

__all__ = [
    "DEFAULT_MARGIN",
    "DEFAULT_SUPPORT_CAP",
    "UncertifiedRecord",
    "ExitRecord",
    "ExitSummary",
    "DiagnosticsReport",
    "exit_times",
    "psi_decomposition",
    "chain_diagnostics",
]

DEFAULT_MARGIN = 5
DEFAULT_SUPPORT_CAP = 10_000


class UncertifiedRecord(ValueError):
    pass


@dataclass(frozen=True)
class ExitRecord:
    k: int
    e_k: int
    w_k: Letter
    psi_support_size: int
    r_tilde: int
    overhead: int
    certified: bool
    # shifted support of psi_k, kept only on request and below the cap
    support: frozenset | None = field(default=None, compare=False, repr=False)


@dataclass(eq=False)
class ExitSummary:
    """Columnar exit data for ``k = 1..final_length``.

    Index ``k - 1`` of every array refers to exit ``k``. The range pieces
    ``r_tilde``/``overhead``/``psi_size`` are filled when decomposed.
    """

    n_steps: int
    final_length: int
    margin: int
    e: np.ndarray
    w_factor: np.ndarray
    w_vertex: np.ndarray
    certified: np.ndarray
    r_tilde: np.ndarray | None = None
    overhead: np.ndarray | None = None
    psi_size: np.ndarray | None = None
    # words visited outside V*_{tau(W_1)}: the initial piece left out of r_tilde
    r_tilde_0: int | None = None

    @property
    def k_of_n(self) -> int:
        """Largest certified ``k`` (0 if none)."""
        return int(np.count_nonzero(self.certified))

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.e, prepend=0)

    @property
    def decomposed(self) -> bool:
        return self.r_tilde is not None

    def record(self, k: int) -> ExitRecord:
        i = k - 1
        if not 0 <= i < len(self.e):
            raise IndexError(f"no exit record for k={k}")
        psi = int(self.psi_size[i]) if self.decomposed else -1
        return ExitRecord(
            k=k,
            e_k=int(self.e[i]),
            w_k=Letter(int(self.w_factor[i]), int(self.w_vertex[i])),
            psi_support_size=psi,
            r_tilde=int(self.r_tilde[i]) if self.decomposed else -1,
            overhead=int(self.overhead[i]) if self.decomposed else -1,
            certified=bool(self.certified[i]),
        )

    @property
    def records(self) -> list[ExitRecord]:
        return [self.record(k) for k in range(1, len(self.e) + 1)]

    def certified_slice(self, include_uncertified: bool = False) -> slice:
        return slice(0, len(self.e) if include_uncertified else self.k_of_n)


def _cone_depths(traj: Trajectory):
    """Per tree node: depth of its deepest ancestor on the root-to-X_N path, and its first factor."""
    tree = traj.tree
    parent = tree.parent
    depth = tree.depth
    kind = tree.kind
    on_path = bytearray(len(parent))
    node = int(traj.nodes[-1])
    path = [node]
    while node > 0:
        on_path[node] = 1
        node = parent[node]
        path.append(node)
    on_path[0] = 1
    path.reverse()
    c = [0] * len(parent)
    first = [0] * len(parent)
    for v in range(1, len(parent)):
        p = parent[v]
        c[v] = depth[v] if on_path[v] else c[p]
        first[v] = kind[v] if p == 0 else first[p]
    return np.asarray(c, dtype=np.int64), np.asarray(first, dtype=np.int64), path


def exit_times(traj: Trajectory, margin: int = DEFAULT_MARGIN, decompose: bool = True) -> ExitSummary:
    """Exit times ``e_1..e_L`` (``L = ||X_N||``) of ``traj``.

    With ``decompose`` the sizes of the range pieces are filled as well (see
    :func:`psi_decomposition`); this is a counting shortcut that never builds
    the shifted supports.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    c, first, path = _cone_depths(traj)
    L = len(path) - 1
    ct = c[traj.nodes]
    suffix_min = np.minimum.accumulate(ct[::-1])[::-1]
    e = np.searchsorted(suffix_min, np.arange(1, L + 1), side="left").astype(np.int64)
    codes = [traj.tree.code[v] for v in path[1:]]
    letters = [traj.tree.code_letter[x] for x in codes]
    summary = ExitSummary(
        n_steps=traj.n_steps,
        final_length=L,
        margin=margin,
        e=e,
        w_factor=np.array([l.factor for l in letters], dtype=np.int64),
        w_vertex=np.array([l.vertex for l in letters], dtype=np.int64),
        certified=np.arange(1, L + 1) <= L - margin,
    )
    if decompose and L > 0:
        by_c = np.bincount(c, minlength=L + 1)
        below = np.cumsum(by_c)  # below[j] = #{nodes with c <= j}
        ranges = traj.ranges.astype(np.int64)
        r_tilde = np.empty(L, dtype=np.int64)
        r_tilde[1:] = by_c[1:L]
        tau1 = summary.w_factor[0]
        branch = (c == 0) & ((first == tau1) | (np.arange(len(c)) == 0))
        r_tilde[0] = int(np.count_nonzero(branch))
        overhead = ranges[e] - below[:L]
        summary.r_tilde = r_tilde
        summary.overhead = overhead
        summary.psi_size = r_tilde + overhead
        summary.r_tilde_0 = int(by_c[0] - r_tilde[0])
    return summary


def psi_decomposition(
    traj: Trajectory,
    summary: ExitSummary,
    ks=None,
    *,
    include_uncertified: bool = False,
    retain_supports: bool = False,
    support_cap: int = DEFAULT_SUPPORT_CAP,
) -> list[ExitRecord]:
    """Range pieces for the requested exits (default: all certified ones).

    The shifted supports are rebuilt explicitly from the visited words, which
    makes this an independent check of the counting shortcut in
    :func:`exit_times` (and quadratic in the trajectory length).
    """
    if ks is None:
        ks = range(1, (len(summary.e) if include_uncertified else summary.k_of_n) + 1)
    ks = list(ks)
    for k in ks:
        if not 1 <= k <= len(summary.e):
            raise IndexError(f"no exit record for k={k}")
        if not summary.certified[k - 1] and not include_uncertified:
            raise UncertifiedRecord(f"exit {k} is not certified (margin {summary.margin})")
    words = [traj.tree.word(v) for v in range(len(traj.tree))]
    first_seen = np.full(len(words), -1, dtype=np.int64)
    order = []
    for t, v in enumerate(traj.nodes.tolist()):
        if first_seen[v] < 0:
            first_seen[v] = t
            order.append(v)
    out = []
    for k in ks:
        ek = int(summary.e[k - 1])
        visited = [words[v] for v in order if first_seen[v] <= ek]
        w = Letter(int(summary.w_factor[k - 1]), int(summary.w_vertex[k - 1]))
        if k == 1:
            tau = w.factor
            support = {y for y in visited if not y.letters or y.letters[0].factor == tau}
        else:
            anchor = traj.word(int(summary.e[k - 2]))
            support = shift(anchor, [y for y in visited if in_cone(anchor, y)])
        cone = FreeWord((w,))
        overhead = sum(1 for y in support if in_cone(cone, y))
        out.append(
            ExitRecord(
                k=k,
                e_k=ek,
                w_k=w,
                psi_support_size=len(support),
                r_tilde=len(support) - overhead,
                overhead=overhead,
                certified=bool(summary.certified[k - 1]),
                support=frozenset(support) if retain_supports and len(support) <= support_cap else None,
            )
        )
    return out


@dataclass
class DiagnosticsReport:
    n_records: int
    alternation_violations: int
    nesting_violations: int
    monotonicity_violations: int
    tiling_violations: int
    state_histogram: dict
    running_mean_r_tilde: np.ndarray
    running_mean_overhead: np.ndarray

    @property
    def clean(self) -> bool:
        return not (
            self.alternation_violations
            or self.nesting_violations
            or self.monotonicity_violations
            or self.tiling_violations
        )


def _is_ancestor(parent: list[int], a: int, b: int, steps: int) -> bool:
    for _ in range(steps):
        b = parent[b]
    return a == b


def chain_diagnostics(
    summary: ExitSummary, traj: Trajectory | None = None, include_uncertified: bool = False
) -> DiagnosticsReport:
    """Empirical checks on the exit-record chain ``(W_k, psi_k)``.

    Alternation of letter factors, strict growth of ``e_k``, and the tiling
    bound ``sum r_tilde <= N``. When the trajectory is supplied, cone nesting
    is checked on the actual words ``X_{e_k}``.
    """
    sl = summary.certified_slice(include_uncertified)
    e = summary.e[sl]
    wf = summary.w_factor[sl]
    n = len(e)
    alternation = int(np.count_nonzero(wf[1:] == wf[:-1]))
    monotone = int(np.count_nonzero(np.diff(e) <= 0)) + int(n > 0 and e[0] < 1)
    nesting = 0
    if traj is not None:
        parent, depth = traj.tree.parent, traj.tree.depth
        prev = 0
        for k in range(1, n + 1):
            node = int(traj.nodes[e[k - 1]])
            gap = depth[node] - depth[prev]
            if depth[node] != k or gap < 1 or not _is_ancestor(parent, prev, node, gap):
                nesting += 1
            prev = node
    if summary.decomposed and n:
        rt = summary.r_tilde[sl]
        oh = summary.overhead[sl]
        tiling = int(rt.sum() > summary.n_steps)
        hist = Counter(zip(wf.tolist(), summary.psi_size[sl].tolist()))
        ks = np.arange(1, n + 1)
        mean_rt = np.cumsum(rt) / ks
        mean_oh = np.cumsum(oh) / ks
    else:
        tiling = 0
        hist = Counter()
        mean_rt = mean_oh = np.zeros(0)
    return DiagnosticsReport(
        n_records=n,
        alternation_violations=alternation,
        nesting_violations=nesting,
        monotonicity_violations=monotone,
        tiling_violations=tiling,
        state_histogram=dict(sorted(hist.items())),
        running_mean_r_tilde=mean_rt,
        running_mean_overhead=mean_oh,
    )
