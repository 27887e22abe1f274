"""Truncated hitting, return and Green-function values at z = 1.

Every quantity is computed on the walk killed when its word length first
exceeds the truncation level ``m``. Killing only removes probability mass, so
each value is a lower bound that increases with ``m``.

Two routes compute the same truncated numbers:

``enumerate``
    Breadth-first enumeration of all words of length <= m reachable from the
    start, followed by a sparse direct solve. Works for any target set, but the
    number of words grows exponentially in ``m``.
``cone``
    Uses that the walk started at ``x * v`` behaves, until it first hits ``x``,
    like the walk started at ``v`` until it hits ``o``. The probabilities
    ``H_i^(d)(v)`` of hitting ``o`` from a one-letter word ``v`` of factor ``i``
    while staying within length ``d`` satisfy, with ``j`` the other factor,

        H_i^(d)(v) = a_i p_i(v, o_i) + a_i sum_w p_i(v, w) H_i^(d)(w) + rho_j^(d-1) H_i^(d)(v)
        rho_j^(d)  = a_j [p_j(o_j, o_j) + sum_w p_j(o_j, w) H_j^(d)(w)]

    (``a_1 = alpha``, ``a_2 = 1 - alpha``, ``H^(0) = 0``), which costs one
    small linear solve per factor and level. It covers targets that are
    prefixes of the start, cone exits from one-letter words, ``U(o, o)`` and
    ``G(x, o)`` for ``||x|| <= 1``.

``method="auto"`` picks ``cone`` whenever it applies.
"""
from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order
from scipy.sparse.linalg import spsolve

from .model import ModelSpec, step_distribution
from .simulator import TransienceWarning
from .words import EMPTY, FreeWord, in_cone

__all__ = [
    "DEFAULT_TOL",
    "DEFAULT_STATE_BUDGET",
    "GROUP_CASE_TOL",
    "SolveResult",
    "TruncationTooSmall",
    "StateBudgetExceeded",
    "hitting_probability",
    "xi",
    "first_return",
    "truncated_green",
    "group_case_range",
    "hitting_tables",
]

DEFAULT_TOL = 1e-8
# the group-case prediction is reported to fewer digits than the raw solves
GROUP_CASE_TOL = 1e-6
DEFAULT_STATE_BUDGET = 1_000_000


class TruncationTooSmall(ValueError):
    pass


class StateBudgetExceeded(RuntimeError):
    pass


@dataclass
class SolveResult:
    quantity: str
    value: float
    truncation: int
    history: list[tuple[int, float]]
    converged: bool
    method: str
    start: str = ""
    target: str = ""
    tol: float = DEFAULT_TOL
    residuals: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def is_monotone(self, direction: int = 1, slack: float = 1e-12) -> bool:
        vals = [v for _, v in self.history]
        return all(direction * (b - a) >= -slack for a, b in zip(vals, vals[1:]))

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "start": self.start,
            "target": self.target,
            "method": self.method,
            "truncations": [m for m, _ in self.history],
            "values": [v for _, v in self.history],
            "value": self.value,
            "converged": self.converged,
            "tol": self.tol,
            "residuals": dict(self.residuals),
            **({"details": self.details} if self.details else {}),
        }


def _converged(history, tol) -> bool:
    return len(history) >= 2 and abs(history[-1][1] - history[-2][1]) < tol


def _check_start(start: FreeWord, m: int) -> None:
    if m < 1:
        raise TruncationTooSmall("truncation must be at least 1")
    if len(start) > m:
        raise TruncationTooSmall(f"start word has length {len(start)} > truncation {m}")


# ---------------------------------------------------------------------------
# linear algebra


def _minimal_solution(Q: sp.csr_matrix, b: np.ndarray) -> np.ndarray:
    """Least nonnegative solution of ``x = Q x + b`` for substochastic ``Q``.

    States that cannot reach positive ``b`` get 0; the rest form a nonsingular
    system because each of them leaks mass.
    """
    n = Q.shape[0]
    if n == 0:
        return np.zeros(0)
    # reverse reachability from a virtual sink fed by b > 0
    src = np.flatnonzero(b > 0)
    coo = Q.tocoo()
    rows = np.concatenate([coo.col, np.full(len(src), n)])
    cols = np.concatenate([coo.row, src])
    rev = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n + 1, n + 1))
    order = breadth_first_order(rev, n, directed=True, return_predecessors=False)
    keep = np.sort(order[order < n])
    x = np.zeros(n)
    if len(keep):
        Qk = Q[keep][:, keep]
        A = sp.identity(len(keep), format="csc") - Qk.tocsc()
        sol = spsolve(A, b[keep])
        x[keep] = np.atleast_1d(sol)
    return np.clip(x, 0.0, 1.0)


def _small_minimal_solution(Q: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _minimal_solution(sp.csr_matrix(Q), np.asarray(b, dtype=float))


# ---------------------------------------------------------------------------
# enumeration route


class _Space:
    """Words of length <= m reachable from the starts, without expanding terminal words."""

    def __init__(self, spec, starts, m, terminal, budget):
        self.words: list[FreeWord] = []
        self.index: dict[FreeWord, int] = {}
        self.terminal: list[bool] = []
        rows, cols, vals = [], [], []
        queue = deque()
        for s in starts:
            self._add(s, terminal, queue, budget)
        while queue:
            u = queue.popleft()
            iu = self.index[u]
            for w, p in step_distribution(spec, u):
                if len(w) > m:
                    continue
                iw = self.index.get(w)
                if iw is None:
                    iw = self._add(w, terminal, queue, budget)
                rows.append(iu)
                cols.append(iw)
                vals.append(p)
        n = len(self.words)
        self.P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def _add(self, w, terminal, queue, budget):
        if w in self.index:
            return self.index[w]
        if len(self.words) >= budget:
            raise StateBudgetExceeded(f"truncated state space exceeds {budget} words")
        i = len(self.words)
        self.words.append(w)
        self.index[w] = i
        t = bool(terminal(w))
        self.terminal.append(t)
        if not t:
            queue.append(w)
        return i


def _as_predicate(target) -> tuple[Callable[[FreeWord], bool], str]:
    if isinstance(target, FreeWord):
        return (lambda w: w == target), str(target)
    if callable(target):
        return target, getattr(target, "__name__", "predicate")
    words = frozenset(target)
    return (lambda w: w in words), "{" + ",".join(sorted(str(w) for w in words)) + "}"


def _enum_hitting(spec, starts, pred, m, budget) -> dict[FreeWord, float]:
    space = _Space(spec, starts, m, pred, budget)
    term = np.array(space.terminal, dtype=bool)
    free = np.flatnonzero(~term)
    P = space.P
    b = np.asarray(P[free][:, term].sum(axis=1)).ravel()
    Q = P[free][:, free]
    x = _minimal_solution(Q.tocsr(), b)
    h = np.ones(len(space.words))
    h[free] = x
    return {s: float(h[space.index[s]]) for s in starts}


def _enum_green(spec, x, y, m, budget) -> float:
    space = _Space(spec, [x], m, lambda w: False, budget)
    iy = space.index.get(y)
    if iy is None:
        return 0.0
    n = len(space.words)
    A = (sp.identity(n, format="csc") - space.P.tocsc())
    e = np.zeros(n)
    e[iy] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        try:
            g = spsolve(A, e)
        except Exception:
            return float("inf")
    return float(np.atleast_1d(g)[space.index[x]])


# ---------------------------------------------------------------------------
# cone route


def hitting_tables(spec: ModelSpec, m: int) -> dict[int, np.ndarray]:
    """``H[i][d, j]``: probability that the walk from letter ``j`` of factor ``i``
    hits ``o`` while its length stays <= ``d`` (``d = 0..m``)."""
    spec.require_valid()
    tables = {i: np.zeros((m + 1, spec.factor(i).n_letters)) for i in (1, 2)}
    for d in range(1, m + 1):
        for i in (1, 2):
            j = 3 - i
            rho = _rho(spec, j, tables[j][d - 1])
            fac = spec.factor(i)
            verts = [fac.letter_vertex(k) for k in range(fac.n_letters)]
            a = spec.weight(i)
            Q = a * fac.matrix[np.ix_(verts, verts)] / (1.0 - rho)
            b = a * fac.matrix[verts, fac.root] / (1.0 - rho)
            tables[i][d] = _small_minimal_solution(Q, b)
    return tables


def _rho(spec: ModelSpec, j: int, h: np.ndarray) -> float:
    """Probability that one factor-``j`` step taken at a word of the other type
    is followed by a return to that word (``h``: hitting values one level down)."""
    fac = spec.factor(j)
    row = fac.matrix[fac.root]
    verts = [fac.letter_vertex(k) for k in range(fac.n_letters)]
    return spec.weight(j) * (row[fac.root] + float(row[verts] @ h))


def _cone_prefix_hit(tables, start: FreeWord, q: int, m: int) -> float:
    value = 1.0
    for j in range(q + 1, len(start) + 1):
        f, v = start.letters[j - 1]
        value *= tables[f][m - j + 1, v]
    return value


def _cone_xi(spec, tables, i, v, m) -> float:
    fac = spec.factor(i)
    x = fac.letter_vertex(v)
    a = spec.weight(i)
    leave = a * (1.0 - fac.matrix[x, x])
    if leave <= 0.0:
        return 0.0
    stay = a * fac.matrix[x, x] + _rho(spec, 3 - i, tables[3 - i][m - 1])
    return min(1.0, leave / (1.0 - stay))


def _cone_u00(spec, tables, m) -> float:
    return _rho(spec, 1, tables[1][m]) + _rho(spec, 2, tables[2][m])


def _shallow_index(spec: ModelSpec, w: FreeWord) -> int:
    """Row of a word of length <= 1 in the shallow chain: ``o``, factor-1 letters, factor-2 letters."""
    if not w.letters:
        return 0
    f, v = w.letters[0]
    return 1 + v + (spec.factor1.n_letters if f == 2 else 0)


def _shallow_chain(spec: ModelSpec, tables, m: int) -> np.ndarray:
    """The walk watched only while its length is <= 1.

    Excursions below a one-letter word return to it with probability
    ``rho`` (one level less room), so they fold into self-loops; the chain is
    exact for the truncated walk.
    """
    n1, n2 = spec.factor1.n_letters, spec.factor2.n_letters
    n = 1 + n1 + n2
    Q = np.zeros((n, n))
    offset = {1: 1, 2: 1 + n1}
    for i in (1, 2):
        fac = spec.factor(i)
        a = spec.weight(i)
        verts = [fac.letter_vertex(k) for k in range(fac.n_letters)]
        Q[0, 0] += a * fac.matrix[fac.root, fac.root]
        Q[0, offset[i]: offset[i] + fac.n_letters] += a * fac.matrix[fac.root, verts]
        loop = _rho(spec, 3 - i, tables[3 - i][m - 1]) if m >= 1 else 0.0
        for k, x in enumerate(verts):
            r = offset[i] + k
            Q[r, 0] += a * fac.matrix[x, fac.root]
            Q[r, offset[i]: offset[i] + fac.n_letters] += a * fac.matrix[x, verts]
            Q[r, r] += loop
    return Q


def _shallow_green(Q: np.ndarray, col: int) -> np.ndarray:
    """Expected visits to state ``col`` from every state: ``(I - Q) g = e_col``."""
    e = np.zeros(len(Q))
    e[col] = 1.0
    try:
        g = np.linalg.solve(np.eye(len(Q)) - Q, e)
    except np.linalg.LinAlgError:
        return np.full(len(Q), np.inf)
    return g if np.all(np.isfinite(g)) and np.all(g >= -1e-12) else np.full(len(Q), np.inf)


def _shallow_hit(Q: np.ndarray, col: int) -> np.ndarray:
    """Probability of ever reaching state ``col`` (1 at ``col`` itself)."""
    free = np.array([k for k in range(len(Q)) if k != col])
    h = np.ones(len(Q))
    if len(free):
        h[free] = _small_minimal_solution(Q[np.ix_(free, free)], Q[free, col])
    return h


def _shallow_return(Q: np.ndarray, col: int) -> float:
    return float(min(1.0, Q[col] @ _shallow_hit(Q, col)))


def _cone_hit_shallow(spec, tables, start: FreeWord, y: FreeWord, m: int) -> float:
    """Hit a word ``y`` of length <= 1 from any start.

    A start deeper than one letter reaches length <= 1 only through its first
    letter, so the answer is a prefix factor times a shallow-chain value.
    """
    head = FreeWord(start.letters[:1])
    if start.letters[:1] and y.letters and start.letters[0] == y.letters[0]:
        return _cone_prefix_hit(tables, start, 1, m)
    lead = _cone_prefix_hit(tables, start, 1, m) if len(start) > 1 else 1.0
    Q = _shallow_chain(spec, tables, m)
    return lead * float(_shallow_hit(Q, _shallow_index(spec, y))[_shallow_index(spec, head)])


# ---------------------------------------------------------------------------
# public API


def _pick(method: str, cone_ok: bool) -> str:
    if method == "auto":
        return "cone" if cone_ok else "enumerate"
    if method not in ("cone", "enumerate"):
        raise ValueError(f"unknown method {method!r}")
    if method == "cone" and not cone_ok:
        raise ValueError("the cone route does not cover this query")
    return method


def hitting_probability(
    spec: ModelSpec,
    start: FreeWord,
    target,
    m: int,
    *,
    tol: float = DEFAULT_TOL,
    method: str = "auto",
    budget: int = DEFAULT_STATE_BUDGET,
) -> SolveResult:
    """Probability that the walk from ``start`` ever enters ``target`` (killed above length ``m``).

    ``target`` is a word, a collection of words, or a predicate on words. The
    cone route covers a target that is a prefix of ``start`` or has length <= 1.
    """
    spec.require_valid()
    spec.check_word(start)
    _check_start(start, m)
    pred, label = _as_predicate(target)
    if pred(start):
        return SolveResult("hitting probability", 1.0, m, [(m, 1.0)], True, "trivial", str(start), label, tol)
    prefix = isinstance(target, FreeWord) and in_cone(target, start)
    cone_ok = isinstance(target, FreeWord) and (prefix or len(target) <= 1)
    route = _pick(method, cone_ok)
    lo = max(1, len(start), len(target) if isinstance(target, FreeWord) else 1)
    if route == "cone":
        tables = hitting_tables(spec, m)
        if prefix:
            history = [(mm, _cone_prefix_hit(tables, start, len(target), mm)) for mm in range(lo, m + 1)]
        else:
            history = [(mm, _cone_hit_shallow(spec, tables, start, target, mm)) for mm in range(lo, m + 1)]
    else:
        levels = [mm for mm in (m - 1, m) if mm >= lo]
        history = [(mm, _enum_hitting(spec, [start], pred, mm, budget)[start]) for mm in levels]
    return SolveResult(
        "hitting probability", history[-1][1], m, history, _converged(history, tol), route, str(start), label, tol
    )


def xi(
    spec: ModelSpec,
    i: int,
    m: int,
    *,
    tol: float = DEFAULT_TOL,
    method: str = "auto",
    budget: int = DEFAULT_STATE_BUDGET,
) -> SolveResult:
    """Probability of ever leaving the cone of a one-letter word of factor ``i``.

    Computed from every letter of the factor; ``details["per_base"]`` lists the
    values and ``details["spread"]`` their range. ``value`` is the one for the
    first letter.
    """
    spec.require_valid()
    _check_start(FreeWord(((i, 0),)), m)
    route = _pick(method, True)
    fac = spec.factor(i)
    bases = [FreeWord(((i, v),)) for v in range(fac.n_letters)]
    per_base = {}
    histories = {}
    if route == "cone":
        tables = hitting_tables(spec, m)
        for w in bases:
            histories[w] = [(mm, _cone_xi(spec, tables, i, w.letters[0].vertex, mm)) for mm in range(1, m + 1)]
    else:
        for w in bases:

            def outside(y, w=w):
                return not in_cone(w, y)

            levels = [mm for mm in (m - 1, m) if mm >= 1]
            histories[w] = [(mm, _enum_hitting(spec, [w], outside, mm, budget)[w]) for mm in levels]
    for w in bases:
        per_base[str(w)] = histories[w][-1][1]
    vals = list(per_base.values())
    history = histories[bases[0]]
    return SolveResult(
        f"xi_{i}",
        history[-1][1],
        m,
        history,
        all(_converged(h, tol) for h in histories.values()),
        route,
        f"one-letter words of factor {i}",
        "complement of the cone",
        tol,
        details={"per_base": per_base, "spread": max(vals) - min(vals)},
    )


def first_return(
    spec: ModelSpec,
    x: FreeWord = EMPTY,
    m: int = 40,
    *,
    tol: float = DEFAULT_TOL,
    method: str = "auto",
    budget: int = DEFAULT_STATE_BUDGET,
) -> SolveResult:
    """``U(x, x)``: probability of returning to ``x`` after time 0."""
    spec.require_valid()
    spec.check_word(x)
    _check_start(x, m)
    route = _pick(method, not x.letters)
    if route == "cone":
        tables = hitting_tables(spec, m)
        history = [(mm, min(1.0, _cone_u00(spec, tables, mm))) for mm in range(max(1, len(x)), m + 1)]
    else:
        levels = [mm for mm in (m - 1, m) if mm >= max(1, len(x))]
        history = [(mm, _enum_return(spec, x, mm, budget)) for mm in levels]
    return SolveResult(
        "first return U(x,x)", history[-1][1], m, history, _converged(history, tol), route, str(x), str(x), tol
    )


def _enum_return(spec, x, m, budget) -> float:
    outs = [(w, p) for w, p in step_distribution(spec, x) if len(w) <= m]
    starts = list(dict.fromkeys(w for w, _ in outs))
    h = _enum_hitting(spec, starts, lambda w: w == x, m, budget) if starts else {}
    return float(min(1.0, sum(p * h[w] for w, p in outs)))


def truncated_green(
    spec: ModelSpec,
    x: FreeWord,
    y: FreeWord,
    m: int,
    *,
    tol: float = DEFAULT_TOL,
    method: str = "auto",
    budget: int = DEFAULT_STATE_BUDGET,
) -> SolveResult:
    """Expected visits to ``y`` from ``x`` before the length first exceeds ``m``.

    ``residuals`` holds ``|G(x,y) - F(x,y) G(y,y)|`` and
    ``|G(x,x) (1 - U(x,x)) - 1|`` evaluated at the same truncation.
    """
    spec.require_valid()
    spec.check_word(x)
    spec.check_word(y)
    _check_start(x, m)
    _check_start(y, m)
    route = _pick(method, len(x) <= 1 and len(y) <= 1)
    lo = max(1, len(x), len(y))
    if route == "cone":
        tables = hitting_tables(spec, m)
        ix, iy = _shallow_index(spec, x), _shallow_index(spec, y)
        history = [
            (mm, float(_shallow_green(_shallow_chain(spec, tables, mm), iy)[ix])) for mm in range(lo, m + 1)
        ]
        g_xy = history[-1][1]
        Q = _shallow_chain(spec, tables, m)
        g_yy = float(_shallow_green(Q, iy)[iy])
        f_xy = 1.0 if x == y else float(_shallow_hit(Q, iy)[ix])
        u_xx = _shallow_return(Q, ix)
        g_xx = float(_shallow_green(Q, ix)[ix])
    else:
        levels = [mm for mm in (m - 1, m) if mm >= lo]
        history = [(mm, _enum_green(spec, x, y, mm, budget)) for mm in levels]
        g_xy = history[-1][1]
        g_yy = _enum_green(spec, y, y, m, budget)
        f_xy = 1.0 if x == y else _enum_hitting(spec, [x], lambda w: w == y, m, budget)[x]
        u_xx = _enum_return(spec, x, m, budget)
        g_xx = g_xy if x == y else _enum_green(spec, x, x, m, budget)
    residuals = {
        "G-FG": abs(g_xy - f_xy * g_yy),
        "G(1-U)-1": abs(g_xx * (1.0 - u_xx) - 1.0),
    }
    return SolveResult(
        "Green function G(x,y)",
        g_xy,
        m,
        history,
        _converged(history, tol),
        route,
        str(x),
        str(y),
        tol,
        residuals=residuals,
        details={"F(x,y)": f_xy, "G(y,y)": g_yy, "U(x,x)": u_xx, "G(x,x)": g_xx},
    )


def group_case_range(
    spec: ModelSpec, m: int = 40, *, tol: float = GROUP_CASE_TOL, method: str = "auto", budget: int = DEFAULT_STATE_BUDGET
) -> SolveResult:
    """``1 - U(o, o)``: the asymptotic range predicted by the group-case formula.

    Only meaningful for group-invariant models; this is not checked. The
    history decreases in ``m``.
    """
    u = first_return(spec, EMPTY, m, tol=tol, method=method, budget=budget)
    history = [(mm, 1.0 - v) for mm, v in u.history]
    res = SolveResult(
        "group-case range prediction (valid only for group-invariant models)",
        history[-1][1],
        m,
        history,
        u.converged,
        u.method,
        str(EMPTY),
        str(EMPTY),
        tol,
        details={"U(o,o)": u.value},
    )
    if spec.claims.transient is False or not u.converged:
        warnings.warn(
            f"U(o,o) has not converged at truncation {m} (value {u.value:.6g}); "
            "the walk may be recurrent and the prediction is only an upper bound",
            TransienceWarning,
            stacklevel=2,
        )
    return res
