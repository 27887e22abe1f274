"""Factor graphs, model validation and the lifted one-step kernel.

Each factor ``i`` is a finite vertex set ``{0, ..., size-1}`` with a root and a
row-stochastic matrix. The walk on the free product chooses factor 1 with
probability ``alpha`` and factor 2 otherwise, then performs one step of that
factor's chain in the copy of the factor attached at the current word.
"""
from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from .words import EMPTY, FreeWord, Letter, parse_canonical

__all__ = [
    "ROW_SUM_TOL",
    "Claims",
    "FactorSpec",
    "ModelSpec",
    "Diagnostic",
    "StepOutcome",
    "InvalidModel",
    "ModelFileError",
    "validate",
    "step_distribution",
    "graph_distance",
    "predecessors",
    "load_model",
    "model_from_dict",
    "model_to_dict",
]

ROW_SUM_TOL = 1e-12


class InvalidModel(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        msg = "; ".join(str(d) for d in self.diagnostics) or "invalid model"
        super().__init__(msg)


class ModelFileError(ValueError):
    """The model file could not be parsed (as opposed to describing an invalid model)."""


class Diagnostic(NamedTuple):
    invariant: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"[{self.invariant}] {self.location}: {self.message}"


class StepOutcome(NamedTuple):
    next: FreeWord
    prob: Any  # float, or Fraction for exact enumeration


@dataclass(frozen=True)
class Claims:
    """User assertions that the toolkit records but does not verify."""

    transient: bool | None = None
    green_radius_gt_one: bool | None = None


@dataclass(frozen=True, eq=False)
class FactorSpec:
    size: int
    root: int
    matrix: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @property
    def n_letters(self) -> int:
        return self.size - 1

    def letter_vertex(self, j: int) -> int:
        """Factor vertex of the ``j``-th non-root letter."""
        return j if j < self.root else j + 1

    def vertex_letter(self, v: int) -> int:
        if v == self.root:
            raise ValueError("the root is not a letter")
        return v if v < self.root else v - 1

    def label(self, v: int) -> str:
        if self.labels is not None:
            return self.labels[v]
        return str(v)

    @cached_property
    def rows(self) -> tuple[tuple[tuple[int, ...], tuple[float, ...]], ...]:
        """Per vertex: (positive-probability targets, their probabilities)."""
        out = []
        for x in range(self.size):
            targets = tuple(int(y) for y in np.flatnonzero(self.matrix[x] > 0))
            out.append((targets, tuple(float(self.matrix[x, y]) for y in targets)))
        return tuple(out)

    def __eq__(self, other):
        if not isinstance(other, FactorSpec):
            return NotImplemented
        return (self.size, self.root, self.labels) == (other.size, other.root, other.labels) and np.array_equal(
            self.matrix, other.matrix
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ModelSpec:
    factor1: FactorSpec
    factor2: FactorSpec
    alpha: float
    claims: Claims = field(default_factory=Claims)

    def factor(self, i: int) -> FactorSpec:
        if i == 1:
            return self.factor1
        if i == 2:
            return self.factor2
        raise ValueError(f"factor must be 1 or 2, got {i}")

    def weight(self, i: int) -> float:
        return self.alpha if i == 1 else 1.0 - self.alpha

    @cached_property
    def diagnostics(self) -> tuple[Diagnostic, ...]:
        return tuple(validate(self))

    @property
    def is_valid(self) -> bool:
        return not self.diagnostics

    def require_valid(self) -> None:
        if self.diagnostics:
            raise InvalidModel(self.diagnostics)

    @cached_property
    def digest(self) -> str:
        blob = json.dumps(model_to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def letter(self, factor: int, vertex: int) -> Letter:
        """The letter for factor vertex ``vertex`` (root excluded)."""
        return Letter(factor, self.factor(factor).vertex_letter(vertex))

    def check_word(self, word: FreeWord) -> None:
        for f, v in word.letters:
            if v >= self.factor(f).n_letters:
                raise ValueError(f"letter {f}:{v} out of range for factor {f} of size {self.factor(f).size}")

    # -- label-based rendering ------------------------------------------------

    @cached_property
    def _label_index(self) -> dict[str, Letter]:
        index = {}
        for i in (1, 2):
            fac = self.factor(i)
            if fac.labels is None:
                continue
            for v in range(fac.size):
                if v != fac.root:
                    index[fac.labels[v]] = Letter(i, fac.vertex_letter(v))
        return index

    def parse_word(self, text: str) -> FreeWord:
        """Parse ``"()"``, canonical ``"1:0.2:1"``, or label text such as ``"aba"``/``"a.b.a"``."""
        text = text.strip()
        if text in ("", "()", "o"):
            return EMPTY
        if ":" in text:
            word = parse_canonical(text)
        else:
            index = self._label_index
            if not index:
                raise ValueError("model has no labels; use canonical f:v notation")
            tokens = text.split(".") if "." in text else list(text)
            try:
                word = FreeWord(tuple(index[t] for t in tokens))
            except KeyError as exc:
                raise ValueError(f"unknown label {exc.args[0]!r} in {text!r}") from None
        self.check_word(word)
        return word

    def format_word(self, word: FreeWord) -> str:
        if not word.letters:
            return "o"
        parts = [self.factor(f).label(self.factor(f).letter_vertex(v)) for f, v in word.letters]
        sep = "" if all(len(p) == 1 for p in parts) else "."
        return sep.join(parts)


# ---------------------------------------------------------------------------
# validation


def _reachable(matrix: np.ndarray, root: int) -> set[int]:
    seen = {root}
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y in np.flatnonzero(matrix[x] > 0):
            y = int(y)
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return seen


def _validate_factor(fac: FactorSpec, name: str) -> list[Diagnostic]:
    diags = []
    m = fac.matrix
    if fac.size < 2:
        diags.append(Diagnostic("size", name, f"size must be at least 2, got {fac.size}"))
    if m.shape != (fac.size, fac.size):
        diags.append(Diagnostic("shape", name, f"matrix shape {m.shape} does not match size {fac.size}"))
        return diags
    if not 0 <= fac.root < fac.size:
        diags.append(Diagnostic("root", name, f"root {fac.root} outside 0..{fac.size - 1}"))
        return diags
    if fac.labels is not None and len(fac.labels) != fac.size:
        diags.append(Diagnostic("labels", name, f"{len(fac.labels)} labels for {fac.size} vertices"))
    if not np.all(np.isfinite(m)):
        diags.append(Diagnostic("entries", name, "matrix has non-finite entries"))
        return diags
    bad = np.argwhere((m < 0) | (m > 1))
    for x, y in bad:
        diags.append(Diagnostic("entries", f"{name}[{x},{y}]", f"probability {m[x, y]} outside [0,1]"))
    for x, s in enumerate(m.sum(axis=1)):
        if abs(s - 1.0) > ROW_SUM_TOL:
            diags.append(Diagnostic("row-sum", f"{name} row {x}", f"row sums to {s!r}, not 1"))
    unreachable = sorted(set(range(fac.size)) - _reachable(m, fac.root))
    for x in unreachable:
        diags.append(Diagnostic("reachability", f"{name} vertex {x}", "not reachable from the root"))
    return diags


def validate(spec: ModelSpec) -> list[Diagnostic]:
    """All violated model invariants; empty iff the model is usable."""
    diags = []
    if not 0.0 < spec.alpha < 1.0:
        diags.append(Diagnostic("alpha", "alpha", f"alpha must lie in (0,1), got {spec.alpha}"))
    diags += _validate_factor(spec.factor1, "factor1")
    diags += _validate_factor(spec.factor2, "factor2")
    labels = [
        spec.factor(i).labels[v]
        for i in (1, 2)
        if spec.factor(i).labels is not None and len(spec.factor(i).labels) == spec.factor(i).size
        for v in range(spec.factor(i).size)
        if v != spec.factor(i).root
    ]
    dupes = sorted({s for s in labels if labels.count(s) > 1})
    if dupes:
        diags.append(Diagnostic("labels", "factor1/factor2", f"duplicate letter labels {dupes}"))
    return diags


# ---------------------------------------------------------------------------
# kernel


def step_distribution(spec: ModelSpec, state: FreeWord, exact: bool = False) -> list[StepOutcome]:
    """Merged one-step distribution of the lifted kernel from ``state``.

    With ``exact=True`` the probabilities are :class:`~fractions.Fraction` values
    built from the binary expansion of the inputs.
    """
    spec.require_valid()
    spec.check_word(state)
    t = state.type
    merged: dict[FreeWord, Any] = {}
    for i in (1, 2):
        fac = spec.factor(i)
        weight = Fraction(spec.alpha) if exact else spec.alpha
        if i == 2:
            weight = 1 - weight
        here = fac.letter_vertex(state.letters[-1].vertex) if t == i else fac.root
        base = state.letters[:-1] if t == i else state.letters
        targets, probs = fac.rows[here]
        for w, p in zip(targets, probs):
            if w == fac.root:
                nxt = FreeWord(base) if t == i else state
            else:
                nxt = FreeWord(base + (Letter(i, fac.vertex_letter(w)),))
            mass = weight * (Fraction(p) if exact else p)
            merged[nxt] = merged.get(nxt, 0) + mass
    return [StepOutcome(w, p) for w, p in merged.items()]


def graph_distance(spec: ModelSpec, x: FreeWord) -> int:
    """Length of a shortest positive-probability path from ``o`` to ``x`` (BFS)."""
    spec.check_word(x)
    if not x.letters:
        return 0
    dist = {EMPTY: 0}
    queue = deque([EMPTY])
    # no shortest path to x leaves the words of length <= |x|
    limit = len(x)
    while queue:
        u = queue.popleft()
        for w, _ in step_distribution(spec, u):
            if w in dist or len(w) > limit:
                continue
            dist[w] = dist[u] + 1
            if w == x:
                return dist[w]
            queue.append(w)
    raise ValueError(f"{x} is not reachable from o")


def predecessors(spec: ModelSpec, i: int, y: int) -> set[int]:
    """Factor vertices ``w`` with ``p_i(w, y) > 0``."""
    fac = spec.factor(i)
    if not 0 <= y < fac.size:
        raise ValueError(f"vertex {y} outside factor {i}")
    return {int(w) for w in np.flatnonzero(fac.matrix[:, y] > 0)}


# ---------------------------------------------------------------------------
# model files

_TOP_FIELDS = {"alpha", "factor1", "factor2", "claims"}
_FACTOR_FIELDS = {"size", "root", "matrix", "labels"}
_CLAIM_FIELDS = {"transient", "green_radius_gt_one"}


def _factor_from_dict(d: Any, name: str) -> FactorSpec:
    if not isinstance(d, dict):
        raise ModelFileError(f"{name} must be an object")
    unknown = set(d) - _FACTOR_FIELDS
    if unknown:
        raise ModelFileError(f"unknown field(s) in {name}: {sorted(unknown)}")
    missing = {"size", "root", "matrix"} - set(d)
    if missing:
        raise ModelFileError(f"missing field(s) in {name}: {sorted(missing)}")
    size, root, matrix = d["size"], d["root"], d["matrix"]
    if not isinstance(size, int) or not isinstance(root, int):
        raise ModelFileError(f"{name}.size and {name}.root must be integers")
    if not isinstance(matrix, list) or not all(isinstance(row, list) for row in matrix):
        raise ModelFileError(f"{name}.matrix must be an array of arrays")
    try:
        arr = np.array(matrix, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFileError(f"{name}.matrix: {exc}") from None
    if arr.ndim != 2:
        raise ModelFileError(f"{name}.matrix must be rectangular")
    labels = d.get("labels")
    if labels is not None and (not isinstance(labels, list) or not all(isinstance(s, str) for s in labels)):
        raise ModelFileError(f"{name}.labels must be an array of strings")
    return FactorSpec(size=size, root=root, matrix=arr, labels=tuple(labels) if labels is not None else None)


def model_from_dict(d: Any) -> ModelSpec:
    if not isinstance(d, dict):
        raise ModelFileError("model document must be an object")
    unknown = set(d) - _TOP_FIELDS
    if unknown:
        raise ModelFileError(f"unknown field(s): {sorted(unknown)}")
    missing = {"alpha", "factor1", "factor2"} - set(d)
    if missing:
        raise ModelFileError(f"missing field(s): {sorted(missing)}")
    alpha = d["alpha"]
    if isinstance(alpha, bool) or not isinstance(alpha, (int, float)):
        raise ModelFileError("alpha must be a number")
    claims = d.get("claims") or {}
    if not isinstance(claims, dict):
        raise ModelFileError("claims must be an object")
    unknown = set(claims) - _CLAIM_FIELDS
    if unknown:
        raise ModelFileError(f"unknown claim(s): {sorted(unknown)}")
    return ModelSpec(
        factor1=_factor_from_dict(d["factor1"], "factor1"),
        factor2=_factor_from_dict(d["factor2"], "factor2"),
        alpha=float(alpha),
        claims=Claims(**claims),
    )


def model_to_dict(spec: ModelSpec) -> dict:
    def fac(f: FactorSpec) -> dict:
        d = {"size": f.size, "root": f.root, "matrix": f.matrix.tolist()}
        if f.labels is not None:
            d["labels"] = list(f.labels)
        return d

    d = {"alpha": spec.alpha, "factor1": fac(spec.factor1), "factor2": fac(spec.factor2)}
    claims = {k: v for k, v in vars(spec.claims).items() if v is not None}
    if claims:
        d["claims"] = claims
    return d


def load_model(path: str | Path) -> ModelSpec:
    """Read a JSON model file. Raises :class:`ModelFileError` on malformed input."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelFileError(str(exc)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: {exc}") from None
    return model_from_dict(doc)
