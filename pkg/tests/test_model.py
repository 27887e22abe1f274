import json
from collections import deque
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fprw.model import (
    Claims,
    FactorSpec,
    InvalidModel,
    ModelFileError,
    ModelSpec,
    graph_distance,
    load_model,
    model_from_dict,
    model_to_dict,
    predecessors,
    step_distribution,
    validate,
)
from fprw.words import EMPTY, FreeWord, Letter


def as_dict(outcomes):
    return {w: p for w, p in outcomes}


@st.composite
def factors(draw, max_size=4):
    """Random factor with every vertex reachable from the root (vertex 0)."""
    n = draw(st.integers(2, max_size))
    m = np.zeros((n, n))
    # a cycle through every vertex guarantees reachability
    for x in range(n):
        m[x, (x + 1) % n] = 1.0
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=6))
    for x, y in extra:
        m[x, y] += draw(st.floats(0.1, 2.0))
    m /= m.sum(axis=1, keepdims=True)
    return FactorSpec(n, 0, m)


@st.composite
def models(draw):
    return ModelSpec(draw(factors()), draw(factors()), draw(st.floats(0.05, 0.95)))


@st.composite
def model_and_word(draw, max_len=5):
    spec = draw(models())
    f = draw(st.sampled_from([1, 2]))
    letters = []
    for _ in range(draw(st.integers(0, max_len))):
        letters.append(Letter(f, draw(st.integers(0, spec.factor(f).n_letters - 1))))
        f = 3 - f
    return spec, FreeWord(tuple(letters))


def test_scenarios_validate(counterexample, z2z3, example1):
    for spec in (counterexample, z2z3, example1):
        assert validate(spec) == []


def test_row_sum_diagnostic():
    bad = FactorSpec(2, 0, [[0.1, 0.8], [1.0, 0.0]])
    good = FactorSpec(2, 0, [[0.0, 1.0], [1.0, 0.0]])
    diags = validate(ModelSpec(bad, good, 0.5))
    assert [d.invariant for d in diags] == ["row-sum"]
    assert "row 0" in diags[0].location


def test_reachability_diagnostic():
    stuck = FactorSpec(3, 0, [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    good = FactorSpec(2, 0, [[0.0, 1.0], [1.0, 0.0]])
    diags = validate(ModelSpec(good, stuck, 0.5))
    assert [d.invariant for d in diags] == ["reachability"]


def test_other_diagnostics():
    good = FactorSpec(2, 0, [[0.0, 1.0], [1.0, 0.0]])
    assert [d.invariant for d in validate(ModelSpec(good, good, 1.0))] == ["alpha"]
    neg = FactorSpec(2, 0, [[-0.5, 1.5], [1.0, 0.0]])
    assert "entries" in {d.invariant for d in validate(ModelSpec(neg, good, 0.5))}
    shape = FactorSpec(3, 0, [[0.0, 1.0], [1.0, 0.0]])
    assert [d.invariant for d in validate(ModelSpec(shape, good, 0.5))] == ["shape"]
    with pytest.raises(InvalidModel):
        step_distribution(ModelSpec(good, good, 0.0), EMPTY)


def test_step_distribution_examples(counterexample, z2z3):
    a, b, c = Letter(1, 0), Letter(2, 0), Letter(2, 1)
    assert as_dict(step_distribution(counterexample, EMPTY)) == {FreeWord((a,)): 0.5, FreeWord((b,)): 0.5}
    assert as_dict(step_distribution(counterexample, FreeWord((a,)))) == {
        FreeWord((a,)): 0.5,
        FreeWord((a, b)): 0.5,
    }
    got = as_dict(step_distribution(z2z3, FreeWord((a, b)), exact=True))
    assert got == {
        FreeWord((a, b, a)): Fraction(1, 2),
        FreeWord((a,)): Fraction(1, 4),
        FreeWord((a, c)): Fraction(1, 4),
    }


def test_outcomes_are_merged():
    # a self-loop at the root of factor 1 coincides with staying put
    f1 = FactorSpec(2, 0, [[0.5, 0.5], [1.0, 0.0]])
    f2 = FactorSpec(2, 0, [[0.0, 1.0], [1.0, 0.0]])
    spec = ModelSpec(f1, f2, 0.5)
    out = step_distribution(spec, FreeWord(((2, 0),)))
    words = [w for w, _ in out]
    assert len(words) == len(set(words))
    assert as_dict(out)[FreeWord(((2, 0),))] == pytest.approx(0.25)


@settings(max_examples=60, deadline=None)
@given(model_and_word())
def test_kernel_is_nearest_neighbour(mw):
    spec, x = mw
    out = step_distribution(spec, x)
    assert sum(p for _, p in out) == pytest.approx(1.0, abs=1e-12)
    for w, p in out:
        assert p > 0
        assert abs(len(w) - len(x)) <= 1
        # append, drop, replace, or stay
        k = min(len(w), len(x))
        if len(w) == len(x):
            assert w.letters[: k - 1] == x.letters[: k - 1]
        else:
            assert w.letters[:k] == x.letters[:k]


def _factor_distance(fac, target):
    dist = {fac.root: 0}
    queue = deque([fac.root])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(fac.matrix[u] > 0):
            if int(v) not in dist:
                dist[int(v)] = dist[u] + 1
                queue.append(int(v))
    return dist[target]


@settings(max_examples=40, deadline=None)
@given(model_and_word(max_len=3))
def test_graph_distance_is_sum_of_factor_distances(mw):
    spec, x = mw
    expect = sum(_factor_distance(spec.factor(f), spec.factor(f).letter_vertex(v)) for f, v in x.letters)
    assert graph_distance(spec, x) == expect


def test_graph_distance_examples(example1, counterexample):
    assert graph_distance(example1, EMPTY) == 0
    assert graph_distance(example1, example1.parse_word("c")) == 2
    assert graph_distance(counterexample, counterexample.parse_word("a")) == 1


def test_predecessors(example1):
    # factor 2 of the example graph: o2 -> b, b <-> c, c -> o2
    assert predecessors(example1, 2, 1) == {0, 2}
    assert predecessors(example1, 2, 2) == {1}
    zero_col = FactorSpec(3, 0, [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    spec = ModelSpec(zero_col, zero_col, 0.5)
    assert predecessors(spec, 1, 1) == {0}
    lonely = FactorSpec(2, 0, [[1.0, 0.0], [1.0, 0.0]])
    assert predecessors(ModelSpec(lonely, lonely, 0.5), 1, 1) == set()


def test_word_parsing(example1):
    w = example1.parse_word("aba")
    assert w == example1.parse_word("a.b.a") == example1.parse_word("1:0.2:0.1:0")
    assert example1.format_word(w) == "aba"
    assert example1.parse_word("o") == EMPTY
    with pytest.raises(ValueError):
        example1.parse_word("ax")
    with pytest.raises(ValueError):
        example1.parse_word("1:5")


def test_model_file_round_trip(tmp_path, example1, counterexample):
    for spec in (example1, counterexample):
        p = tmp_path / "m.json"
        p.write_text(json.dumps(model_to_dict(spec)))
        back = load_model(p)
        assert back.digest == spec.digest
        assert back.factor1 == spec.factor1 and back.claims == spec.claims


def test_model_file_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ModelFileError):
        load_model(p)
    with pytest.raises(ModelFileError):
        load_model(tmp_path / "missing.json")
    base = {"alpha": 0.5, "factor1": {"size": 2, "root": 0, "matrix": [[0, 1], [1, 0]]}}
    with pytest.raises(ModelFileError, match="missing"):
        model_from_dict(base)
    with pytest.raises(ModelFileError, match="unknown"):
        model_from_dict({**base, "factor2": base["factor1"], "beta": 1})
    with pytest.raises(ModelFileError, match="claim"):
        model_from_dict({**base, "factor2": base["factor1"], "claims": {"sure": True}})
    spec = model_from_dict({**base, "factor2": base["factor1"], "claims": {"transient": False}})
    assert spec.claims == Claims(transient=False)


def test_digest_depends_on_content(example1, counterexample):
    assert example1.digest != counterexample.digest
    assert len(example1.digest) == 16
