import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import COUNTEREXAMPLE, COUNTEREXAMPLE_EXPECTED_RANGE, HALF, brute_expected_ranges

from fprw.model import FactorSpec, InvalidModel, ModelSpec, step_distribution
from fprw.scenarios import SCENARIOS, get_scenario
from fprw.simulator import (
    BudgetExceeded,
    TransienceWarning,
    VisitedSetOverflow,
    exact_expected_range,
    exact_expected_range_series,
    range_process,
    replay,
    run,
    run_replicas,
    split_seed,
    trajectory_from_words,
)
from fprw.words import EMPTY


def test_zero_steps(counterexample):
    t = run(counterexample, 0, 1)
    assert t.n_steps == 0 and list(t.ranges) == [1] and t.final_word == EMPTY
    assert list(range_process(t).values) == [1]


def test_same_seed_same_steps(counterexample):
    a, b = run(counterexample, 10, 42), run(counterexample, 10, 42)
    assert np.array_equal(a.factors, b.factors) and np.array_equal(a.targets, b.targets)
    assert not np.array_equal(run(counterexample, 200, 42).factors, run(counterexample, 200, 43).factors)


def test_counterexample_steps_are_coin_flips(counterexample):
    t = run(counterexample, 2000, 7)
    words = list(t.words())
    for u, w in zip(words, words[1:]):
        out = step_distribution(counterexample, u)
        assert len(out) == 2 and all(p == 0.5 for _, p in out)
        assert w in {x for x, _ in out}
    assert np.all(np.diff(t.lengths) >= 0)


def test_range_by_hand(counterexample):
    p = counterexample.parse_word
    t = trajectory_from_words(counterexample, [EMPTY, p("a"), p("a")])
    assert list(range_process(t).values) == [1, 2, 2]
    t = trajectory_from_words(counterexample, [EMPTY, p("b"), p("c"), p("b")])
    assert list(range_process(t).values) == [1, 2, 3, 3]
    with pytest.raises(ValueError):
        trajectory_from_words(counterexample, [EMPTY, p("c")])


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(list(SCENARIOS)), st.integers(0, 2**63), st.integers(0, 400))
def test_range_invariants(name, seed, n):
    spec = get_scenario(name).spec
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TransienceWarning)
        t = run(spec, n, seed)
    series = range_process(t)
    assert series.violations() == []
    assert np.array_equal(series.values, t.ranges)
    words = list(t.words())
    assert len(set(words)) == t.ranges[-1]
    assert [len(w) for w in words] == t.lengths.tolist()
    for u, w in zip(words, words[1:]):
        assert w in {x for x, _ in step_distribution(spec, u)}


def test_replay_reconstructs(example1):
    t = run(example1, 500, 3)
    r = replay(example1, t.factors, t.targets, t.seed)
    assert list(r.words()) == list(t.words())
    assert np.array_equal(r.ranges, t.ranges)
    bad = t.targets.copy()
    bad[0] = 99
    with pytest.raises(ValueError):
        replay(example1, t.factors, bad)


def test_invalid_model_rejected():
    f = FactorSpec(2, 0, [[0.0, 0.9], [1.0, 0.0]])
    with pytest.raises(InvalidModel):
        run(ModelSpec(f, f, 0.5), 10, 0)


def test_visited_cap(counterexample):
    with pytest.raises(VisitedSetOverflow):
        run(counterexample, 1000, 0, max_visited=50)


def test_transience_warning_on_recurrent_walk(z2z2):
    with pytest.warns(TransienceWarning):
        run(z2z2, 200_000, 1, return_warning=100)


def test_seed_splitting():
    seeds = {split_seed(42, r) for r in range(10_000)}
    assert len(seeds) == 10_000
    assert split_seed(42, 0) != 42


def test_replicas_match_single_runs(counterexample):
    reps = run_replicas(counterexample, 300, 3, 9)
    for r in reps:
        t = run(counterexample, 300, split_seed(9, r.index))
        assert np.array_equal(r.range_series, t.ranges)
        assert r.final_length == t.lengths[-1]
    again = run_replicas(counterexample, 300, 3, 9)
    assert [r.final_range for r in again] == [r.final_range for r in reps]


def test_parallel_equals_serial(counterexample):
    serial = run_replicas(counterexample, 60_000, 4, 5, workers=1, analyze=True)
    parallel = run_replicas(counterexample, 60_000, 4, 5, workers=2, analyze=True)
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.range_series, b.range_series)
        assert np.array_equal(a.exits.e, b.exits.e)


def test_distinct_replica_paths(counterexample):
    reps = run_replicas(counterexample, 16, 64, 42)
    starts = {tuple(run(counterexample, 16, r.seed).targets) for r in reps}
    assert len(starts) > 1
    assert len({r.seed for r in reps}) == 64


def test_replica_memory_failure_is_isolated(counterexample):
    reps = run_replicas(counterexample, 400, 2, 1, max_visited=100)
    assert all(not r.ok and "VisitedSetOverflow" in r.error for r in reps)


def test_exact_range_matches_independent_enumeration(counterexample):
    series = exact_expected_range_series(counterexample, 12)
    assert series == COUNTEREXAMPLE_EXPECTED_RANGE
    assert series == brute_expected_ranges(COUNTEREXAMPLE, HALF, 12)
    assert exact_expected_range(counterexample, 1) == 2
    assert exact_expected_range(counterexample, 2) == pytest.approx(11 / 4)
    assert exact_expected_range(counterexample, 12) == 9


def test_exact_range_other_models(example1, z2z3):
    for spec in (example1, z2z3):
        m1 = spec.factor1.matrix.tolist()
        m2 = spec.factor2.matrix.tolist()
        assert exact_expected_range_series(spec, 6) == brute_expected_ranges((m1, m2), HALF, 6)


def test_exact_range_budget(counterexample):
    with pytest.raises(BudgetExceeded):
        exact_expected_range(counterexample, 12, budget=100)
    assert float(exact_expected_range(counterexample, 5, exact=False)) == pytest.approx(37 / 8)
