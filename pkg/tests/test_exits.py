import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fprw.exits import UncertifiedRecord, chain_diagnostics, exit_times, psi_decomposition
from fprw.scenarios import SCENARIOS, get_scenario
from fprw.simulator import TransienceWarning, run, trajectory_from_words
from fprw.words import EMPTY, FreeWord, Letter


def hand_trajectory(spec):
    p = spec.parse_word
    return trajectory_from_words(spec, [EMPTY, p("b"), p("c"), p("b"), p("ba"), p("bab")])


def test_hand_trace(counterexample):
    t = hand_trajectory(counterexample)
    s = exit_times(t, margin=0)
    assert s.e.tolist() == [3, 4, 5]
    assert s.record(1).w_k == Letter(2, 0)  # b
    assert s.k_of_n == 3
    rec = psi_decomposition(t, s, [1], retain_supports=True)[0]
    p = counterexample.parse_word
    assert rec.support == {EMPTY, p("b"), p("c")}
    assert (rec.r_tilde, rec.overhead) == (2, 1)
    assert (s.r_tilde[0], s.overhead[0]) == (2, 1)


def test_certification_margin(counterexample):
    t = hand_trajectory(counterexample)
    s = exit_times(t)  # default margin 5 certifies nothing on a length-3 word
    assert s.k_of_n == 0 and len(s.e) == 3
    with pytest.raises(UncertifiedRecord):
        psi_decomposition(t, s, [1])
    assert len(psi_decomposition(t, s, [1], include_uncertified=True)) == 1
    assert exit_times(t, margin=1).k_of_n == 2


def test_monotone_length_walk(counterexample):
    # no replacements of settled letters: e_k is the first time the length reaches k
    t = run(counterexample, 1500, 11)
    s = exit_times(t, margin=0)
    first = [int(np.argmax(t.lengths >= k)) for k in range(1, len(s.e) + 1)]
    # in the counterexample only the last letter can change, and only b <-> c
    for k, (ek, fk) in enumerate(zip(s.e, first), start=1):
        assert ek >= fk
        assert t.word(int(ek)) == t.final_word[:k]


def test_empty_and_short(counterexample):
    s = exit_times(run(counterexample, 0, 0))
    assert len(s.e) == 0 and s.k_of_n == 0


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(list(SCENARIOS)), st.integers(0, 2**63), st.integers(1, 400), st.integers(0, 4))
def test_counting_matches_explicit_supports(name, seed, n, margin):
    spec = get_scenario(name).spec
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TransienceWarning)
        t = run(spec, n, seed)
    s = exit_times(t, margin=margin)
    recs = psi_decomposition(t, s, include_uncertified=True)
    assert [r.r_tilde for r in recs] == s.r_tilde.tolist()
    assert [r.overhead for r in recs] == s.overhead.tolist()
    assert [r.psi_support_size for r in recs] == s.psi_size.tolist()
    # prefix stability: from e_k on the first k letters never change
    words = list(t.words())
    for k, ek in enumerate(s.e.tolist(), start=1):
        prefix = t.final_word.letters[:k]
        assert all(w.letters[:k] == prefix for w in words[ek:])
        assert words[ek - 1].letters[:k] != prefix
    assert chain_diagnostics(s, t, include_uncertified=True).clean
    if len(s.e):
        # disjoint pieces: words off the first letter's factor, the r_tilde pieces, and the carried overhead
        tau = s.w_factor[0]
        seen = set(words)
        r0 = sum(1 for w in seen if w.letters and w.letters[0].factor != tau)
        assert r0 == s.r_tilde_0
        running = r0
        for rec in recs:
            running += rec.r_tilde
            assert running + rec.overhead == t.ranges[rec.e_k]
        assert s.r_tilde.sum() <= n


def test_psi_contains_origin(z2z3):
    t = run(z2z3, 2000, 4)
    s = exit_times(t, margin=0)
    for rec in psi_decomposition(t, s, range(1, min(20, len(s.e)) + 1), retain_supports=True):
        assert EMPTY in rec.support


def test_support_cap(z2z3):
    t = run(z2z3, 500, 4)
    s = exit_times(t, margin=0)
    rec = psi_decomposition(t, s, [1], retain_supports=True, support_cap=0)[0]
    assert rec.support is None and rec.psi_support_size > 0


def test_diagnostics_detect_corruption(counterexample):
    t = run(counterexample, 2000, 2)
    s = exit_times(t)
    assert chain_diagnostics(s, t).clean
    s.w_factor[1] = s.w_factor[0]
    s.e[3] = s.e[2]
    d = chain_diagnostics(s, t)
    assert d.alternation_violations >= 1 and d.monotonicity_violations >= 1 and not d.clean


def test_overhead_vanishes_relative_to_k(counterexample):
    t = run(counterexample, 100_000, 8)
    s = exit_times(t)
    d = chain_diagnostics(s, t)
    ks = np.arange(1, d.n_records + 1)
    ratio = s.overhead[: d.n_records] / ks
    assert ratio[-len(ratio) // 10 :].mean() < 0.01
    assert d.running_mean_r_tilde[-1] == pytest.approx(s.r_tilde[: d.n_records].mean())
    assert sum(d.state_histogram.values()) == d.n_records


def test_exit_rate_matches_length_rate(counterexample):
    t = run(counterexample, 100_000, 12)
    s = exit_times(t)
    k = s.k_of_n
    assert k / s.e[k - 1] == pytest.approx(t.lengths[-1] / t.n_steps, abs=0.01)
